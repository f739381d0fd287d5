"""Domain types, RLE codec, scene JSON schema and polygon rasterization.

Coordinates follow raster storage: x grows rightward, y grows downward,
and angles are ``atan2(dy, dx)`` normalised to ``[0, 2*pi)``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import kernels
from .errors import InvariantError, SchemaError, SizeMismatch

TWO_PI = 2.0 * math.pi


def round_nearest(v):
    """Nearest-integer rounding, ties away from zero.

    Odd symmetry (``round_nearest(-v) == -round_nearest(v)``) makes a
    translation by ``-v`` undo one by ``v``.
    """
    a = np.asarray(v, dtype=np.float64)
    return (np.sign(a) * np.floor(np.abs(a) + 0.5)).astype(np.int64)


def normalize_angle(a: float) -> float:
    a = math.fmod(a, TWO_PI)
    if a < 0:
        a += TWO_PI
    # fmod of a tiny negative can land exactly on 2*pi after the shift
    return 0.0 if a >= TWO_PI else a


@dataclass(frozen=True)
class OffsetVec:
    """Roof-to-footprint displacement in pixels."""

    dx: float
    dy: float

    def __post_init__(self):
        if not (math.isfinite(self.dx) and math.isfinite(self.dy)):
            raise InvariantError(f"offset components must be finite, got ({self.dx}, {self.dy})")

    @classmethod
    def from_polar(cls, rho: float, alpha: float) -> "OffsetVec":
        if rho < 0:
            raise InvariantError(f"offset length must be >= 0, got {rho}")
        return cls(rho * math.cos(alpha), rho * math.sin(alpha))

    @property
    def rho(self) -> float:
        return math.hypot(self.dx, self.dy)

    @property
    def alpha(self) -> float:
        if self.dx == 0.0 and self.dy == 0.0:
            return 0.0
        return normalize_angle(math.atan2(self.dy, self.dx))

    @property
    def unit(self) -> tuple[float, float]:
        return (math.cos(self.alpha), math.sin(self.alpha))

    def __neg__(self) -> "OffsetVec":
        return OffsetVec(-self.dx, -self.dy)

    def as_list(self) -> list[float]:
        return [float(self.dx), float(self.dy)]


class RasterMask:
    """Immutable binary raster of shape ``(height, width)``."""

    __slots__ = ("_bits",)

    def __init__(self, bits):
        arr = np.array(bits, dtype=bool, copy=True)
        if arr.ndim != 2:
            raise InvariantError(f"mask must be 2-D, got shape {arr.shape}")
        arr.flags.writeable = False
        self._bits = arr

    @classmethod
    def empty(cls, width: int, height: int) -> "RasterMask":
        return cls(np.zeros((height, width), dtype=bool))

    @property
    def bits(self) -> np.ndarray:
        return self._bits

    @property
    def width(self) -> int:
        return self._bits.shape[1]

    @property
    def height(self) -> int:
        return self._bits.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self._bits.shape

    @property
    def area(self) -> int:
        return int(np.count_nonzero(self._bits))

    def is_empty(self) -> bool:
        return not self._bits.any()

    def pixels(self) -> tuple[np.ndarray, np.ndarray]:
        """Row and column indices of set pixels, in row-major order."""
        ys, xs = np.nonzero(self._bits)
        return ys.astype(np.int64), xs.astype(np.int64)

    def as_uint8(self) -> np.ndarray:
        return self._bits.view(np.uint8)

    def __and__(self, other: "RasterMask") -> "RasterMask":
        _same_shape(self, other)
        return RasterMask(self._bits & other._bits)

    def __or__(self, other: "RasterMask") -> "RasterMask":
        _same_shape(self, other)
        return RasterMask(self._bits | other._bits)

    def __eq__(self, other):
        if not isinstance(other, RasterMask):
            return NotImplemented
        return self.shape == other.shape and bool(np.array_equal(self._bits, other._bits))

    def __hash__(self):
        return hash((self.shape, self._bits.tobytes()))

    def __repr__(self):
        return f"RasterMask(width={self.width}, height={self.height}, area={self.area})"


def _same_shape(a: RasterMask, b: RasterMask) -> None:
    if a.shape != b.shape:
        raise InvariantError(f"mask shapes differ: {a.shape} vs {b.shape}")


def iou(a: RasterMask, b: RasterMask) -> float:
    _same_shape(a, b)
    union = np.count_nonzero(a.bits | b.bits)
    if union == 0:
        return 1.0
    return np.count_nonzero(a.bits & b.bits) / union


def signed_area(vertices: Sequence[tuple[float, float]]) -> float:
    """Shoelace area; positive for the ring orientation used throughout footkit."""
    v = np.asarray(vertices, dtype=np.float64)
    x, y = v[:, 0], v[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


@dataclass(frozen=True)
class PolygonRing:
    """Closed vertex ring in pixel coordinates.

    The ring is implicitly closed and oriented so that its shoelace area is
    non-negative. On screen (y down) such a ring runs clockwise; in the
    image's own x/y axes it is counterclockwise.
    """

    vertices: tuple[tuple[float, float], ...]

    def __post_init__(self):
        verts = tuple((float(x), float(y)) for x, y in self.vertices)
        object.__setattr__(self, "vertices", verts)
        if len(verts) < 3:
            raise InvariantError(f"ring needs >= 3 vertices, got {len(verts)}")
        for i, p in enumerate(verts):
            if not (math.isfinite(p[0]) and math.isfinite(p[1])):
                raise InvariantError(f"vertex {i} is not finite: {p}")
            if p == verts[i - 1]:
                raise InvariantError(f"consecutive vertices {i - 1} and {i} are identical")
        if signed_area(verts) < -1e-9:
            raise InvariantError("ring orientation is reversed (negative signed area)")

    @classmethod
    def from_points(cls, points: Iterable[Sequence[float]]) -> "PolygonRing":
        """Build a ring, dropping repeated vertices and fixing orientation."""
        pts: list[tuple[float, float]] = []
        for x, y in points:
            p = (float(x), float(y))
            if not pts or pts[-1] != p:
                pts.append(p)
        while len(pts) > 1 and pts[0] == pts[-1]:
            pts.pop()
        if len(pts) >= 3 and signed_area(pts) < 0:
            pts.reverse()
        return cls(tuple(pts))

    @property
    def area(self) -> float:
        return signed_area(self.vertices)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.vertices, dtype=np.float64)

    def translated(self, dx: float, dy: float) -> "PolygonRing":
        return PolygonRing(tuple((x + dx, y + dy) for x, y in self.vertices))

    def __len__(self):
        return len(self.vertices)


@dataclass(frozen=True)
class BuildingInstance:
    id: int
    roof_mask: RasterMask | None = None
    building_mask: RasterMask | None = None
    footprint_mask: RasterMask | None = None
    offset: OffsetVec | None = None
    roof_polygon: PolygonRing | None = None
    # not in the base schema; written only when present
    footprint_polygon: PolygonRing | None = None

    def __post_init__(self):
        present = [
            self.roof_mask, self.building_mask, self.footprint_mask,
            self.offset, self.roof_polygon, self.footprint_polygon,
        ]
        if all(v is None for v in present):
            raise InvariantError(f"instance {self.id} carries no data besides its id")

    def masks(self) -> dict[str, RasterMask]:
        out = {}
        for name in ("roof_mask", "building_mask", "footprint_mask"):
            m = getattr(self, name)
            if m is not None:
                out[name] = m
        return out


@dataclass(frozen=True)
class SceneAnnotation:
    image_id: str
    width: int
    height: int
    instances: tuple[BuildingInstance, ...] = field(default_factory=tuple)
    global_direction: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "instances", tuple(self.instances))
        if self.width <= 0 or self.height <= 0:
            raise InvariantError(f"scene {self.image_id!r} has non-positive size")
        ids = [inst.id for inst in self.instances]
        if len(set(ids)) != len(ids):
            raise InvariantError(f"scene {self.image_id!r} has duplicate instance ids")
        for inst in self.instances:
            for name, m in inst.masks().items():
                if m.shape != (self.height, self.width):
                    raise InvariantError(
                        f"scene {self.image_id!r} instance {inst.id}: {name} is "
                        f"{m.width}x{m.height}, scene is {self.width}x{self.height}"
                    )

    def instance(self, inst_id: int) -> BuildingInstance:
        for inst in self.instances:
            if inst.id == inst_id:
                return inst
        raise KeyError(inst_id)


# -- RLE --------------------------------------------------------------------

def rle_encode(mask: RasterMask) -> list[int]:
    """Column-major run lengths, starting with the run of zeros."""
    flat = mask.bits.ravel(order="F")
    if flat.size == 0:
        return [0]
    change = np.flatnonzero(flat[1:] != flat[:-1]) + 1
    bounds = np.concatenate(([0], change, [flat.size]))
    runs = np.diff(bounds).tolist()
    if flat[0]:
        runs.insert(0, 0)
    return [int(r) for r in runs]


def rle_decode(counts: Sequence[int], width: int, height: int) -> RasterMask:
    counts = [int(c) for c in counts]
    if any(c < 0 for c in counts):
        raise SizeMismatch("RLE counts must be non-negative")
    total = sum(counts)
    if total != width * height:
        raise SizeMismatch(f"RLE counts sum to {total}, expected {width}*{height}={width * height}")
    values = np.zeros(len(counts), dtype=bool)
    values[1::2] = True
    flat = np.repeat(values, counts)
    return RasterMask(flat.reshape((height, width), order="F"))


# -- rasterization ----------------------------------------------------------

def rasterize(poly: PolygonRing, width: int, height: int) -> RasterMask:
    """Even-odd scanline fill sampled at pixel centres, clipped to the image."""
    v = poly.as_array()
    return RasterMask(kernels.fill_polygon(v[:, 0], v[:, 1], int(width), int(height)).astype(bool))


# -- scene JSON -------------------------------------------------------------

def _require(doc: dict, key: str, where: str):
    if not isinstance(doc, dict):
        raise SchemaError(f"{where}: expected an object")
    if key not in doc:
        raise SchemaError(f"{where}: missing required field {key!r}")
    return doc[key]


def _as_int(v, where: str) -> int:
    if isinstance(v, bool) or not isinstance(v, (int, float)) or int(v) != v:
        raise SchemaError(f"{where}: expected an integer, got {v!r}")
    return int(v)


def _as_float(v, where: str) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise SchemaError(f"{where}: expected a number, got {v!r}")
    f = float(v)
    if not math.isfinite(f):
        raise SchemaError(f"{where}: number must be finite")
    return f


def _parse_rle(doc, width: int, height: int, where: str) -> RasterMask | None:
    if doc is None:
        return None
    size = _require(doc, "size", where)
    counts = _require(doc, "counts", where)
    if not isinstance(size, list) or len(size) != 2:
        raise SchemaError(f"{where}.size: expected [h, w]")
    h, w = _as_int(size[0], where), _as_int(size[1], where)
    if (h, w) != (height, width):
        raise InvariantError(f"{where}: mask size {h}x{w} does not match scene {height}x{width}")
    if not isinstance(counts, list):
        raise SchemaError(f"{where}.counts: expected a list")
    return rle_decode([_as_int(c, where) for c in counts], w, h)


def _parse_points(doc, where: str) -> PolygonRing | None:
    if doc is None:
        return None
    if not isinstance(doc, list):
        raise SchemaError(f"{where}: expected a list of [x, y]")
    pts = []
    for i, p in enumerate(doc):
        if not isinstance(p, list) or len(p) != 2:
            raise SchemaError(f"{where}[{i}]: expected [x, y]")
        pts.append((_as_float(p[0], where), _as_float(p[1], where)))
    try:
        return PolygonRing.from_points(pts)
    except InvariantError as exc:
        raise InvariantError(f"{where}: {exc}") from exc


def scene_from_dict(doc: dict) -> SceneAnnotation:
    image_id = _require(doc, "image_id", "scene")
    if not isinstance(image_id, str):
        raise SchemaError("scene.image_id: expected a string")
    where = f"scene {image_id!r}"
    width = _as_int(_require(doc, "width", where), where + ".width")
    height = _as_int(_require(doc, "height", where), where + ".height")
    raw_instances = _require(doc, "instances", where)
    if not isinstance(raw_instances, list):
        raise SchemaError(f"{where}.instances: expected a list")
    gd = doc.get("global_direction")
    global_direction = None if gd is None else _as_float(gd, where + ".global_direction")
    instances = []
    for k, item in enumerate(raw_instances):
        iw = f"{where}.instances[{k}]"
        inst_id = _as_int(_require(item, "id", iw), iw + ".id")
        off = item.get("offset")
        if off is not None:
            if not isinstance(off, list) or len(off) != 2:
                raise SchemaError(f"{iw}.offset: expected [dx, dy]")
            off = OffsetVec(_as_float(off[0], iw), _as_float(off[1], iw))
        instances.append(BuildingInstance(
            id=inst_id,
            roof_mask=_parse_rle(item.get("roof_rle"), width, height, iw + ".roof_rle"),
            building_mask=_parse_rle(item.get("building_rle"), width, height, iw + ".building_rle"),
            footprint_mask=_parse_rle(item.get("footprint_rle"), width, height, iw + ".footprint_rle"),
            offset=off,
            roof_polygon=_parse_points(item.get("roof_polygon"), iw + ".roof_polygon"),
            footprint_polygon=_parse_points(item.get("footprint_polygon"), iw + ".footprint_polygon"),
        ))
    return SceneAnnotation(image_id, width, height, tuple(instances), global_direction)


def _rle_dict(mask: RasterMask | None):
    if mask is None:
        return None
    return {"size": [mask.height, mask.width], "counts": rle_encode(mask)}


def _points(ring: PolygonRing | None):
    if ring is None:
        return None
    return [[x, y] for x, y in ring.vertices]


def scene_to_dict(scene: SceneAnnotation) -> dict:
    instances = []
    for inst in scene.instances:
        item = {
            "id": inst.id,
            "roof_rle": _rle_dict(inst.roof_mask),
            "building_rle": _rle_dict(inst.building_mask),
            "footprint_rle": _rle_dict(inst.footprint_mask),
            "offset": None if inst.offset is None else inst.offset.as_list(),
            "roof_polygon": _points(inst.roof_polygon),
        }
        if inst.footprint_polygon is not None:
            item["footprint_polygon"] = _points(inst.footprint_polygon)
        instances.append(item)
    return {
        "image_id": scene.image_id,
        "width": scene.width,
        "height": scene.height,
        "global_direction": scene.global_direction,
        "instances": instances,
    }


def parse_scenes(text: str) -> list[SceneAnnotation]:
    """Parse a JSON document holding one scene or an array of scenes."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"invalid JSON: {exc}") from exc
    if isinstance(doc, list):
        return [scene_from_dict(d) for d in doc]
    return [scene_from_dict(doc)]


def parse_scene(text: str) -> SceneAnnotation:
    scenes = parse_scenes(text)
    if len(scenes) != 1:
        raise SchemaError(f"expected a single scene, found {len(scenes)}")
    return scenes[0]


def serialize_scenes(scenes: SceneAnnotation | Sequence[SceneAnnotation]) -> str:
    if isinstance(scenes, SceneAnnotation):
        doc = scene_to_dict(scenes)
    else:
        doc = [scene_to_dict(s) for s in scenes]
    return json.dumps(doc, separators=(",", ":"), allow_nan=False) + "\n"


serialize_scene = serialize_scenes
