"""Mask translation and the multi-solution footprint derivations.

Four ways of recovering a footprint are provided:

* roof + offset: translate the roof by the offset;
* building + offset: intersect the building with its own translate;
* roof + building: scan directions, then bisect along the best one
  (``footprint_search``);
* roof + building + direction: the same bisection with the direction given.

Directions are always reported as the angle of the roof-to-footprint
displacement, ``atan2(dy, dx)`` in ``[0, 2*pi)``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import kernels
from .core import OffsetVec, PolygonRing, RasterMask, normalize_angle, round_nearest
from .errors import (
    DegenerateResult,
    EmptyBuilding,
    EmptyMask,
    EmptyRoof,
    NoOverlap,
    NonMonotoneOverlap,
    ZeroOffset,
)

FULL_OVERLAP_TOL = 1e-6


@dataclass(frozen=True)
class SearchConfig:
    angle_step: float = 1.0          # degrees
    max_iter: int = 40
    step_length: float = 5.0         # probe translation for the angle scan, px
    length_bracket_max: float | None = None  # None: image diagonal
    length_tolerance: float = 0.25   # px

    def __post_init__(self):
        if not (0 < self.angle_step <= 90):
            raise ValueError(f"angle_step must be in (0, 90], got {self.angle_step}")
        if self.max_iter < 1:
            raise ValueError(f"max_iter must be >= 1, got {self.max_iter}")
        if self.step_length <= 0 or self.length_tolerance <= 0:
            raise ValueError("step_length and length_tolerance must be > 0")
        if self.length_bracket_max is not None and self.length_bracket_max <= 0:
            raise ValueError("length_bracket_max must be > 0")

    def bracket(self, mask: RasterMask) -> float:
        if self.length_bracket_max is not None:
            return float(self.length_bracket_max)
        return math.hypot(mask.width, mask.height)


@dataclass(frozen=True)
class SearchResult:
    theta: float
    length: float
    overlap: float
    footprint: RasterMask
    degenerate: bool = False

    @property
    def offset(self) -> OffsetVec:
        return OffsetVec.from_polar(self.length, self.theta)


# -- primitives -------------------------------------------------------------

def _shift(bits: np.ndarray, sx: int, sy: int) -> np.ndarray:
    h, w = bits.shape
    out = np.zeros_like(bits)
    if abs(sx) >= w or abs(sy) >= h:
        return out
    src_y = slice(max(0, -sy), min(h, h - sy))
    src_x = slice(max(0, -sx), min(w, w - sx))
    dst_y = slice(max(0, sy), min(h, h + sy))
    dst_x = slice(max(0, sx), min(w, w + sx))
    out[dst_y, dst_x] = bits[src_y, src_x]
    return out


def shift_mask(m: RasterMask, sx: int, sy: int) -> RasterMask:
    """Integer translation; pixels leaving the image are dropped."""
    return RasterMask(_shift(m.bits, int(sx), int(sy)))


def translate_mask(m: RasterMask, v: OffsetVec) -> RasterMask:
    """Move every set pixel by ``v``, rounding to the nearest cell.

    Pixel coordinates are integers, so rounding each displaced pixel equals a
    single integer shift by ``round_nearest(v)``.
    """
    sx, sy = round_nearest([v.dx, v.dy])
    return shift_mask(m, sx, sy)


def overlap_ratio(moved_roof: RasterMask, building: RasterMask, roof_area: float) -> float:
    if roof_area <= 0:
        raise EmptyRoof("roof area is zero")
    return np.count_nonzero(moved_roof.bits & building.bits) / roof_area


def footprint_from_roof_offset(roof: RasterMask, o: OffsetVec) -> RasterMask:
    if roof.is_empty():
        raise EmptyRoof("roof mask is empty")
    return translate_mask(roof, o)


def _swept_intersection(building: RasterMask, o: OffsetVec, what: str) -> RasterMask:
    if building.is_empty():
        raise EmptyBuilding("building mask is empty")
    if o.dx == 0.0 and o.dy == 0.0:
        raise ZeroOffset("offset is zero; building and its translate coincide")
    out = translate_mask(building, o) & building
    if out.is_empty():
        warnings.warn(f"{what} is empty: offset exceeds the building extent", DegenerateResult)
    return out


def footprint_from_building_offset(building: RasterMask, o: OffsetVec) -> RasterMask:
    """Region shared by the building mask and its translate along the offset.

    The building is the roof swept along the offset, so moving it by the
    offset slides its roof end onto its footprint end; what stays covered is
    the footprint.
    """
    return _swept_intersection(building, o, "footprint")


def roof_from_building_offset(building: RasterMask, o: OffsetVec) -> RasterMask:
    return _swept_intersection(building, -o, "roof")


def footprint_polygon_from_roof_polygon(poly: PolygonRing, o: OffsetVec) -> PolygonRing:
    return poly.translated(o.dx, o.dy)


# -- search -----------------------------------------------------------------

class _Probe:
    """Overlap evaluator for translates of one roof against a target mask."""

    def __init__(self, roof: RasterMask, target: RasterMask):
        self.ys, self.xs = roof.pixels()
        self.area = len(self.ys)
        self.target = target.as_uint8()

    def counts(self, shifts: np.ndarray) -> np.ndarray:
        shifts = np.asarray(shifts, dtype=np.int64).reshape(-1, 2)
        return kernels.shift_overlap_counts(self.ys, self.xs, self.target, shifts[:, 1], shifts[:, 0])

    def count_along(self, theta: float, length: float) -> int:
        k = round_nearest([length * math.cos(theta), length * math.sin(theta)])
        return int(self.counts(k)[0])


def _require_masks(roof: RasterMask, building: RasterMask) -> None:
    if roof.is_empty():
        raise EmptyMask("roof mask is empty")
    if building.is_empty():
        raise EmptyMask("building mask is empty")
    if roof.shape != building.shape:
        raise EmptyMask(f"mask shapes differ: {roof.shape} vs {building.shape}")


def _bisect(pred, lo: float, hi: float, cfg: SearchConfig) -> tuple[float, float]:
    """Shrink ``[lo, hi]`` with ``pred(lo)`` true and ``pred(hi)`` false."""
    for _ in range(cfg.max_iter):
        if hi - lo <= cfg.length_tolerance:
            break
        mid = 0.5 * (lo + hi)
        if pred(mid):
            lo = mid
        else:
            hi = mid
    return lo, hi


@dataclass(frozen=True)
class _Plateau:
    length: float          # projection of the last full-overlap shift on the direction
    shift: tuple[int, int]
    overlap: float
    degenerate: bool


def _plateau(probe: _Probe, theta: float, cfg: SearchConfig, bracket: float, snap: bool = True) -> _Plateau:
    """Farthest translate along ``theta`` that keeps the roof inside the target.

    Implements the length step ``argmin_l |S(l) - 1|``: overlap is 1 on the
    whole plateau ``[0, L]``, and the far end is taken because that is where
    the roof reaches the footprint. If the roof never fully overlaps, the
    best of a 1 px probe grid is returned and flagged degenerate.

    With ``snap`` the bisection result is followed by a walk over integer
    shifts (see ``_snap_far``) so that a direction a fraction of a degree
    off the true one still reaches the far end of the plateau.
    """
    c, s = math.cos(theta), math.sin(theta)
    need = probe.area * (1.0 - FULL_OVERLAP_TOL)

    def full(length):
        return probe.count_along(theta, length) >= need

    if not full(0.0):
        grid = np.arange(0.0, bracket + 1.0, 1.0)
        shifts = round_nearest(np.stack([grid * c, grid * s], axis=1))
        ratios = probe.counts(shifts) / probe.area
        best = int(np.argmin(np.abs(ratios - 1.0)))
        k = tuple(int(v) for v in shifts[best])
        return _Plateau(max(0.0, k[0] * c + k[1] * s), k, float(ratios[best]), True)
    if full(bracket):
        lo = bracket
    else:
        lo, _ = _bisect(full, 0.0, bracket, cfg)
    k = round_nearest([lo * c, lo * s])
    if snap:
        k = _snap_far(probe, k, c, s, need)
    kx, ky = int(k[0]), int(k[1])
    return _Plateau(max(0.0, kx * c + ky * s), (kx, ky), 1.0, False)


_NEIGHBOURS = np.array([(dx, dy) for dy in (-1, 0, 1) for dx in (-1, 0, 1) if dx or dy], dtype=np.int64)


def _snap_far(probe: _Probe, k: np.ndarray, c: float, s: float, need: float) -> np.ndarray:
    """Step to neighbouring full-overlap shifts while the projection on (c, s) grows.

    A digital line along a grid angle drifts a pixel off the sweep of the
    true direction long before its end; the full-overlap shifts still form
    an 8-connected path, which this walk follows to its far end.
    """
    u = np.array([c, s])
    cur = np.asarray(k, dtype=np.int64)
    while True:
        cand = cur + _NEIGHBOURS
        cand = cand[cand @ u > cur @ u + 1e-12]
        ok = cand[probe.counts(cand) >= need]
        if len(ok) == 0:
            return cur
        cur = ok[int(np.argmax(ok @ u))]


def _runs(flags: np.ndarray) -> list[tuple[int, int]]:
    """Maximal runs of True in a circular boolean array, as (start, length)."""
    n = len(flags)
    if flags.all():
        return [(0, n)]
    start = int(np.flatnonzero(~flags)[0]) + 1
    runs, cur = [], None
    for k in range(n):
        i = (start + k) % n
        if flags[i]:
            cur = (i, 1) if cur is None else (cur[0], cur[1] + 1)
        elif cur is not None:
            runs.append(cur)
            cur = None
    if cur is not None:
        runs.append(cur)
    return runs


def _search(roof: RasterMask, building: RasterMask, cfg: SearchConfig):
    _require_masks(roof, building)
    probe = _Probe(roof, building)
    if probe.counts([(0, 0)])[0] == 0:
        raise NoOverlap("roof and building share no pixel")
    bracket = cfg.bracket(roof)

    # angle scan: displacement (-l cos a, -l sin a) as in the movement matrix
    alphas = np.deg2rad(np.arange(0.0, 360.0, cfg.angle_step))
    disp = -cfg.step_length * np.stack([np.cos(alphas), np.sin(alphas)], axis=1)
    counts = probe.counts(round_nearest(disp))
    s_max = counts.max()
    if s_max == 0:
        raise NoOverlap("no probed direction overlaps the building")
    thetas = np.array([normalize_angle(a + math.pi) for a in alphas])
    tied = counts == s_max

    # ties at the probe length are split by how far the roof can travel
    reach = np.full(len(alphas), -1, dtype=np.int64)
    for i in np.flatnonzero(tied):
        p = _plateau(probe, thetas[i], cfg, bracket, snap=False)
        reach[i] = p.shift[0] ** 2 + p.shift[1] ** 2
    best_reach = reach.max()
    runs = _runs(reach == best_reach)
    start, length = max(runs, key=lambda r: (r[1], -r[0]))
    centre = start + (length - 1) / 2.0
    lower = (start + (length - 1) // 2) % len(alphas)
    theta = thetas[lower]
    if length % 2 == 0:
        mid_theta = normalize_angle(thetas[start % len(alphas)] + math.radians(cfg.angle_step) * (centre - start))
        p = _plateau(probe, mid_theta, cfg, bracket, snap=False)
        if p.shift[0] ** 2 + p.shift[1] ** 2 >= best_reach and not p.degenerate:
            theta = mid_theta
    chosen = _plateau(probe, theta, cfg, bracket)
    return probe, float(theta), chosen, float(s_max) / probe.area


def footprint_search(roof: RasterMask, building: RasterMask, cfg: SearchConfig | None = None) -> SearchResult:
    """Recover the footprint from roof and building masks alone.

    A linear scan over the angle grid finds the directions maximising the
    overlap of the probe-translated roof with the building. Among tied
    directions the one whose full-overlap plateau reaches farthest wins
    (centre of the tied run). The length is then the far end of that
    plateau, found by bisection.

    Raises:
        EmptyMask: either mask is empty.
        NoOverlap: the roof never touches the building.
    """
    cfg = cfg or SearchConfig()
    _, theta, plateau, _ = _search(roof, building, cfg)
    footprint = shift_mask(roof, *plateau.shift)
    if plateau.degenerate:
        warnings.warn("roof never fully overlaps the building; using best probed length", DegenerateResult)
    return SearchResult(
        theta=theta,
        length=plateau.length,
        overlap=plateau.overlap,
        footprint=footprint,
        degenerate=plateau.degenerate,
    )


def length_search_given_direction(
    roof: RasterMask, building: RasterMask, theta: float, cfg: SearchConfig | None = None
) -> float:
    """Footprint-search length bisection with the direction supplied."""
    cfg = cfg or SearchConfig()
    _require_masks(roof, building)
    probe = _Probe(roof, building)
    if probe.counts([(0, 0)])[0] == 0:
        raise NoOverlap("roof and building share no pixel")
    p = _plateau(probe, theta, cfg, cfg.bracket(roof))
    if p.degenerate:
        warnings.warn("roof never fully overlaps the building along this direction", DegenerateResult)
    return p.length


def footprint_given_direction(
    roof: RasterMask, building: RasterMask, theta: float, cfg: SearchConfig | None = None
) -> SearchResult:
    cfg = cfg or SearchConfig()
    _require_masks(roof, building)
    probe = _Probe(roof, building)
    if probe.counts([(0, 0)])[0] == 0:
        raise NoOverlap("roof and building share no pixel")
    p = _plateau(probe, theta, cfg, cfg.bracket(roof))
    return SearchResult(normalize_angle(theta), p.length, p.overlap, shift_mask(roof, *p.shift), p.degenerate)


def _exit_length(probe: _Probe, theta: float, cfg: SearchConfig, bracket: float) -> float:
    """Shortest travel along ``theta`` after which the roof no longer touches the target.

    Reported, like the plateau length, as the projection of the first
    integer shift that no longer touches, so a contact at whole pixels is
    returned at its exact length rather than half a pixel early.
    """

    def touching(length):
        return probe.count_along(theta, length) > 0

    if not touching(0.0):
        return 0.0
    if touching(bracket):
        raise NonMonotoneOverlap("roof still overlaps at the bracket limit")
    _, hi = _bisect(touching, 0.0, bracket, cfg)
    c, s = math.cos(theta), math.sin(theta)
    kx, ky = round_nearest([hi * c, hi * s])
    return max(0.0, float(kx * c + ky * s))


def refine_offset_two_phase(
    roof: RasterMask, building: RasterMask, cfg: SearchConfig | None = None
) -> OffsetVec:
    """Offset from two critical contacts along the optimal direction.

    The far contact is the travel after which the roof leaves the building
    (sweep length plus roof depth). The near contact is the travel after
    which the roof leaves its own original position (roof depth). Their
    difference is the roof-to-footprint length.

    Raises:
        NoOverlap: roof and building share no pixel.
        NonMonotoneOverlap: the near contact lies beyond the far contact.
    """
    cfg = cfg or SearchConfig()
    probe, theta, _, _ = _search(roof, building, cfg)
    bracket = cfg.bracket(roof)
    far = _exit_length(probe, theta, cfg, bracket)
    near = _exit_length(_Probe(roof, roof), theta, cfg, bracket)
    if near > far + cfg.length_tolerance:
        raise NonMonotoneOverlap(f"near contact {near:.2f} px lies beyond far contact {far:.2f} px")
    return OffsetVec.from_polar(max(0.0, far - near), theta)


def critical_contacts(
    roof: RasterMask, building: RasterMask, theta: float, cfg: SearchConfig | None = None
) -> tuple[float, float]:
    """(near, far) critical contact lengths along a fixed direction."""
    cfg = cfg or SearchConfig()
    _require_masks(roof, building)
    bracket = cfg.bracket(roof)
    return (
        _exit_length(_Probe(roof, roof), theta, cfg, bracket),
        _exit_length(_Probe(roof, building), theta, cfg, bracket),
    )
