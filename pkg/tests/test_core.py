import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from footkit.core import (
    BuildingInstance,
    OffsetVec,
    PolygonRing,
    RasterMask,
    SceneAnnotation,
    iou,
    normalize_angle,
    parse_scene,
    parse_scenes,
    rasterize,
    rle_decode,
    rle_encode,
    round_nearest,
    scene_from_dict,
    scene_to_dict,
    serialize_scene,
    serialize_scenes,
)
from footkit.errors import InvariantError, SchemaError, SizeMismatch
from footkit.polygonize import trace_contours
from footkit.synth import SynthConfig, gen_scene

from conftest import box

finite = st.floats(-1e4, 1e4, allow_nan=False, allow_infinity=False)
masks = arrays(np.bool_, st.tuples(st.integers(1, 12), st.integers(1, 12)))


# -- OffsetVec ---------------------------------------------------------------

@given(finite, finite)
def test_offset_polar_roundtrip(dx, dy):
    o = OffsetVec(dx, dy)
    assert o.rho == pytest.approx(math.sqrt(dx * dx + dy * dy), rel=1e-9)
    assert 0.0 <= o.alpha < 2 * math.pi
    back = OffsetVec.from_polar(o.rho, o.alpha)
    assert back.dx == pytest.approx(dx, abs=1e-9 * max(1.0, o.rho))
    assert back.dy == pytest.approx(dy, abs=1e-9 * max(1.0, o.rho))


def test_zero_offset_angle_is_zero():
    assert OffsetVec(0.0, 0.0).alpha == 0.0
    assert OffsetVec(0.0, 0.0).rho == 0.0


def test_offset_angles_follow_image_axes():
    assert OffsetVec(0, 1).alpha == pytest.approx(math.pi / 2)   # straight down the image
    assert OffsetVec(-1, 0).alpha == pytest.approx(math.pi)
    assert OffsetVec(0, -1).alpha == pytest.approx(3 * math.pi / 2)


def test_offset_rejects_non_finite():
    with pytest.raises(InvariantError):
        OffsetVec(float("nan"), 0.0)
    with pytest.raises(InvariantError):
        OffsetVec.from_polar(-1.0, 0.0)


def test_normalize_angle_range():
    for a in (-1e-18, -2 * math.pi, 7.0, 2 * math.pi, -3.0):
        assert 0.0 <= normalize_angle(a) < 2 * math.pi


def test_round_nearest_ties_away_from_zero():
    np.testing.assert_array_equal(round_nearest([0.5, -0.5, 1.5, -1.5, 2.4, -2.6]), [1, -1, 2, -2, 2, -3])


# -- RasterMask / RLE --------------------------------------------------------

def test_rle_examples():
    assert rle_encode(RasterMask(np.zeros((2, 2), bool))) == [4]
    assert rle_encode(RasterMask(np.ones((2, 2), bool))) == [0, 4]
    one = np.zeros((2, 2), bool)
    one[0, 0] = True
    assert rle_encode(RasterMask(one)) == [0, 1, 3]
    assert rle_decode([4], 2, 2) == RasterMask(np.zeros((2, 2), bool))
    assert rle_decode([0, 4], 2, 2) == RasterMask(np.ones((2, 2), bool))


def test_rle_is_column_major():
    bits = np.zeros((2, 3), bool)
    bits[0, 1] = True   # x=1, y=0 is the third pixel in column-major order
    assert rle_encode(RasterMask(bits)) == [2, 1, 3]


@settings(max_examples=200)
@given(masks)
def test_rle_roundtrip(bits):
    m = RasterMask(bits)
    counts = rle_encode(m)
    assert sum(counts) == m.width * m.height
    assert all(c >= 0 for c in counts)
    assert rle_decode(counts, m.width, m.height) == m


def test_rle_decode_size_mismatch():
    with pytest.raises(SizeMismatch):
        rle_decode([3], 2, 2)
    with pytest.raises(SizeMismatch):
        rle_decode([5, -1], 2, 2)


def test_mask_is_immutable_copy():
    src = np.zeros((3, 3), bool)
    m = RasterMask(src)
    src[0, 0] = True
    assert m.area == 0
    with pytest.raises(ValueError):
        m.bits[0, 0] = True


def test_mask_ops_and_iou():
    a = box(10, 10, 0, 0, 4, 4)
    b = box(10, 10, 2, 0, 6, 4)
    assert (a & b).area == 8
    assert (a | b).area == 24
    assert iou(a, b) == pytest.approx(8 / 24)
    assert iou(RasterMask.empty(4, 4), RasterMask.empty(4, 4)) == 1.0
    with pytest.raises(InvariantError):
        a & RasterMask.empty(5, 5)


def test_mask_requires_2d():
    with pytest.raises(InvariantError):
        RasterMask(np.zeros(4, bool))


# -- PolygonRing -------------------------------------------------------------

def test_ring_invariants():
    with pytest.raises(InvariantError):
        PolygonRing(((0, 0), (1, 0)))
    with pytest.raises(InvariantError):
        PolygonRing(((0, 0), (1, 0), (1, 0), (0, 1)))
    with pytest.raises(InvariantError):
        PolygonRing(((0, 0), (0, 1), (1, 0)))   # negative shoelace area
    ring = PolygonRing.from_points([(0, 0), (0, 1), (1, 1), (1, 0), (0, 0)])
    assert ring.area == pytest.approx(1.0)
    assert len(ring) == 4


def test_ring_translated():
    ring = PolygonRing(((0, 0), (1, 0), (1, 1), (0, 1)))
    assert ring.translated(5, -3).vertices == ((5, -3), (6, -3), (6, -2), (5, -2))


# -- rasterize ---------------------------------------------------------------

def test_rasterize_rectangle_area():
    ring = PolygonRing(((0, 0), (10, 0), (10, 10), (0, 10)))
    m = rasterize(ring, 20, 20)
    assert m.area == 100
    assert m == box(20, 20, 0, 0, 10, 10)


def test_rasterize_degenerate_triangle():
    ring = PolygonRing(((0, 0), (10, 0), (5, 1e-6)))
    assert rasterize(ring, 20, 20).area == 0


def test_rasterize_clips_to_image():
    ring = PolygonRing(((-5, -5), (5, -5), (5, 5), (-5, 5)))
    assert rasterize(ring, 20, 20) == box(20, 20, 0, 0, 5, 5)


def test_rasterize_pixel_centre_rule():
    # centres at x = 0.5, 1.5, 2.5: a span [0.5, 2.5) covers columns 0 and 1
    ring = PolygonRing(((0.5, 0), (2.5, 0), (2.5, 1), (0.5, 1)))
    assert rasterize(ring, 4, 1).bits.tolist() == [[True, True, False, False]]


def _convex_polygon(rng):
    cx, cy = rng.uniform(25, 35, 2)
    r = rng.uniform(8, 20)
    angles = np.sort(rng.uniform(0, 2 * math.pi, int(rng.integers(5, 12))))
    return PolygonRing.from_points(np.c_[cx + r * np.cos(angles), cy + r * np.sin(angles)])


def test_rasterize_trace_rasterize(backend):
    rng = np.random.default_rng(17)
    checked = 0
    while checked < 40:
        poly = _convex_polygon(rng)
        if poly.area < 100:
            continue
        m = rasterize(poly, 60, 60)
        rings = trace_contours(m, min_area=1)
        again = RasterMask(np.logical_or.reduce([rasterize(r, 60, 60).bits for r in rings]))
        assert iou(again, m) >= 0.99
        checked += 1


# -- scene JSON --------------------------------------------------------------

def test_minimal_scene_parses():
    text = '{"image_id": "a", "width": 4, "height": 3, "instances": [{"id": 1, "offset": [1.5, -2]}]}'
    scene = parse_scene(text)
    assert scene.instances[0].offset == OffsetVec(1.5, -2.0)
    assert scene.global_direction is None


def test_unknown_fields_ignored():
    text = json.dumps({
        "image_id": "a", "width": 4, "height": 3, "extra": True,
        "instances": [{"id": 1, "offset": [1, 0], "score": 0.9}],
    })
    assert parse_scene(text).instances[0].id == 1


def test_rle_sum_mismatch_raises_size_mismatch():
    text = json.dumps({"image_id": "a", "width": 2, "height": 2, "instances": [
        {"id": 1, "roof_rle": {"size": [2, 2], "counts": [3]}},
    ]})
    with pytest.raises(SizeMismatch):
        parse_scene(text)


def test_mask_size_must_match_scene():
    text = json.dumps({"image_id": "a", "width": 2, "height": 2, "instances": [
        {"id": 1, "roof_rle": {"size": [3, 2], "counts": [6]}},
    ]})
    with pytest.raises(InvariantError):
        parse_scene(text)


@pytest.mark.parametrize("doc", [
    {"width": 2, "height": 2, "instances": []},
    {"image_id": "a", "height": 2, "instances": []},
    {"image_id": "a", "width": 2, "height": 2},
    {"image_id": "a", "width": 2, "height": 2, "instances": [{"offset": [1, 1]}]},
    {"image_id": "a", "width": "2", "height": 2, "instances": []},
    {"image_id": "a", "width": 2, "height": 2, "instances": [{"id": 1, "offset": [1]}]},
])
def test_schema_errors(doc):
    with pytest.raises(SchemaError):
        parse_scene(json.dumps(doc))


def test_invalid_json_is_schema_error():
    with pytest.raises(SchemaError):
        parse_scenes("{not json")


def test_invariant_errors():
    with pytest.raises(InvariantError):
        parse_scene('{"image_id": "a", "width": 2, "height": 2, "instances": [{"id": 1}]}')
    with pytest.raises(InvariantError):
        parse_scene('{"image_id": "a", "width": 2, "height": 2, "instances": '
                    '[{"id": 1, "offset": [1, 0]}, {"id": 1, "offset": [0, 1]}]}')
    with pytest.raises(InvariantError):
        parse_scene('{"image_id": "a", "width": 2, "height": 2, "instances": '
                    '[{"id": 1, "roof_polygon": [[0, 0], [1, 1]]}]}')


def test_scene_array_roundtrip():
    a = SceneAnnotation("a", 3, 2, (BuildingInstance(1, offset=OffsetVec(1, 2)),), 0.5)
    b = SceneAnnotation("b", 3, 2, (BuildingInstance(7, roof_mask=box(3, 2, 0, 0, 1, 1)),))
    text = serialize_scenes([a, b])
    assert parse_scenes(text) == [a, b]
    assert text.endswith("\n")


def test_synth_scene_roundtrips_byte_identically():
    scene = gen_scene(SynthConfig(width=128, height=128, n_buildings=4, seed=3))
    text = serialize_scene(scene)
    again = parse_scene(text)
    assert again == scene
    assert serialize_scene(again) == text


def test_footprint_polygon_emitted_only_when_present():
    ring = PolygonRing(((0, 0), (1, 0), (1, 1)))
    plain = scene_to_dict(SceneAnnotation("a", 2, 2, (BuildingInstance(1, roof_polygon=ring),)))
    assert "footprint_polygon" not in plain["instances"][0]
    extended = SceneAnnotation("a", 2, 2, (BuildingInstance(1, footprint_polygon=ring),))
    assert scene_from_dict(scene_to_dict(extended)) == extended


def test_scene_instance_lookup():
    scene = SceneAnnotation("a", 2, 2, (BuildingInstance(4, offset=OffsetVec(0, 0)),))
    assert scene.instance(4).id == 4
    with pytest.raises(KeyError):
        scene.instance(5)
