"""Acceptance criteria 1-7, each reported as one pass/fail line in the summary."""

import math
import shutil
import time
import warnings

import numpy as np
import pytest
from scipy import ndimage

import sofa_oracle as oracle
from conftest import ACCEPTANCE_LINES, box
from footkit import geometry, metrics
from footkit.cli import EXIT_OK, run
from footkit.core import OffsetVec, PolygonRing, RasterMask, rasterize
from footkit.errors import DegenerateResult, FootkitError
from footkit.polygonize import simplify_dp, trace_contours
from footkit.sofa import OffsetBatch, SofaConfig, attention_weights, fit_w, sofa_angle, sofa_vector
from footkit.synth import NoiseModel, gen_scenes, perturb_offsets, scene_seed
from test_polygonize import dropped_vertex_deviation, perturbed_rectangle_ious

pytestmark = pytest.mark.acceptance


def _record(number, title, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number} ({title}): {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def _angle_gap(a, b):
    d = abs(a - b) % (2 * math.pi)
    return min(d, 2 * math.pi - d)


# -- 1 and 2: the shared synthetic suite -------------------------------------

@pytest.fixture(scope="module")
def oracle_suite():
    """Seed-42 suite of 100 scenes x 20 buildings, run through every derivation path."""
    start = time.perf_counter()
    scenes = gen_scenes(100, 42, n_buildings=20, length_range=(5.0, 60.0))
    rows = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DegenerateResult)
        for scene in scenes:
            for inst in scene.instances:
                found = geometry.footprint_search(inst.roof_mask, inst.building_mask)
                try:
                    two_phase = geometry.refine_offset_two_phase(inst.roof_mask, inst.building_mask).rho
                except FootkitError:
                    two_phase = math.nan
                given = geometry.footprint_given_direction(inst.roof_mask, inst.building_mask, scene.global_direction)
                rows.append({
                    "length": inst.offset.rho,
                    "angle_error": _angle_gap(found.theta, inst.offset.alpha),
                    "length_error": abs(found.length - inst.offset.rho),
                    "two_phase_gap": abs(two_phase - found.length),
                    "gt": inst.footprint_mask,
                    "r+o": geometry.footprint_from_roof_offset(inst.roof_mask, inst.offset),
                    "b+o": geometry.footprint_from_building_offset(inst.building_mask, inst.offset),
                    "b+r": found.footprint,
                    "b+r+d": given.footprint,
                })
    return rows, time.perf_counter() - start


def test_criterion_1_geometric_oracle(oracle_suite):
    rows, elapsed = oracle_suite
    ae = float(np.mean([r["angle_error"] for r in rows]))
    le = float(np.mean([r["length_error"] for r in rows]))
    agree = float(np.mean([r["two_phase_gap"] <= 1.0 for r in rows]))
    ok = len(rows) == 2000 and ae <= 0.02 and le <= 0.5 and agree >= 0.95 and elapsed < 60.0
    _record(1, "geometric oracle", ok,
            f"{len(rows)} instances, mean AE {ae:.4f} rad (<= 0.02), mean LE {le:.3f} px (<= 0.5), "
            f"two-phase agreement {100 * agree:.2f}% (>= 95), {elapsed:.1f} s (< 60)")


def _short_offset_probe():
    """Failures of building+roof search on short offsets (0.5 to 8 px)."""
    scenes = gen_scenes(20, 4242, width=256, height=256, n_buildings=10, length_range=(0.5, 8.0))
    out = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DegenerateResult)
        for scene in scenes:
            for inst in scene.instances:
                found = geometry.footprint_search(inst.roof_mask, inst.building_mask)
                out.append((inst.offset.rho, found.footprint == inst.footprint_mask))
    return out


def test_criterion_2_derivation_ordering(oracle_suite):
    rows, _ = oracle_suite
    gt = [r["gt"] for r in rows]
    f1 = {path: metrics.pixel_prf([r[path] for r in rows], gt)[2] for path in ("r+o", "b+o", "b+r", "b+r+d")}
    lengths = np.array([r["length"] for r in rows])
    failed = np.array([r["b+r"] != r["gt"] for r in rows])
    probe = _short_offset_probe()
    probe_failed = np.array([length for length, exact in probe if not exact])
    all_failed = np.concatenate([lengths[failed], probe_failed])
    # concentrated: no failures at all, or most of them on offsets shorter than 3 px
    concentrated = all_failed.size == 0 or np.mean(all_failed < 3.0) > 0.5
    ok = (round(f1["r+o"], 2) == 100.0 and f1["b+o"] >= 99.0 and f1["b+r+d"] >= f1["b+r"]
          and f1["b+r"] >= 95.0 and concentrated)
    _record(2, "derivation-path ordering", ok,
            "pixel F1 " + ", ".join(f"{k} {v:.2f}" for k, v in f1.items())
            + f"; b+r imperfect instances: {int(failed.sum())}/{len(rows)} on the suite, "
            f"{probe_failed.size}/{len(probe)} on a 0.5-8 px probe set"
            + (f" ({np.mean(all_failed < 3.0):.0%} under 3 px)" if all_failed.size else ""))


# -- 3: SOFA improvement direction -------------------------------------------

def _noisy_batches(n_scenes, master_seed):
    out = []
    for k, scene in enumerate(gen_scenes(n_scenes, master_seed)):
        pred = perturb_offsets(scene, NoiseModel(2.0, 2.0, seed=scene_seed(master_seed + 1000, k)))
        out.append((OffsetBatch(tuple(pred)), OffsetBatch(tuple(i.offset for i in scene.instances))))
    return out


def test_criterion_3_sofa_improvement():
    calib = _noisy_batches(50, 7)
    evaluation = _noisy_batches(200, 42)
    fit = fit_w(calib)
    cfg = SofaConfig(w=fit.w)
    before, after, longest_kept = [], [], True
    for pred, gt in evaluation:
        fixed = sofa_vector(pred, cfg)
        before += list(zip(pred.offsets, gt.offsets))
        after += list(zip(fixed, gt.offsets))
        rho = pred.lengths()
        k = int(np.argmax(rho))
        if np.sum(rho >= rho[k] - 1e-9) == 1:
            o = pred.offsets[k]
            longest_kept &= math.hypot(fixed[k].dx - o.dx, fixed[k].dy - o.dy) <= 1e-12 * max(1.0, o.rho)
    b, a = metrics.grouped_errors(before), metrics.grouped_errors(after)
    ae_b, ae_a = b.per_bucket["(0,10]"].AE, a.per_bucket["(0,10]"].AE
    drop = 1.0 - ae_a / ae_b
    ok = drop >= 0.15 and a.aVE <= b.aVE and longest_kept
    _record(3, "SOFA improvement", ok,
            f"fitted w {fit.w:.4f}; (0,10] AE {ae_b:.4f} -> {ae_a:.4f} ({100 * drop:.1f}% drop, >= 15); "
            f"aVE {b.aVE:.4f} -> {a.aVE:.4f}; strictly-longest offsets unchanged: {longest_kept}")


# -- 4: SOFA oracle equivalence -----------------------------------------------

def test_criterion_4_sofa_oracle():
    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(1000):
        n = int(rng.integers(1, 101))
        rho = list(rng.uniform(0.0, 100.0, n))
        alpha = list(rng.uniform(0.0, 2 * math.pi, n))
        w = float(rng.uniform(-2, 2))
        masking = ("look_longer", "none")[int(rng.integers(2))]
        batch = OffsetBatch(tuple(OffsetVec.from_polar(r, a) for r, a in zip(rho, alpha)))
        lengths, angles = list(batch.lengths()), list(batch.angles())
        W = attention_weights(lengths, SofaConfig(w=w, masking=masking))
        worst = max(worst, float(np.max(np.abs(W - np.array(oracle.weights(lengths, w, masking))))))
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            got_angle = sofa_angle(batch, SofaConfig(w=w, level="angle", masking=masking))
            got_vec = sofa_vector(batch, SofaConfig(w=w, masking=masking))
        want_angle = oracle.angles(lengths, angles, w, masking)
        want_vec = oracle.vectors(lengths, angles, w, masking)
        worst = max(worst, max(oracle.angle_gap(x, y) for x, y in zip(got_angle, want_angle)))
        worst = max(worst, max(max(abs(o.dx - x), abs(o.dy - y)) / max(1.0, o.rho)
                               for o, (x, y) in zip(got_vec, want_vec)))
    _record(4, "SOFA oracle equivalence", worst <= 1e-12,
            f"1000 batches, N in [1,100], worst deviation {worst:.2e} (<= 1e-12)")


# -- 5: metrics unit suite ------------------------------------------------------

def test_criterion_5_metrics():
    checks = {}
    ve, _, _ = metrics.offset_errors(OffsetVec(3, 4), OffsetVec(0, 0))
    checks["VE((3,4),(0,0)) = 5"] = ve == 5.0
    _, _, ae = metrics.offset_errors(OffsetVec(0, 10), OffsetVec(10, 0))
    checks["AE((0,10),(10,0)) = pi/2"] = abs(ae - math.pi / 2) <= 1e-9
    rng = np.random.default_rng(5)
    one_bucket = [(OffsetVec(*rng.uniform(-5, 5, 2)), OffsetVec.from_polar(rng.uniform(1, 10), rng.uniform(0, 6)))
                  for _ in range(40)]
    r = metrics.grouped_errors(one_bucket)
    checks["single-bucket mE == aE"] = (r.mVE, r.mLE, r.mAE) == (r.aVE, r.aLE, r.aAE)
    spread = [(OffsetVec(*rng.normal(0, 30, 2)), OffsetVec(*rng.normal(0, 40, 2))) for _ in range(200)]
    checks["epe == aVE"] = metrics.epe(spread) == metrics.grouped_errors(spread).aVE
    sq = [box(40, 40, 0, 0, 10, 10), box(40, 40, 20, 20, 30, 30)]
    checks["mask_prf identical lists"] = metrics.mask_prf(sq, sq) == (100.0, 100.0, 100.0)
    checks["mask_prf no predictions"] = metrics.mask_prf([], sq[:1]) == (0.0, 0.0, 0.0)
    p, rc, f = metrics.mask_prf([box(40, 40, 0, 0, 10, 8)], sq, 0.5)
    checks["mask_prf one of two matched"] = (p, rc) == (100.0, 50.0) and abs(f - 200 / 3) <= 1e-9
    failed = [k for k, v in checks.items() if not v]
    _record(5, "metrics unit suite", not failed,
            f"{len(checks) - len(failed)}/{len(checks)} exact checks" + (f"; failed: {', '.join(failed)}" if failed else ""))


# -- 6: polygonization reversibility -------------------------------------------

def _random_hole_free_mask(rng):
    h, w = (int(v) for v in rng.integers(1, 48, 2))
    noise = ndimage.gaussian_filter(rng.random((h, w)), sigma=float(rng.uniform(0.5, 3)))
    bits = ndimage.binary_fill_holes(noise > np.quantile(noise, rng.uniform(0.3, 0.8)))
    return RasterMask(bits)


def test_criterion_6_polygonization():
    rng = np.random.default_rng(606)
    exact = tested = 0
    while tested < 500:
        m = _random_hole_free_mask(rng)
        if m.is_empty():
            continue
        rings = trace_contours(m, min_area=1)
        again = np.logical_or.reduce([rasterize(r, m.width, m.height).bits for r in rings])
        exact += bool(np.array_equal(again, m.bits))
        tested += 1

    dp_ok = 0
    for _ in range(100):
        ang = np.sort(rng.uniform(0, 2 * math.pi, 200))
        rad = rng.uniform(20, 60, 200)
        ring = PolygonRing.from_points(np.c_[100 + rad * np.cos(ang), 100 + rad * np.sin(ang)])
        eps = float(rng.uniform(0.25, 6))
        dp_ok += dropped_vertex_deviation(ring, simplify_dp(ring, eps)) <= eps + 1e-9

    ious = perturbed_rectangle_ious()
    ok = exact == 500 and dp_ok == 100 and ious.mean() >= 0.95
    _record(6, "polygonization reversibility", ok,
            f"trace->rasterize exact on {exact}/500 hole-free masks; DP bound holds on {dp_ok}/100 rings; "
            f"connect_vertices mean IoU {ious.mean():.4f} (>= 0.95, min {ious.min():.4f}) on 100 rectangles")


# -- 7: determinism -----------------------------------------------------------------

def _snapshot(root):
    return {str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def _pipelines(root):
    s, n = root / "scenes", root / "noisy"
    small = ["--scenes", "3", "--buildings", "6", "--width", "160", "--height", "160", "--seed", "13"]
    yield ["synth", "--out", str(s), "--noisy-out", str(n), "--l-shape-prob", "0.3", *small]
    for mode in ("roof+offset", "building+offset", "roof+building", "roof+building+dir"):
        yield ["derive", "--input", str(s), "--out", str(root / f"derive_{mode}"), "--mode", mode, "--jobs", "2"]
    yield ["fit-sofa", "--pred", str(n), "--gt", str(s), "--out", str(root / "w.json")]
    yield ["correct", "--input", str(n), "--out", str(root / "corrected"), "--fit", "--calib-gt", str(s)]
    yield ["correct", "--input", str(n), "--out", str(root / "corrected_angle"), "--w", "0.1", "--level", "angle"]
    yield ["polygonize", "--input", str(s), "--out", str(root / "poly")]
    yield ["evaluate", "--gt", str(s), "--pred", str(root / "derive_roof+building"), "--report", str(root / "eval.json")]
    yield ["evaluate", "--gt", str(s), "--pred", str(root / "corrected"), "--mask-level", "pixel",
           "--report", str(root / "eval_pixel.json")]


def test_criterion_7_determinism(tmp_path, monkeypatch):
    monkeypatch.delenv("FOOTKIT_SEED", raising=False)
    snapshots, codes = [], []
    for _ in range(2):
        root = tmp_path / "run"
        shutil.rmtree(root, ignore_errors=True)
        root.mkdir()
        codes.append([run(argv) for argv in _pipelines(root)])
        snapshots.append(_snapshot(root))
    same = snapshots[0] == snapshots[1]
    all_ok = all(c == EXIT_OK for c in codes[0] + codes[1])
    differing = sorted(k for k in set(snapshots[0]) | set(snapshots[1]) if snapshots[0].get(k) != snapshots[1].get(k))
    n_pipes = len(codes[0])
    _record(7, "determinism", same and all_ok,
            f"{n_pipes} pipelines run twice, {len(snapshots[0])} files byte-identical: {same}"
            + (f"; differing: {', '.join(differing[:5])}" if differing else ""))
