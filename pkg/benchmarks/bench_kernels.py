"""Time the compiled and pure-Python kernel backends side by side.

Usage:
    python benchmarks/bench_kernels.py [--repeat N] [--scenes N]

Each kernel runs on identical inputs under both backends; the last block
times footprint search end to end on synthetic scenes.
"""

import argparse
import timeit
import warnings

import numpy as np
from scipy import ndimage

from footkit import geometry, kernels
from footkit.errors import DegenerateResult
from footkit.synth import gen_scenes


def _kernel_cases(rng):
    roof = np.zeros((512, 512), dtype=bool)
    roof[200:240, 180:230] = True
    target = ndimage.binary_dilation(roof, iterations=25)
    ys, xs = (a.astype(np.int64) for a in np.nonzero(roof))
    sy = rng.integers(-40, 40, 360).astype(np.int64)
    sx = rng.integers(-40, 40, 360).astype(np.int64)

    ang = np.sort(rng.uniform(0, 2 * np.pi, 64))
    rad = rng.uniform(80, 220, 64)
    vx, vy = 256 + rad * np.cos(ang), 256 + rad * np.sin(ang)

    blob = ndimage.binary_fill_holes(ndimage.gaussian_filter(rng.random((256, 256)), 4) > 0.5)
    labels, _ = ndimage.label(blob)
    labels = labels.astype(np.int32)
    sizes = np.bincount(labels.ravel())
    sizes[0] = 0
    lab = int(np.argmax(sizes))
    y0, x0 = divmod(int(np.flatnonzero(labels.ravel() == lab)[0]), labels.shape[1])

    return {
        "shift_overlap_counts (360 shifts, 2000 px roof)": lambda k: k.shift_overlap_counts(ys, xs, target, sy, sx),
        "fill_polygon (64 vertices, 512x512)": lambda k: k.fill_polygon(vx, vy, 512, 512),
        "trace_boundary (largest blob, 256x256)": lambda k: k.trace_boundary(labels, lab, x0, y0),
    }


def _search_all(instances):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DegenerateResult)
        for inst in instances:
            geometry.footprint_search(inst.roof_mask, inst.building_mask)


def _time(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5, help="timing repeats; the best is reported")
    ap.add_argument("--scenes", type=int, default=5, help="synthetic scenes for the end-to-end timing")
    args = ap.parse_args()

    names = [n for n in ("compiled", "python") if n in kernels.BACKENDS]
    if "compiled" not in names:
        print("compiled backend not built; timing the Python fallback only")
    rng = np.random.default_rng(0)
    rows = []
    for label, call in _kernel_cases(rng).items():
        times = {n: _time(lambda: call(kernels.get_backend(n)), args.repeat) for n in names}
        rows.append((label, times))

    instances = [i for s in gen_scenes(args.scenes, 42, n_buildings=20) for i in s.instances]
    times = {}
    for n in names:
        previous = kernels.use_backend(n)
        try:
            times[n] = _time(lambda: _search_all(instances), max(1, args.repeat // 2))
        finally:
            kernels.use_backend(previous)
    rows.append((f"footprint_search end to end ({len(instances)} instances)", times))

    width = max(len(r[0]) for r in rows)
    header = f"{'case':<{width}}  " + "  ".join(f"{n:>10}" for n in names)
    if len(names) == 2:
        header += f"  {'speedup':>8}"
    print(header)
    for label, t in rows:
        line = f"{label:<{width}}  " + "  ".join(f"{1e3 * t[n]:>8.2f}ms" for n in names)
        if len(names) == 2:
            line += f"  {t['python'] / t['compiled']:>7.1f}x"
        print(line)


if __name__ == "__main__":
    main()
