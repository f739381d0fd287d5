"""Pure numpy implementations of the hot raster kernels.

Every function here has a twin with the same signature in the compiled
``_kernels`` extension; ``footkit.kernels`` picks one at import time.
"""

import numpy as np

_CHUNK = 1 << 22


def shift_overlap_counts(ys, xs, target, sy, sx):
    """Count, for each integer shift, the pixels of ``(ys, xs)`` landing on ``target``.

    Pixels shifted outside ``target`` are not counted.
    """
    ys = np.asarray(ys, dtype=np.int64)
    xs = np.asarray(xs, dtype=np.int64)
    sy = np.asarray(sy, dtype=np.int64)
    sx = np.asarray(sx, dtype=np.int64)
    target = np.asarray(target, dtype=np.uint8)
    h, w = target.shape
    out = np.zeros(len(sy), dtype=np.int64)
    if len(ys) == 0 or len(sy) == 0:
        return out
    step = max(1, _CHUNK // len(ys))
    for start in range(0, len(sy), step):
        yy = ys[None, :] + sy[start:start + step, None]
        xx = xs[None, :] + sx[start:start + step, None]
        inside = (yy >= 0) & (yy < h) & (xx >= 0) & (xx < w)
        hit = np.zeros(yy.shape, dtype=bool)
        hit[inside] = target[yy[inside], xx[inside]] != 0
        out[start:start + step] = hit.sum(axis=1)
    return out


def fill_polygon(vx, vy, width, height):
    """Even-odd scanline fill sampled at pixel centres; returns uint8 (height, width)."""
    vx = np.asarray(vx, dtype=np.float64)
    vy = np.asarray(vy, dtype=np.float64)
    out = np.zeros((height, width), dtype=np.uint8)
    n = len(vx)
    if n < 3 or width <= 0 or height <= 0:
        return out
    x0, y0 = vx, vy
    x1, y1 = np.roll(vx, -1), np.roll(vy, -1)
    row_lo = max(0, int(np.floor(vy.min())))
    row_hi = min(height - 1, int(np.ceil(vy.max())))
    for row in range(row_lo, row_hi + 1):
        yc = row + 0.5
        active = ((y0 <= yc) & (yc < y1)) | ((y1 <= yc) & (yc < y0))
        if not active.any():
            continue
        ax0, ay0, ax1, ay1 = x0[active], y0[active], x1[active], y1[active]
        xi = np.sort(ax0 + (yc - ay0) * (ax1 - ax0) / (ay1 - ay0))
        for k in range(0, len(xi) - 1, 2):
            lo = max(0, int(np.ceil(xi[k] - 0.5)))
            hi = min(width, int(np.ceil(xi[k + 1] - 0.5)))
            if hi > lo:
                out[row, lo:hi] = 1
    return out


def trace_boundary(labels, label, x0, y0):
    """Walk the outer boundary of component ``label`` starting at its top-left pixel.

    ``(x0, y0)`` must be the first pixel of the component in row-major order.
    Returns an int64 array of corner vertices, one per direction change.
    At diagonal contacts the walk turns toward the interior, which keeps
    components 4-connected.
    """
    labels = np.asarray(labels)
    h, w = labels.shape

    def inside(px, py):
        return 0 <= px < w and 0 <= py < h and labels[py, px] == label

    vx, vy = int(x0), int(y0)
    dx, dy = 0, -1
    verts = []
    limit = 4 * (h + 1) * (w + 1) + 8
    for _ in range(limit):
        nx, ny = -dy, dx
        # pixel ahead on the interior / exterior side; components of d +- n are +-1
        ix = vx + (dx + nx - 1) // 2
        iy = vy + (dy + ny - 1) // 2
        ex = vx + (dx - nx - 1) // 2
        ey = vy + (dy - ny - 1) // 2
        if not inside(ix, iy):
            ndx, ndy = nx, ny
        elif inside(ex, ey):
            ndx, ndy = -nx, -ny
        else:
            ndx, ndy = dx, dy
        if (ndx, ndy) != (dx, dy):
            verts.append((vx, vy))
        dx, dy = ndx, ndy
        vx += dx
        vy += dy
        if vx == x0 and vy == y0:
            break
    else:
        raise RuntimeError("boundary walk did not close")
    return np.asarray(verts, dtype=np.int64).reshape(-1, 2)
