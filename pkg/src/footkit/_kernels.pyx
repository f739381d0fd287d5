# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled raster kernels. Semantics mirror footkit._kernels_py exactly."""

import numpy as np
cimport numpy as cnp
from libc.math cimport ceil, floor

cnp.import_array()


def shift_overlap_counts(ys, xs, target, sy, sx):
    cdef const cnp.int64_t[:] cy = np.ascontiguousarray(ys, dtype=np.int64)
    cdef const cnp.int64_t[:] cx = np.ascontiguousarray(xs, dtype=np.int64)
    cdef const cnp.int64_t[:] csy = np.ascontiguousarray(sy, dtype=np.int64)
    cdef const cnp.int64_t[:] csx = np.ascontiguousarray(sx, dtype=np.int64)
    cdef const cnp.uint8_t[:, :] t = np.ascontiguousarray(target, dtype=np.uint8)
    cdef Py_ssize_t h = t.shape[0], w = t.shape[1]
    cdef Py_ssize_t n = cy.shape[0], m = csy.shape[0]
    out_arr = np.zeros(m, dtype=np.int64)
    cdef cnp.int64_t[:] out = out_arr
    cdef Py_ssize_t i, j
    cdef cnp.int64_t yy, xx, dy, dx, c
    for j in range(m):
        dy = csy[j]
        dx = csx[j]
        c = 0
        for i in range(n):
            yy = cy[i] + dy
            xx = cx[i] + dx
            if 0 <= yy < h and 0 <= xx < w and t[yy, xx]:
                c += 1
        out[j] = c
    return out_arr


def fill_polygon(vx, vy, int width, int height):
    cdef const double[:] px = np.ascontiguousarray(vx, dtype=np.float64)
    cdef const double[:] py = np.ascontiguousarray(vy, dtype=np.float64)
    cdef Py_ssize_t n = px.shape[0]
    out_arr = np.zeros((max(height, 0), max(width, 0)), dtype=np.uint8)
    if n < 3 or width <= 0 or height <= 0:
        return out_arr
    cdef cnp.uint8_t[:, :] out = out_arr
    xi_arr = np.empty(n, dtype=np.float64)
    cdef double[:] xi = xi_arr
    cdef double ymin = py[0], ymax = py[0], yc, x0, y0, x1, y1, key
    cdef Py_ssize_t i, k, q, cnt, row, row_lo, row_hi, lo, hi, col
    for i in range(1, n):
        if py[i] < ymin:
            ymin = py[i]
        if py[i] > ymax:
            ymax = py[i]
    row_lo = max(0, <Py_ssize_t>floor(ymin))
    row_hi = min(height - 1, <Py_ssize_t>ceil(ymax))
    for row in range(row_lo, row_hi + 1):
        yc = row + 0.5
        cnt = 0
        for i in range(n):
            x0 = px[i]
            y0 = py[i]
            x1 = px[(i + 1) % n]
            y1 = py[(i + 1) % n]
            if (y0 <= yc < y1) or (y1 <= yc < y0):
                xi[cnt] = x0 + (yc - y0) * (x1 - x0) / (y1 - y0)
                cnt += 1
        # insertion sort; crossings per row are few
        for k in range(1, cnt):
            key = xi[k]
            q = k - 1
            while q >= 0 and xi[q] > key:
                xi[q + 1] = xi[q]
                q -= 1
            xi[q + 1] = key
        k = 0
        while k + 1 < cnt:
            lo = <Py_ssize_t>ceil(xi[k] - 0.5)
            hi = <Py_ssize_t>ceil(xi[k + 1] - 0.5)
            if lo < 0:
                lo = 0
            if hi > width:
                hi = width
            for col in range(lo, hi):
                out[row, col] = 1
            k += 2
    return out_arr


cdef inline bint _inside(const cnp.int32_t[:, :] lab, Py_ssize_t h, Py_ssize_t w,
                         long px, long py, cnp.int32_t label) nogil:
    return 0 <= px < w and 0 <= py < h and lab[py, px] == label


def trace_boundary(labels, label, x0, y0):
    cdef const cnp.int32_t[:, :] lab = np.ascontiguousarray(labels, dtype=np.int32)
    cdef Py_ssize_t h = lab.shape[0], w = lab.shape[1]
    cdef cnp.int32_t lb = label
    cdef long sx = x0, sy = y0
    cdef long vx = sx, vy = sy, dx = 0, dy = -1, nx, ny, ndx, ndy
    cdef long ix, iy, ex, ey
    cdef Py_ssize_t limit = 4 * (h + 1) * (w + 1) + 8, step, nv = 0
    buf_arr = np.empty((limit, 2), dtype=np.int64)
    cdef cnp.int64_t[:, :] buf = buf_arr
    cdef bint closed = False
    for step in range(limit):
        nx = -dy
        ny = dx
        # floor division of odd negatives: (a - 1) // 2 with a in {-1, 1}
        ix = vx + (-1 if dx + nx < 0 else 0)
        iy = vy + (-1 if dy + ny < 0 else 0)
        ex = vx + (-1 if dx - nx < 0 else 0)
        ey = vy + (-1 if dy - ny < 0 else 0)
        if not _inside(lab, h, w, ix, iy, lb):
            ndx = nx
            ndy = ny
        elif _inside(lab, h, w, ex, ey, lb):
            ndx = -nx
            ndy = -ny
        else:
            ndx = dx
            ndy = dy
        if ndx != dx or ndy != dy:
            buf[nv, 0] = vx
            buf[nv, 1] = vy
            nv += 1
        dx = ndx
        dy = ndy
        vx += dx
        vy += dy
        if vx == sx and vy == sy:
            closed = True
            break
    if not closed:
        raise RuntimeError("boundary walk did not close")
    return buf_arr[:nv].copy()
