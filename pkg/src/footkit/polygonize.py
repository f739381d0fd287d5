"""Raster-to-polygon conversion: contour tracing, Douglas-Peucker, vertex connection."""

from __future__ import annotations

import warnings

import numpy as np
from scipy import ndimage

from . import kernels
from .core import PolygonRing, RasterMask
from .errors import DegenerateRing, EmptyMask, InvariantError, TooFewVertices

_FOUR_CONNECTED = ndimage.generate_binary_structure(2, 1)

DEFAULT_MIN_AREA = 4
DEFAULT_SNAP_RADIUS = 5.0


def trace_contours(mask: RasterMask, min_area: int = DEFAULT_MIN_AREA) -> list[PolygonRing]:
    """Trace one outer ring per 4-connected component of ``mask``.

    Vertices sit on pixel corners and only direction changes are kept, so
    collinear runs collapse to their endpoints. Holes are not traced.
    Components smaller than ``min_area`` pixels are dropped. Rings are
    returned in row-major order of each component's first pixel.

    Raises:
        EmptyMask: if no component survives.
    """
    labels, n = ndimage.label(mask.bits, structure=_FOUR_CONNECTED)
    if n == 0:
        raise EmptyMask("mask has no set pixels")
    labels = labels.astype(np.int32)
    sizes = np.bincount(labels.ravel(), minlength=n + 1)
    # first pixel of each label in row-major order
    flat = labels.ravel()
    order = np.flatnonzero(flat)
    first = {}
    for idx in order[np.unique(flat[order], return_index=True)[1]]:
        first[int(flat[idx])] = int(idx)
    rings = []
    for lab in sorted(first, key=first.get):
        if sizes[lab] < min_area:
            continue
        y0, x0 = divmod(first[lab], mask.width)
        verts = kernels.trace_boundary(labels, lab, x0, y0)
        rings.append(PolygonRing(tuple(map(tuple, verts.astype(np.float64)))))
    if not rings:
        raise EmptyMask(f"no component reaches min_area={min_area}")
    return rings


def _segment_distance(p: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Distance from each row of ``p`` to the segment ``a``-``b``."""
    ab = b - a
    denom = float(ab @ ab)
    if denom == 0.0:
        return np.hypot(*(p - a).T)
    t = np.clip(((p - a) @ ab) / denom, 0.0, 1.0)
    proj = a + t[:, None] * ab
    return np.hypot(*(p - proj).T)


def _dp_chain(pts: np.ndarray, epsilon: float) -> list[int]:
    """Indices kept by Douglas-Peucker on an open chain (endpoints always kept)."""
    keep = [0, len(pts) - 1]
    stack = [(0, len(pts) - 1)]
    while stack:
        i, j = stack.pop()
        if j - i < 2:
            continue
        d = _segment_distance(pts[i + 1:j], pts[i], pts[j])
        k = int(np.argmax(d))
        if d[k] > epsilon:
            m = i + 1 + k
            keep.append(m)
            stack.append((i, m))
            stack.append((m, j))
    return sorted(set(keep))


def _farthest_pair(pts: np.ndarray) -> tuple[int, int]:
    diff = pts[:, None, :] - pts[None, :, :]
    d2 = np.einsum("ijk,ijk->ij", diff, diff)
    flat = int(np.argmax(d2))  # first maximum in row-major order: deterministic
    i, j = divmod(flat, len(pts))
    return (i, j) if i < j else (j, i)


def simplify_dp(ring: PolygonRing, epsilon: float) -> PolygonRing:
    """Douglas-Peucker simplification of a closed ring.

    The ring is split at its two mutually farthest vertices and each chain is
    simplified independently. Kept vertices are a subsequence of the input.
    If fewer than three survive, a ``DegenerateRing`` warning is issued and the
    two anchors plus the vertex farthest from their chord are returned.
    """
    if epsilon < 0:
        raise ValueError(f"epsilon must be >= 0, got {epsilon}")
    pts = ring.as_array()
    n = len(pts)
    a, b = _farthest_pair(pts)
    first = pts[a:b + 1]
    second = np.concatenate([pts[b:], pts[:a + 1]])
    keep = [a + k for k in _dp_chain(first, epsilon)]
    keep += [(b + k) % n for k in _dp_chain(second, epsilon)[1:-1]]
    keep = sorted(set(keep))
    if len(keep) < 3:
        warnings.warn(f"simplification at epsilon={epsilon} left {len(keep)} vertices", DegenerateRing)
        d = _segment_distance(pts, pts[a], pts[b])
        d[[a, b]] = -1.0
        keep = sorted({a, b, int(np.argmax(d))})
    return PolygonRing.from_points(pts[keep])


def _project_onto_ring(points: np.ndarray, ring: np.ndarray):
    """Nearest point on the closed polyline for each query point.

    Returns (snapped points, distances, arc-length positions).
    """
    a = ring
    b = np.roll(ring, -1, axis=0)
    ab = b - a
    seg_len = np.hypot(ab[:, 0], ab[:, 1])
    start = np.concatenate(([0.0], np.cumsum(seg_len)[:-1]))
    denom = np.where(seg_len > 0, seg_len**2, 1.0)
    rel = points[:, None, :] - a[None, :, :]
    t = np.clip(np.einsum("qsk,sk->qs", rel, ab) / denom, 0.0, 1.0)
    proj = a[None, :, :] + t[..., None] * ab[None, :, :]
    dist = np.hypot(*(points[:, None, :] - proj).transpose(2, 0, 1))
    best = np.argmin(dist, axis=1)
    q = np.arange(len(points))
    snapped = proj[q, best]
    arc = start[best] + t[q, best] * seg_len[best]
    return snapped, dist[q, best], arc


def connect_vertices(vertices, guide: RasterMask, snap_radius: float = DEFAULT_SNAP_RADIUS) -> PolygonRing:
    """Connect loose vertices into a ring following the contour of ``guide``.

    Each vertex is snapped to the nearest point of the guide's outer contour
    (largest component); vertices farther than ``snap_radius`` are dropped.
    Survivors are joined in order of their arc-length position along the
    contour, so the result does not depend on the input order.
    """
    pts = np.asarray(vertices, dtype=np.float64).reshape(-1, 2)
    if len(pts) < 3:
        raise TooFewVertices(f"need >= 3 vertices, got {len(pts)}")
    rings = trace_contours(guide, min_area=1)
    contour = max(rings, key=lambda r: r.area).as_array()
    snapped, dist, arc = _project_onto_ring(pts, contour)
    ok = dist <= snap_radius
    snapped, arc = snapped[ok], arc[ok]
    order = np.lexsort((snapped[:, 1], snapped[:, 0], arc))
    try:
        return PolygonRing.from_points(snapped[order])
    except InvariantError:
        raise TooFewVertices(f"only {int(ok.sum())} vertices snapped within {snap_radius} px") from None


def polygonize_mask(mask: RasterMask, epsilon: float, min_area: int = DEFAULT_MIN_AREA) -> PolygonRing:
    """Largest traced ring of ``mask`` simplified at ``epsilon``."""
    ring = max(trace_contours(mask, min_area=min_area), key=lambda r: r.area)
    return simplify_dp(ring, epsilon) if epsilon > 0 else ring
