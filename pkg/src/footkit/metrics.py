"""Offset errors, length-bucketed aggregates, mask precision/recall/F1 and DS-BCE."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core import OffsetVec, RasterMask
from .errors import EmptyInput, InvariantError, ShapeMismatch

BCE_EPS = 1e-7
OFFSET_FIELDS = ("aVE", "aLE", "aAE", "mVE", "mLE", "mAE", "epe")
MASK_FIELDS = ("precision", "recall", "f1")


@dataclass(frozen=True)
class BucketSpec:
    """Buckets ``(i*width, (i+1)*width]`` for ``i = 0..n`` plus ``((n+1)*width, inf)``."""

    width: float = 10.0
    n: int = 9

    def __post_init__(self):
        if not self.width > 0:
            raise InvariantError(f"bucket width must be > 0, got {self.width}")
        if self.n < 0:
            raise InvariantError(f"bucket count must be >= 0, got {self.n}")

    @property
    def n_buckets(self) -> int:
        return self.n + 2

    def index(self, length: float) -> int:
        """Bucket index for a ground-truth length; zero joins the first bucket."""
        if length <= 0:
            return 0
        return min(max(math.ceil(length / self.width) - 1, 0), self.n + 1)

    def label(self, idx: int) -> str:
        lo = idx * self.width
        if idx == self.n + 1:
            return f"({lo:g},inf)"
        return f"({lo:g},{lo + self.width:g}]"


@dataclass(frozen=True)
class BucketStats:
    VE: float
    LE: float
    AE: float
    count: int


@dataclass(frozen=True)
class MetricReport:
    """Offset and mask scores; fields stay ``None`` for whatever was not compared."""

    aVE: float | None = None
    aLE: float | None = None
    aAE: float | None = None
    mVE: float | None = None
    mLE: float | None = None
    mAE: float | None = None
    epe: float | None = None
    per_bucket: dict = field(default_factory=dict)
    precision: float | None = None
    recall: float | None = None
    f1: float | None = None

    def to_dict(self) -> dict:
        """JSON-ready dict; percentages are rounded to two decimals."""
        out = {k: getattr(self, k) for k in OFFSET_FIELDS}
        out["per_bucket"] = {
            k: {"VE": b.VE, "LE": b.LE, "AE": b.AE, "count": b.count} for k, b in self.per_bucket.items()
        }
        for k in MASK_FIELDS:
            v = getattr(self, k)
            out[k] = None if v is None else round(v, 2)
        return out


def angle_error(pred: OffsetVec, gt: OffsetVec) -> float:
    """Absolute angle difference in [0, pi]; pi/2 when exactly one side has zero length."""
    pz, gz = pred.rho == 0.0, gt.rho == 0.0
    if pz or gz:
        return 0.0 if pz and gz else math.pi / 2
    d = abs(pred.alpha - gt.alpha) % (2.0 * math.pi)
    return min(d, 2.0 * math.pi - d)


def offset_errors(pred: OffsetVec, gt: OffsetVec) -> tuple[float, float, float]:
    """Vector, length and angle error of one predicted offset."""
    ve = math.hypot(pred.dx - gt.dx, pred.dy - gt.dy)
    le = abs(pred.rho - gt.rho)
    return ve, le, angle_error(pred, gt)


def _mean(values) -> float:
    values = list(values)
    return math.fsum(values) / len(values)


def grouped_errors(pairs: Sequence[tuple[OffsetVec, OffsetVec]], spec: BucketSpec | None = None) -> MetricReport:
    """Average (aE) and bucket-macro-averaged (mE) errors over ``(pred, gt)`` pairs.

    Pairs are bucketed by ground-truth length. mE averages the per-bucket
    means over the non-empty buckets only.

    Raises:
        EmptyInput: if ``pairs`` is empty.
    """
    spec = spec or BucketSpec()
    pairs = list(pairs)
    if not pairs:
        raise EmptyInput("no offset pairs")
    errs = [offset_errors(p, g) for p, g in pairs]
    groups: dict[int, list] = {}
    for (_, g), e in zip(pairs, errs):
        groups.setdefault(spec.index(g.rho), []).append(e)
    per_bucket = {}
    for idx in sorted(groups):
        rows = groups[idx]
        per_bucket[spec.label(idx)] = BucketStats(
            VE=_mean(r[0] for r in rows), LE=_mean(r[1] for r in rows),
            AE=_mean(r[2] for r in rows), count=len(rows),
        )
    buckets = list(per_bucket.values())
    a_ve = _mean(e[0] for e in errs)
    return MetricReport(
        aVE=a_ve,
        aLE=_mean(e[1] for e in errs),
        aAE=_mean(e[2] for e in errs),
        mVE=_mean(b.VE for b in buckets),
        mLE=_mean(b.LE for b in buckets),
        mAE=_mean(b.AE for b in buckets),
        epe=a_ve,
        per_bucket=per_bucket,
    )


def epe(pairs: Sequence[tuple[OffsetVec, OffsetVec]]) -> float:
    """Mean end-point error of matched offset pairs."""
    pairs = list(pairs)
    if not pairs:
        raise EmptyInput("no offset pairs")
    return _mean(math.hypot(p.dx - g.dx, p.dy - g.dy) for p, g in pairs)


def _f1(precision: float, recall: float) -> float:
    s = precision + recall
    return 0.0 if s == 0 else 2.0 * precision * recall / s


def _stack(masks: Sequence[RasterMask]) -> np.ndarray:
    shapes = {m.shape for m in masks}
    if len(shapes) > 1:
        raise ShapeMismatch(f"masks have different shapes: {sorted(shapes)}")
    return np.stack([m.bits.ravel() for m in masks]).astype(np.float64)


def iou_matrix(pred: Sequence[RasterMask], gt: Sequence[RasterMask]) -> np.ndarray:
    """Pairwise IoU, shape ``(len(pred), len(gt))``."""
    if not pred or not gt:
        return np.zeros((len(pred), len(gt)))
    if pred[0].shape != gt[0].shape:
        raise ShapeMismatch(f"pred shape {pred[0].shape} != gt shape {gt[0].shape}")
    p, g = _stack(pred), _stack(gt)
    inter = p @ g.T
    union = p.sum(1)[:, None] + g.sum(1)[None, :] - inter
    return np.divide(inter, union, out=np.zeros_like(inter), where=union > 0)


def match_instances(pred, gt, iou_threshold: float = 0.5) -> list[tuple[int, int, float]]:
    """Greedy one-to-one matching in descending IoU order.

    Equal IoUs are resolved by lower pred index, then lower gt index.
    """
    ious = iou_matrix(list(pred), list(gt))
    pi, gi = np.nonzero(ious >= iou_threshold)
    vals = ious[pi, gi]
    order = np.lexsort((gi, pi, -vals))
    used_p, used_g, matches = set(), set(), []
    for k in order:
        i, j = int(pi[k]), int(gi[k])
        if i in used_p or j in used_g:
            continue
        used_p.add(i)
        used_g.add(j)
        matches.append((i, j, float(vals[k])))
    return matches


def prf_from_counts(tp: int, fp: int, fn: int) -> tuple[float, float, float]:
    """Precision, recall and F1 in percent from pooled counts.

    A ratio with a zero denominator is 100 when nothing was missed on the
    other side as well, else 0.
    """
    precision = 100.0 * tp / (tp + fp) if tp + fp else (100.0 if fn == 0 else 0.0)
    recall = 100.0 * tp / (tp + fn) if tp + fn else (100.0 if fp == 0 else 0.0)
    return precision, recall, _f1(precision, recall)


def instance_counts(pred, gt, iou_threshold: float = 0.5) -> tuple[int, int, int]:
    """(true positives, false positives, false negatives) after instance matching."""
    if not 0.0 < iou_threshold < 1.0:
        raise InvariantError(f"iou_threshold must be in (0, 1), got {iou_threshold}")
    pred, gt = list(pred), list(gt)
    tp = len(match_instances(pred, gt, iou_threshold)) if pred and gt else 0
    return tp, len(pred) - tp, len(gt) - tp


def mask_prf(pred: Sequence[RasterMask], gt: Sequence[RasterMask], iou_threshold: float = 0.5):
    """Instance-level precision, recall and F1 in percent.

    Both lists empty scores 100 across the board; otherwise an empty side
    makes every score 0.
    """
    return prf_from_counts(*instance_counts(pred, gt, iou_threshold))


def pixel_counts(pred: Sequence[RasterMask | None], gt: Sequence[RasterMask]) -> tuple[int, int, int]:
    """Pooled pixel (tp, fp, fn) over index-aligned instances; ``None`` is an empty prediction."""
    if len(pred) != len(gt):
        raise InvariantError(f"pred and gt differ in length: {len(pred)} vs {len(gt)}")
    tp = fp = fn = 0
    for p, g in zip(pred, gt):
        gb = g.bits
        if p is None:
            fn += int(np.count_nonzero(gb))
            continue
        if p.shape != g.shape:
            raise ShapeMismatch(f"pred shape {p.shape} != gt shape {g.shape}")
        inter = int(np.count_nonzero(p.bits & gb))
        tp += inter
        fp += p.area - inter
        fn += int(np.count_nonzero(gb)) - inter
    return tp, fp, fn


def pixel_prf(pred: Sequence[RasterMask | None], gt: Sequence[RasterMask]):
    """Pixel-level precision, recall and F1 in percent over index-aligned instances."""
    return prf_from_counts(*pixel_counts(pred, gt))


def expand_region(region, delta: int, shape, seed: int = 0) -> tuple[int, int, int, int]:
    """Grow ``(x0, y0, x1, y1)`` (half-open) by a seeded random margin in ``[0, delta]`` per side."""
    x0, y0, x1, y1 = (int(v) for v in region)
    if x1 < x0 or y1 < y0:
        raise InvariantError(f"invalid region {region}")
    if delta < 0:
        raise InvariantError(f"delta must be >= 0, got {delta}")
    left, top, right, bottom = (int(v) for v in np.random.default_rng(seed).integers(0, int(delta) + 1, size=4))
    h, w = shape
    return max(0, x0 - left), max(0, y0 - top), min(w, x1 + right), min(h, y1 + bottom)


def ds_bce_loss(pred_map, gt_map, region, delta: int = 0, seed: int = 0) -> float:
    """Binary cross-entropy summed over a prompt region grown by a random margin.

    Args:
        pred_map: predicted probabilities, clamped to ``[1e-7, 1 - 1e-7]``.
        gt_map: binary targets with the same shape.
        region: ``(x0, y0, x1, y1)``, half-open pixel rectangle.
        delta: largest per-side margin in pixels.
        seed: seed for the margins.

    Raises:
        ShapeMismatch: if the maps differ in shape.
    """
    pred = np.asarray(pred_map, dtype=np.float64)
    gt = np.asarray(gt_map, dtype=np.float64)
    if pred.shape != gt.shape or pred.ndim != 2:
        raise ShapeMismatch(f"pred shape {pred.shape} != gt shape {gt.shape}")
    x0, y0, x1, y1 = expand_region(region, delta, pred.shape, seed)
    p = np.clip(pred[y0:y1, x0:x1], BCE_EPS, 1.0 - BCE_EPS)
    y = gt[y0:y1, x0:x1]
    return float(np.sum(-y * np.log(p) - (1.0 - y) * np.log1p(-p)))
