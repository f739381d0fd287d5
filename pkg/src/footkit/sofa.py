"""Self offset attention: length-keyed kernel regression over offset directions.

Each offset of an image is a query; the keys are the lengths of all
offsets in the same image, and the values are their directions. Weights are
``softmax(-0.5 * (w * (rho_i - rho_j))**2)`` with a look-longer mask that
hides keys shorter than the query, so short offsets borrow direction from
long ones while long offsets are left (nearly) alone.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import OffsetVec, normalize_angle
from .errors import DegenerateDirection, EmptyCalibration, EmptyKeys, InvariantError

MASK_LOGIT = -1e9
DEGENERATE_NORM = 1e-9
LENGTH_TIE_TOL = 1e-9   # px; lengths rebuilt from (dx, dy) differ in the last bits
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)

LEVELS = ("angle", "vector")
MASKINGS = ("look_longer", "none")


@dataclass(frozen=True)
class SofaConfig:
    w: float = 0.0
    level: str = "vector"
    masking: str = "look_longer"
    include_self: bool = True

    def __post_init__(self):
        if not math.isfinite(self.w):
            raise InvariantError(f"w must be finite, got {self.w}")
        if self.level not in LEVELS:
            raise InvariantError(f"level must be one of {LEVELS}, got {self.level!r}")
        if self.masking not in MASKINGS:
            raise InvariantError(f"masking must be one of {MASKINGS}, got {self.masking!r}")
        if self.masking == "look_longer" and not self.include_self:
            raise InvariantError("look_longer masking requires include_self=True")


@dataclass(frozen=True)
class OffsetBatch:
    """Offsets of the buildings in one image."""

    offsets: tuple[OffsetVec, ...]

    def __post_init__(self):
        object.__setattr__(self, "offsets", tuple(self.offsets))
        if not self.offsets:
            raise InvariantError("offset batch is empty")

    def __len__(self):
        return len(self.offsets)

    def lengths(self) -> np.ndarray:
        return np.array([o.rho for o in self.offsets])

    def angles(self) -> np.ndarray:
        return np.array([o.alpha for o in self.offsets])


@dataclass(frozen=True)
class FitResult:
    w: float
    objective: float

    def to_dict(self) -> dict:
        return {"w": self.w, "objective": self.objective}


def _as_batch(batch) -> OffsetBatch:
    return batch if isinstance(batch, OffsetBatch) else OffsetBatch(tuple(batch))


def gaussian_kernel(u):
    return _INV_SQRT_2PI * np.exp(-0.5 * np.square(u))


def nw_regress(query: float, keys: Sequence[float], values: Sequence[float]) -> float:
    """Nadaraya-Watson estimate at ``query`` with a Gaussian kernel."""
    keys = np.asarray(keys, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    if keys.size == 0:
        raise EmptyKeys("no keys to regress on")
    if keys.shape != values.shape:
        raise ValueError(f"keys and values differ in length: {keys.size} vs {values.size}")
    # log-domain normalisation: identical to K/sum(K) but safe far from all keys
    logits = -0.5 * np.square(query - keys)
    weights = np.exp(logits - logits.max())
    weights /= weights.sum()
    return float(weights @ values)


def attention_mask(lengths: np.ndarray, cfg: SofaConfig) -> np.ndarray:
    """Boolean (N, N) matrix, True where query i may attend to key j."""
    n = len(lengths)
    allowed = np.ones((n, n), dtype=bool)
    if cfg.masking == "look_longer":
        allowed &= lengths[None, :] >= lengths[:, None] - LENGTH_TIE_TOL
    # zero-length keys have no direction; they only ever see themselves
    allowed &= (lengths[None, :] > 0) | np.eye(n, dtype=bool)
    if cfg.include_self:
        np.fill_diagonal(allowed, True)
    else:
        np.fill_diagonal(allowed, False)
    return allowed


def attention_weights(lengths, cfg: SofaConfig | None = None) -> np.ndarray:
    """Row-stochastic (N, N) attention over offset lengths."""
    cfg = cfg or SofaConfig()
    rho = np.asarray(lengths, dtype=np.float64)
    if rho.size == 0:
        raise EmptyKeys("no lengths given")
    logits = -0.5 * np.square(cfg.w * (rho[:, None] - rho[None, :]))
    logits = np.where(attention_mask(rho, cfg), logits, MASK_LOGIT)
    logits -= logits.max(axis=1, keepdims=True)
    weights = np.exp(logits)
    return weights / weights.sum(axis=1, keepdims=True)


def _pooled_directions(batch: OffsetBatch, cfg: SofaConfig) -> np.ndarray:
    weights = attention_weights(batch.lengths(), cfg)
    alpha = batch.angles()
    units = np.stack([np.cos(alpha), np.sin(alpha)], axis=1)
    return weights @ units


def sofa_angle(batch, cfg: SofaConfig | None = None) -> list[float]:
    """Corrected angle per offset: weighted circular mean of key angles."""
    cfg = cfg or SofaConfig(level="angle")
    batch = _as_batch(batch)
    pooled = _pooled_directions(batch, cfg)
    out = []
    for (x, y), orig in zip(pooled, batch.angles()):
        if math.hypot(x, y) < DEGENERATE_NORM:
            warnings.warn("weighted directions cancel; angle left unchanged", DegenerateDirection)
            out.append(float(orig))
        else:
            out.append(normalize_angle(math.atan2(y, x)))
    return out


def sofa_vector(batch, cfg: SofaConfig | None = None) -> list[OffsetVec]:
    """Corrected offsets: each keeps its length, direction becomes the weighted mean."""
    cfg = cfg or SofaConfig(level="vector")
    batch = _as_batch(batch)
    pooled = _pooled_directions(batch, cfg)
    out = []
    for (x, y), o in zip(pooled, batch.offsets):
        norm = math.hypot(x, y)
        if norm < DEGENERATE_NORM:
            warnings.warn("weighted directions cancel; offset left unchanged", DegenerateDirection)
            out.append(o)
        else:
            out.append(OffsetVec(o.rho * x / norm, o.rho * y / norm))
    return out


def correct(batch, cfg: SofaConfig) -> list[OffsetVec]:
    """Apply SOFA at ``cfg.level`` and return offsets either way."""
    batch = _as_batch(batch)
    if cfg.level == "vector":
        return sofa_vector(batch, cfg)
    angles = sofa_angle(batch, cfg)
    return [OffsetVec.from_polar(o.rho, a) for o, a in zip(batch.offsets, angles)]


def _mean_vector_error(calib, cfg: SofaConfig) -> float:
    errors = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DegenerateDirection)
        for pred, gt in calib:
            fixed = correct(pred, cfg)
            errors.extend(math.hypot(p.dx - g.dx, p.dy - g.dy) for p, g in zip(fixed, gt.offsets))
    return math.fsum(errors) / len(errors)


GRID_LO, GRID_HI, GRID_STEP = -2.0, 2.0, 0.05
REFINE_TOL = 1e-4


def fit_w(calib, cfg: SofaConfig | None = None) -> FitResult:
    """Fit the scale ``w`` by minimising mean vector error on calibration pairs.

    ``calib`` is a sequence of ``(predicted, ground_truth)`` batches, index
    aligned. A grid over [-2, 2] at 0.05 picks a bracket (ties go to the
    smallest ``|w|``, then the smallest ``w``); golden-section search then
    refines within one grid step.
    """
    cfg = cfg or SofaConfig()
    calib = [(_as_batch(p), _as_batch(g)) for p, g in calib]
    if not calib:
        raise EmptyCalibration("no calibration pairs")
    for p, g in calib:
        if len(p) != len(g):
            raise InvariantError(f"calibration pair sizes differ: {len(p)} vs {len(g)}")

    def objective(w):
        return _mean_vector_error(calib, SofaConfig(w, cfg.level, cfg.masking, cfg.include_self))

    n_steps = int(round((GRID_HI - GRID_LO) / GRID_STEP))
    grid = [round(GRID_LO + k * GRID_STEP, 10) for k in range(n_steps + 1)]
    scores = [objective(w) for w in grid]
    best_score = min(scores)
    tied = [w for w, f in zip(grid, scores) if f <= best_score + 1e-12 * max(1.0, abs(best_score))]
    best_w = min(tied, key=lambda w: (abs(w), w))
    best_score = scores[grid.index(best_w)]

    lo, hi = best_w - GRID_STEP, best_w + GRID_STEP
    ratio = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = hi - ratio * (hi - lo), lo + ratio * (hi - lo)
    fa, fb = objective(a), objective(b)
    while hi - lo > REFINE_TOL:
        if fa <= fb:
            hi, b, fb = b, a, fa
            a = hi - ratio * (hi - lo)
            fa = objective(a)
        else:
            lo, a, fa = a, b, fb
            b = lo + ratio * (hi - lo)
            fb = objective(b)
    w_ref = 0.5 * (lo + hi)
    f_ref = objective(w_ref)
    if f_ref < best_score:
        return FitResult(float(w_ref), float(f_ref))
    return FitResult(float(best_w), float(best_score))
