"""Calibration under covariate shift by rejection sampling.

Calibration pairs come from a source law while the guarantee is wanted under
a target law. With density ratios ``w_i = dP_target / dP_source`` bounded by
``B``, index ``i`` is kept iff ``U_i <= w_i`` with ``U_i ~ Uniform[0, B]``. The
kept pairs are i.i.d. from the target law given the kept index set, so the
ordinary calibration on them carries the usual guarantee.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from . import _kernels
from .calibration import CertaintyPredictor, calibrate, DEFAULT_DELTA
from .errors import InvalidInputError

DEFAULT_GAMMA = 0.9
PROB_CLAMP = 1e-6
EMPTY_ACCEPT_WARNING = "rejection sampling accepted no calibration pairs; predictor abstains on everything"


def _seed64(seed) -> int:
    seed = int(seed)
    if seed < 0:
        raise InvalidInputError(f"seed must be non-negative, got {seed}")
    return seed % (1 << 64)


@dataclass(frozen=True)
class ShiftConfig:
    ratios: tuple
    gamma: float = DEFAULT_GAMMA
    bound_b: Optional[float] = None
    seed: int = 42

    def __post_init__(self):
        r = tuple(float(x) for x in self.ratios)
        if any(not math.isfinite(x) or x < 0 for x in r):
            raise InvalidInputError("density ratios must be finite and non-negative")
        object.__setattr__(self, "ratios", r)
        if not (0.0 < self.gamma <= 1.0):
            raise InvalidInputError(f"gamma must lie in (0, 1], got {self.gamma}")
        if self.bound_b is not None and not (self.bound_b > 0 and math.isfinite(self.bound_b)):
            raise InvalidInputError(f"bound_b must be positive, got {self.bound_b}")
        object.__setattr__(self, "seed", _seed64(self.seed))


@dataclass(frozen=True)
class DiscriminatorConfig:
    feature_dim: int
    learning_rate: float = 0.5
    epochs: int = 500
    l2: float = 0.0

    def __post_init__(self):
        if self.feature_dim < 1:
            raise InvalidInputError("feature_dim must be positive")
        if not (self.learning_rate > 0 and math.isfinite(self.learning_rate)):
            raise InvalidInputError("learning_rate must be positive")
        if self.epochs < 1:
            raise InvalidInputError("epochs must be positive")
        if not (self.l2 >= 0 and math.isfinite(self.l2)):
            raise InvalidInputError("l2 must be non-negative")


class DensityRatioModel:
    """Odds of a linear-logit discriminator (target = 1, source = 0).

    ``w(x) = p(x) / (1 - p(x)) * n_source / n_target`` with ``p`` clamped to
    ``[1e-6, 1 - 1e-6]``.
    """

    def __init__(self, mean, scale, coef, intercept, n_source, n_target):
        self.mean = mean
        self.scale = scale
        self.coef = coef
        self.intercept = intercept
        self.prior_ratio = n_source / n_target

    def logit(self, x) -> np.ndarray:
        z = (np.atleast_2d(np.asarray(x, dtype=float)) - self.mean) / self.scale
        return z @ self.coef + self.intercept

    def __call__(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if x.shape[1] != self.coef.shape[0]:
            raise InvalidInputError(f"expected {self.coef.shape[0]} features, got {x.shape[1]}")
        if not np.all(np.isfinite(x)):
            raise InvalidInputError("features must be finite")
        p = np.clip(_sigmoid(self.logit(x)), PROB_CLAMP, 1.0 - PROB_CLAMP)
        return p / (1.0 - p) * self.prior_ratio


def _sigmoid(t):
    return 0.5 * (1.0 + np.tanh(0.5 * t))


def _as_features(x, name, dim) -> np.ndarray:
    a = np.asarray(x, dtype=float)
    if a.ndim == 1:
        a = a[:, None]
    if a.ndim != 2 or a.shape[0] == 0:
        raise InvalidInputError(f"{name} must be a non-empty list of feature vectors")
    if a.shape[1] != dim:
        raise InvalidInputError(f"{name}: expected feature dimension {dim}, got {a.shape[1]}")
    if not np.all(np.isfinite(a)):
        raise InvalidInputError(f"{name} contains non-finite values")
    return a


def estimate_density_ratio(source_features, target_features, config: DiscriminatorConfig) -> DensityRatioModel:
    """Fit a logistic discriminator by full-batch gradient descent and return its odds ratio."""
    xs = _as_features(source_features, "source_features", config.feature_dim)
    xt = _as_features(target_features, "target_features", config.feature_dim)
    x = np.vstack([xs, xt])
    y = np.concatenate([np.zeros(len(xs)), np.ones(len(xt))])
    mean = x.mean(axis=0)
    scale = x.std(axis=0)
    scale[scale == 0] = 1.0
    z = (x - mean) / scale

    coef = np.zeros(config.feature_dim)
    b = 0.0
    n = len(y)
    for _ in range(config.epochs):
        err = _sigmoid(z @ coef + b) - y
        coef -= config.learning_rate * (z.T @ err / n + config.l2 * coef)
        b -= config.learning_rate * err.mean()
    return DensityRatioModel(mean, scale, coef, b, len(xs), len(xt))


def clip_bound_b(ratios: Sequence[float], gamma: float = DEFAULT_GAMMA) -> float:
    """Upper nearest-rank gamma-quantile of the ratios: the ceil(gamma * n)-th smallest."""
    r = np.sort(np.asarray(ratios, dtype=float))
    if r.size == 0:
        raise InvalidInputError("ratios must be non-empty")
    if not (0.0 < gamma <= 1.0):
        raise InvalidInputError(f"gamma must lie in (0, 1], got {gamma}")
    if np.any(~np.isfinite(r)) or r[0] < 0:
        raise InvalidInputError("ratios must be finite and non-negative")
    if r[-1] == 0:
        raise InvalidInputError("all density ratios are zero")
    rank = math.ceil(Fraction(gamma).limit_denominator(10**9) * r.size)
    b = float(r[min(max(rank, 1), r.size) - 1])
    if b == 0:
        # quantile lands in a block of zeros; fall back to the smallest positive ratio
        b = float(r[r > 0][0])
    return b


def acceptance_uniforms(n: int, bound_b: float, seed) -> np.ndarray:
    """``U_i ~ Uniform(0, B]`` keyed by ``(seed, i)``, independent of ``n``."""
    return bound_b * _kernels.counter_uniforms(_seed64(seed), np.arange(n, dtype=np.int64))


def rejection_sample(ratios: Sequence[float], bound_b: float, seed) -> np.ndarray:
    """Ascending indices ``i`` with ``U_i <= w_i``."""
    if not (bound_b > 0 and math.isfinite(bound_b)):
        raise InvalidInputError(f"bound_b must be positive and finite, got {bound_b}")
    w = np.asarray(ratios, dtype=float)
    u = acceptance_uniforms(w.size, bound_b, seed)
    return np.flatnonzero(u <= w)


@dataclass(frozen=True)
class ShiftCalibration:
    predictor: CertaintyPredictor
    bound_b: float
    accepted: np.ndarray


def calibrate_under_shift_detailed(
    scores: Sequence[float],
    shift: ShiftConfig,
    alpha: float,
    delta: float = DEFAULT_DELTA,
    function_id=None,
) -> ShiftCalibration:
    s = np.asarray(scores, dtype=float)
    if s.size != len(shift.ratios):
        raise InvalidInputError(
            f"{len(shift.ratios)} density ratios for {s.size} calibration scores"
        )
    if s.size == 0:
        pred = calibrate([], alpha, delta, function_id)
        return ShiftCalibration(_with_warning(pred, EMPTY_ACCEPT_WARNING), math.nan, np.array([], int))
    b = shift.bound_b if shift.bound_b is not None else clip_bound_b(shift.ratios, shift.gamma)
    idx = rejection_sample(shift.ratios, b, shift.seed)
    pred = calibrate(s[idx], alpha, delta, function_id)
    if idx.size == 0:
        pred = _with_warning(pred, EMPTY_ACCEPT_WARNING)
    return ShiftCalibration(pred, b, idx)


def calibrate_under_shift(scores, shift: ShiftConfig, alpha, delta=DEFAULT_DELTA, function_id=None) -> CertaintyPredictor:
    """Rejection-sample the calibration scores to the target law, then calibrate.

    The predictor's ``n0`` is the accepted count. An empty accepted set gives
    the abstain-all predictor with a warning rather than an error.
    """
    return calibrate_under_shift_detailed(scores, shift, alpha, delta, function_id).predictor


def _with_warning(pred: CertaintyPredictor, msg: str) -> CertaintyPredictor:
    from dataclasses import replace

    return replace(pred, warnings=tuple(pred.warnings) + (msg,))
