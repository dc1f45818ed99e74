"""Neyman-Pearson threshold selection on the uncertain calibration subset.

Given the certainty scores ``T_1..T_n0`` of pairs known to be uncertain, the
threshold is the k-hat-th smallest score, where k-hat is the smallest index
whose binomial tail

    v(k) = sum_{j=k}^{n0} C(n0, j) (1 - alpha)^j alpha^(n0 - j)

is at most delta (``v(n0 + 1) = 0``, ``T_(n0+1) = +inf``). A pair is then
declared certain iff its score is strictly above the threshold, which keeps
the false positive rate below alpha with probability at least 1 - delta over
the calibration draw, for any continuous score law and any n0.

``v(k)`` also equals the regularized incomplete beta ``I_{1-alpha}(k, n0-k+1)``;
that identity is used only as a cross-check in the tests.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from typing import Iterable, Optional, Sequence

import numpy as np

from . import _kernels
from .errors import InvalidInputError, ParseError
from .scores import ScoreFunction

DEFAULT_DELTA = 0.05
ABSTAIN_ALL_WARNING = "abstain-all: calibration set too small for (alpha, delta); threshold is +inf"


class Decision(str, Enum):
    CERTAIN = "certain"
    UNCERTAIN = "uncertain"


def _check_level(name: str, x: float) -> float:
    x = float(x)
    if not (0.0 < x < 1.0):
        raise InvalidInputError(f"{name} must lie strictly inside (0, 1), got {x}")
    return x


@lru_cache(maxsize=256)
def _tail_table(n0: int, alpha: float) -> np.ndarray:
    v = _kernels.binomial_tail(n0, alpha)
    v.setflags(write=False)
    return v


def binomial_tail_v(k: int, n0: int, alpha: float) -> float:
    """``v(k)``, the Binomial(n0, 1 - alpha) upper tail at k; zero at k = n0 + 1."""
    alpha = _check_level("alpha", alpha)
    if n0 < 0:
        raise InvalidInputError(f"n0 must be >= 0, got {n0}")
    if not (1 <= k <= n0 + 1):
        raise InvalidInputError(f"k must lie in [1, {n0 + 1}], got {k}")
    return float(_tail_table(int(n0), alpha)[k - 1])


def binomial_tail_table(n0: int, alpha: float) -> np.ndarray:
    """All of ``v(1), ..., v(n0 + 1)`` as a read-only array."""
    alpha = _check_level("alpha", alpha)
    if n0 < 0:
        raise InvalidInputError(f"n0 must be >= 0, got {n0}")
    return _tail_table(int(n0), alpha)


def select_k_hat(n0: int, alpha: float, delta: float) -> int:
    """Smallest ``k`` in ``[1, n0 + 1]`` with ``v(k) <= delta``."""
    delta = _check_level("delta", delta)
    v = binomial_tail_table(n0, alpha)
    # v(n0 + 1) = 0 guarantees a hit
    return int(np.flatnonzero(v <= delta)[0]) + 1


@dataclass(frozen=True)
class CertaintyPredictor:
    """A calibrated certain/uncertain classifier ``eta > tau``."""

    alpha: float
    delta: float
    n0: int
    k_hat: int
    tau: float
    function_id: Optional[ScoreFunction] = None
    warnings: tuple = field(default=(), compare=False)

    def __post_init__(self):
        if self.function_id is not None:
            object.__setattr__(self, "function_id", ScoreFunction.parse(self.function_id))
        if not (1 <= self.k_hat <= self.n0 + 1):
            raise InvalidInputError(f"k_hat={self.k_hat} outside [1, n0 + 1] for n0={self.n0}")
        if (self.k_hat == self.n0 + 1) != math.isinf(self.tau) or self.tau == -math.inf:
            raise InvalidInputError("tau must be +inf exactly when k_hat = n0 + 1")

    @property
    def abstains_always(self) -> bool:
        return math.isinf(self.tau)

    def predict(self, eta: float) -> Decision:
        return predict(self, eta)

    def to_dict(self) -> dict:
        from . import __version__

        return {
            "alpha": self.alpha,
            "delta": self.delta,
            "n0": self.n0,
            "k_hat": self.k_hat,
            "tau": "inf" if math.isinf(self.tau) else self.tau,
            "function_id": None if self.function_id is None else self.function_id.value,
            "tool_version": __version__,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CertaintyPredictor":
        try:
            tau = d["tau"]
            tau = math.inf if tau == "inf" else float(tau)
            fid = d.get("function_id")
            p = cls(
                alpha=float(d["alpha"]),
                delta=float(d["delta"]),
                n0=int(d["n0"]),
                k_hat=int(d["k_hat"]),
                tau=tau,
                function_id=None if fid is None else ScoreFunction.parse(fid),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidInputError(f"invalid predictor document: {exc}") from None
        return p

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    @classmethod
    def loads(cls, text: str) -> "CertaintyPredictor":
        try:
            d = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ParseError(f"predictor file is not valid JSON ({exc.msg})", exc.lineno) from None
        if not isinstance(d, dict):
            raise InvalidInputError("predictor document must be a JSON object")
        return cls.from_dict(d)


def calibrate(
    scores: Iterable[float],
    alpha: float,
    delta: float = DEFAULT_DELTA,
    function_id: "ScoreFunction | str | None" = None,
) -> CertaintyPredictor:
    """Pick the threshold from certainty scores of the uncertain subset.

    An empty score list is allowed and yields the abstain-all predictor.
    """
    alpha = _check_level("alpha", alpha)
    delta = _check_level("delta", delta)
    t = np.sort(np.asarray(list(scores) if not isinstance(scores, np.ndarray) else scores,
                           dtype=float).ravel(), kind="stable")
    if not np.all(np.isfinite(t)):
        raise InvalidInputError("calibration scores must be finite")
    n0 = t.size
    k_hat = select_k_hat(n0, alpha, delta)
    tau = float(t[k_hat - 1]) if k_hat <= n0 else math.inf
    fid = None if function_id is None else ScoreFunction.parse(function_id)
    warnings = (ABSTAIN_ALL_WARNING,) if math.isinf(tau) else ()
    return CertaintyPredictor(alpha, delta, n0, k_hat, tau, fid, warnings)


def predict(predictor: CertaintyPredictor, eta: float) -> Decision:
    eta = float(eta)
    if not math.isfinite(eta):
        raise InvalidInputError(f"eta must be finite, got {eta}")
    return Decision.CERTAIN if eta > predictor.tau else Decision.UNCERTAIN


def predict_many(predictor: CertaintyPredictor, etas) -> np.ndarray:
    """Boolean array, True where the pair is declared certain."""
    e = np.asarray(etas, dtype=float)
    if not np.all(np.isfinite(e)):
        raise InvalidInputError("eta values must be finite")
    return e > predictor.tau


@dataclass(frozen=True)
class SweepPoint:
    tau: float
    accuracy: Optional[float]
    fpr: Optional[float]
    fnr: Optional[float]


def _ratio(num: int, den: int) -> Optional[float]:
    return None if den == 0 else num / den


def threshold_sweep(
    predictor: CertaintyPredictor, labeled_scores: Sequence[tuple]
) -> list[SweepPoint]:
    """Accuracy, FPR and FNR at the calibrated threshold and at every larger observed score.

    Raising the threshold can only lower the false positive rate, so any point
    on this sweep keeps the Type I guarantee; it is used to trade answer rate
    for accuracy. ``labeled_scores`` holds ``(eta, y)`` pairs. Undefined ratios
    (no answered pairs, or an empty class) are ``None``.
    """
    if len(labeled_scores) == 0:
        raise InvalidInputError("labeled_scores must be non-empty")
    eta = np.array([float(p[0]) for p in labeled_scores])
    y = np.array([int(p[1]) for p in labeled_scores])
    cand = [predictor.tau] + sorted(set(eta[eta > predictor.tau].tolist()))

    order = np.argsort(eta, kind="stable")
    es, ys = eta[order], y[order]
    # answered at threshold t = pairs with eta > t = suffix after searchsorted(side="right")
    pos_suffix = np.concatenate([np.cumsum(ys[::-1])[::-1], [0]])
    n = es.size
    n_pos, n_neg = int(ys.sum()), int(n - ys.sum())
    out: list[SweepPoint] = []
    for t in cand:
        i = int(np.searchsorted(es, t, side="right"))
        answered = n - i
        tp = int(pos_suffix[i])
        fp = answered - tp
        out.append(SweepPoint(t, _ratio(tp, answered), _ratio(fp, n_neg), _ratio(n_pos - tp, n_pos)))
    for a, b in zip(out, out[1:]):
        assert a.fpr is None or a.fpr >= b.fpr
        assert a.fnr is None or a.fnr <= b.fnr
    return out
