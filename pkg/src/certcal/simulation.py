"""Monte Carlo checks of the calibration guarantees on synthetic score laws.

Score laws have closed-form CDFs, so the true Type I error of a calibrated
threshold is ``1 - F0(tau)`` exactly and no test-set noise enters the
exceedance frequency.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import stats

from .calibration import calibrate
from .errors import InvalidInputError
from .shift import ShiftConfig, calibrate_under_shift

MAX_EXACT_N0 = 30


# -- exact oracle -------------------------------------------------------------

def oracle_v_exact(k: int, n0: int, alpha) -> Fraction:
    """``v(k)`` in exact rational arithmetic (n0 <= 30)."""
    if n0 < 0 or n0 > MAX_EXACT_N0:
        raise InvalidInputError(f"exact oracle supports 0 <= n0 <= {MAX_EXACT_N0}, got {n0}")
    a = Fraction(alpha) if not isinstance(alpha, float) else Fraction(alpha).limit_denominator(10**6)
    if not (0 < a < 1):
        raise InvalidInputError(f"alpha must lie in (0, 1), got {alpha}")
    if not (1 <= k <= n0 + 1):
        raise InvalidInputError(f"k must lie in [1, {n0 + 1}], got {k}")
    return sum(
        (math.comb(n0, j) * (1 - a) ** j * a ** (n0 - j) for j in range(k, n0 + 1)),
        Fraction(0),
    )


# -- score laws ---------------------------------------------------------------

class ScoreLaw:
    """A continuous score distribution with cdf, pdf and a sampler."""

    def __init__(self, name: str, dist):
        self.name = name
        self._dist = dist

    def __repr__(self):
        return f"ScoreLaw({self.name})"

    def cdf(self, x):
        return self._dist.cdf(x)

    def sf(self, x):
        return self._dist.sf(x)

    def pdf(self, x):
        return self._dist.pdf(x)

    def ppf(self, q):
        return self._dist.ppf(q)

    def sample(self, rng: np.random.Generator, size):
        return self._dist.rvs(size=size, random_state=rng)


class TransformedLaw(ScoreLaw):
    """Law of ``H(X)`` for a strictly increasing ``H`` with inverse ``H_inv``."""

    def __init__(self, base: ScoreLaw, h: Callable, h_inv: Callable, name: str = "transformed"):
        self.name = f"{name}({base.name})"
        self.base, self.h, self.h_inv = base, h, h_inv

    def cdf(self, x):
        return self.base.cdf(self.h_inv(x))

    def sf(self, x):
        return self.base.sf(self.h_inv(x))

    def pdf(self, x):
        raise NotImplementedError("density of a transformed law is not needed")

    def ppf(self, q):
        return self.h(self.base.ppf(q))

    def sample(self, rng, size):
        return self.h(self.base.sample(rng, size))


def uniform_law(lo: float = 0.0, hi: float = 1.0) -> ScoreLaw:
    return ScoreLaw(f"uniform({lo:g},{hi:g})", stats.uniform(lo, hi - lo))


def beta_law(a: float, b: float) -> ScoreLaw:
    return ScoreLaw(f"beta({a:g},{b:g})", stats.beta(a, b))


def normal_law(mu: float = 0.0, sigma: float = 1.0, lo: Optional[float] = None, hi: Optional[float] = None) -> ScoreLaw:
    """Normal(mu, sigma) truncated to [lo, hi], by default mu +- 4 sigma."""
    lo = mu - 4 * sigma if lo is None else lo
    hi = mu + 4 * sigma if hi is None else hi
    d = stats.truncnorm((lo - mu) / sigma, (hi - mu) / sigma, loc=mu, scale=sigma)
    return ScoreLaw(f"normal({mu:g},{sigma:g},{lo:g},{hi:g})", d)


_LAWS = {"uniform": uniform_law, "beta": beta_law, "normal": normal_law, "truncnorm": normal_law}
_LAW_RE = re.compile(r"^\s*([a-z]+)\s*(?:\((.*)\))?\s*$")


def parse_law(text: str) -> ScoreLaw:
    """Parse ``uniform``, ``uniform(a,b)``, ``beta(a,b)`` or ``normal(mu,sigma[,lo,hi])``."""
    m = _LAW_RE.match(text.lower())
    if not m or m.group(1) not in _LAWS:
        raise InvalidInputError(f"unknown score law {text!r}")
    args = [] if not m.group(2) else [float(x) for x in m.group(2).split(",")]
    try:
        return _LAWS[m.group(1)](*args)
    except TypeError:
        raise InvalidInputError(f"wrong number of parameters in {text!r}") from None


@dataclass(frozen=True)
class SyntheticWorld:
    """Score laws for the uncertain (p0) and certain (p1) classes."""

    p0: ScoreLaw
    p1: ScoreLaw
    p_y: float = 0.5
    tau_oracle: Optional[float] = None

    def __post_init__(self):
        if not (0 < self.p_y < 1):
            raise InvalidInputError(f"p_y must lie in (0, 1), got {self.p_y}")

    def with_oracle(self, alpha: float) -> "SyntheticWorld":
        """Attach the level-alpha Neyman-Pearson threshold ``F0^{-1}(1 - alpha)``.

        Valid when the likelihood ratio p1/p0 is increasing in the score, so the
        optimal test thresholds the score itself.
        """
        from dataclasses import replace

        return replace(self, tau_oracle=float(self.p0.ppf(1 - alpha)))

    def sample_labeled(self, n: int, rng: np.random.Generator):
        """``n`` i.i.d. ``(score, y)`` draws from the class mixture."""
        y = (rng.random(n) < self.p_y).astype(int)
        s = np.empty(n)
        n1 = int(y.sum())
        s[y == 1] = self.p1.sample(rng, n1)
        s[y == 0] = self.p0.sample(rng, n - n1)
        return s, y


@dataclass(frozen=True)
class TrialReport:
    trials: int
    exceed_count: int
    exceed_rate: float
    mean_type2_excess: float
    seed: int
    taus: np.ndarray = field(default=None, repr=False, compare=False)

    COLUMNS = ("trials", "exceed_count", "exceed_rate", "mean_type2_excess", "seed")

    def row(self) -> tuple:
        return tuple(getattr(self, c) for c in self.COLUMNS)


def exceed_margin(delta: float, trials: int) -> float:
    """Three-sigma binomial allowance on an exceedance frequency."""
    return 3.0 * math.sqrt(delta * (1 - delta) / trials)


def _trial_seed(seed: int, t: int) -> int:
    return int(np.random.SeedSequence([seed, t]).generate_state(1, np.uint64)[0])


def _calibrated_taus(scores: np.ndarray, alpha: float, delta: float) -> np.ndarray:
    return np.array([calibrate(row, alpha, delta).tau for row in scores])


def _type2_excess(world: SyntheticWorld, taus: np.ndarray) -> np.ndarray:
    f1 = np.where(np.isinf(taus), 1.0, world.p1.cdf(np.where(np.isinf(taus), 0.0, taus)))
    return np.maximum(f1 - world.p1.cdf(world.tau_oracle), 0.0)


def _report(true_err, alpha, taus, excess, seed) -> TrialReport:
    trials = true_err.size
    exceed = int((true_err > alpha).sum())
    return TrialReport(trials, exceed, exceed / trials, excess, seed, taus)


def run_type1_trials(world: SyntheticWorld, n0: int, alpha: float, delta: float, trials: int, seed: int = 42) -> TrialReport:
    """Repeat calibration on fresh draws from p0 and count thresholds whose exact FPR exceeds alpha."""
    if trials < 1:
        raise InvalidInputError("trials must be positive")
    rng = np.random.default_rng(seed)
    scores = np.asarray(world.p0.sample(rng, (trials, n0)), dtype=float).reshape(trials, n0)
    taus = _calibrated_taus(scores, alpha, delta)
    true_err = np.where(np.isinf(taus), 0.0, world.p0.sf(np.where(np.isinf(taus), 0.0, taus)))
    excess = math.nan if world.tau_oracle is None else float(_type2_excess(world, taus).mean())
    return _report(true_err, alpha, taus, excess, seed)


@dataclass(frozen=True)
class Type2Row:
    n0: int
    median_excess: float
    q25_excess: float
    q75_excess: float
    median_tau: float
    tau_oracle: float

    COLUMNS = ("n0", "median_excess", "q25_excess", "q75_excess", "median_tau", "tau_oracle")

    def row(self) -> tuple:
        return tuple(getattr(self, c) for c in self.COLUMNS)


def run_type2_study(
    world: SyntheticWorld,
    n0_grid: Sequence[int],
    alpha: float,
    delta: float,
    trials: int,
    seed: int = 42,
) -> list[Type2Row]:
    """Median excess Type II error ``F1(tau_hat) - F1(tau_alpha)`` (floored at 0) per n0."""
    if world.tau_oracle is None:
        raise InvalidInputError("type II study needs a world with tau_oracle")
    rows = []
    for i, n0 in enumerate(n0_grid):
        rep = run_type1_trials(world, int(n0), alpha, delta, trials, _trial_seed(seed, i))
        ex = _type2_excess(world, rep.taus)
        q25, med, q75 = np.quantile(ex, [0.25, 0.5, 0.75])
        rows.append(Type2Row(int(n0), float(med), float(q25), float(q75),
                             float(np.median(rep.taus)), world.tau_oracle))
    return rows


def density_ratio_of(source: ScoreLaw, target: ScoreLaw) -> Callable:
    """Analytic ``w = p_target / p_source`` (zero outside the source support)."""

    def w(x):
        ps = source.pdf(x)
        return np.where(ps > 0, target.pdf(x) / np.where(ps > 0, ps, 1.0), 0.0)

    return w


def run_shift_trials(
    source: ScoreLaw,
    target: ScoreLaw,
    n0: int,
    alpha: float,
    delta: float,
    trials: int,
    seed: int = 42,
    ratio: Optional[Callable] = None,
    gamma: float = 0.9,
    bound_b: Optional[float] = None,
) -> TrialReport:
    """Calibrate on source draws via rejection sampling; judge exact FPR under the target.

    ``ratio`` defaults to the analytic density ratio. Passing a wrong ratio
    (e.g. constant 1) gives a negative control.
    """
    if trials < 1:
        raise InvalidInputError("trials must be positive")
    ratio = density_ratio_of(source, target) if ratio is None else ratio
    rng = np.random.default_rng(seed)
    scores = np.asarray(source.sample(rng, (trials, n0)), dtype=float).reshape(trials, n0)
    taus = np.empty(trials)
    for t in range(trials):
        w = np.broadcast_to(np.asarray(ratio(scores[t]), dtype=float), (n0,))
        cfg = ShiftConfig(tuple(w), gamma=gamma, bound_b=bound_b, seed=_trial_seed(seed, t))
        taus[t] = calibrate_under_shift(scores[t], cfg, alpha, delta).tau
    true_err = np.where(np.isinf(taus), 0.0, target.sf(np.where(np.isinf(taus), 0.0, taus)))
    return _report(true_err, alpha, taus, math.nan, seed)
