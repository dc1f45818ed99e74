"""Entropy-based certainty scores.

Every score here is the negation of an entropy, so larger means more certain
and the maximum value 0 is reached only when all mass sits on one answer.
Logarithms are natural throughout.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence

import numpy as np

from .errors import InvalidInputError, NumericError

PSD_TOL = 1e-9
EIG_FLOOR = 1e-12


class ScoreFunction(str, Enum):
    VE = "ve"
    SE = "se"
    KLE = "kle"

    @classmethod
    def parse(cls, value: "ScoreFunction | str") -> "ScoreFunction":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise InvalidInputError(
                f"unknown score function {value!r}; expected one of "
                + ", ".join(m.value for m in cls)
            ) from None


@dataclass(frozen=True)
class AnswerSample:
    """One sampled answer with optional sequence log-probability and cluster."""

    text: str
    log_prob: Optional[float] = None
    cluster_id: Optional[int] = None

    def __post_init__(self):
        if self.log_prob is not None:
            if not math.isfinite(self.log_prob) and self.log_prob != -math.inf:
                raise InvalidInputError(f"log_prob must be a number <= 0, got {self.log_prob}")
            if self.log_prob > 0:
                raise InvalidInputError(f"log_prob must be <= 0, got {self.log_prob}")
        if self.cluster_id is not None and self.cluster_id < 0:
            raise InvalidInputError(f"cluster_id must be non-negative, got {self.cluster_id}")


@dataclass(frozen=True)
class SemanticKernel:
    """Symmetric PSD matrix with unit trace. Build it with :func:`normalize_kernel`."""

    entries: np.ndarray

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def __post_init__(self):
        k = np.asarray(self.entries, dtype=float)
        if k.ndim != 2 or k.shape[0] != k.shape[1] or k.shape[0] == 0:
            raise InvalidInputError("kernel must be a non-empty square matrix")
        if not np.all(np.isfinite(k)):
            raise NumericError("kernel has non-finite entries")
        if np.max(np.abs(k - k.T)) > PSD_TOL:
            raise InvalidInputError("kernel is not symmetric")
        if abs(np.trace(k) - 1.0) > PSD_TOL:
            raise InvalidInputError(f"kernel trace is {np.trace(k)}, expected 1")
        if np.linalg.eigvalsh(k).min() < -PSD_TOL:
            raise InvalidInputError("kernel is not positive semidefinite")
        k.setflags(write=False)
        object.__setattr__(self, "entries", k)


@dataclass(frozen=True)
class CertaintyScore:
    value: float
    function_id: ScoreFunction
    k_samples: int


def _entropy_from_counts(counts) -> float:
    total = sum(counts)
    h = 0.0
    for c in counts:
        p = c / total
        h -= p * math.log(p)
    return h


def vanilla_entropy(answers: Sequence[str]) -> CertaintyScore:
    """Negative entropy of the empirical distribution of distinct answers.

    Answers are compared after :func:`certcal.dataset_io.canonicalize`.
    """
    from .dataset_io import canonicalize

    if len(answers) == 0:
        raise InvalidInputError("vanilla entropy needs at least one answer")
    counts = Counter(canonicalize(a) for a in answers)
    h = _entropy_from_counts(sorted(counts.values()))
    return CertaintyScore(-h if h > 0 else 0.0, ScoreFunction.VE, len(answers))


def exact_match_clusters(answers: Sequence[str]) -> list[int]:
    """Cluster answers by canonicalized exact match, in first-seen order.

    A crude stand-in for entailment-based semantic clustering.
    """
    from .dataset_io import canonicalize

    ids: dict[str, int] = {}
    return [ids.setdefault(canonicalize(a), len(ids)) for a in answers]


def semantic_entropy(samples: Sequence[AnswerSample]) -> CertaintyScore:
    """Negative semantic entropy over meaning clusters.

    Cluster probabilities are the within-cluster sums of ``exp(log_prob)``,
    renormalized over the sampled clusters; without log-probabilities they
    are cluster frequencies. The entropy is the Monte Carlo average of
    ``-ln p(cluster)`` over the k samples, so with frequency masses it equals
    the plug-in entropy of the cluster distribution.
    """
    if len(samples) == 0:
        raise InvalidInputError("semantic entropy needs at least one sample")
    if any(s.cluster_id is None for s in samples):
        raise InvalidInputError("clusters required: every sample needs a cluster_id")
    has_lp = [s.log_prob is not None for s in samples]
    if any(has_lp) and not all(has_lp):
        raise InvalidInputError("log_prob must be given for all samples or for none")

    counts = Counter(s.cluster_id for s in samples)
    if not any(has_lp):
        h = _entropy_from_counts(sorted(counts.values()))
        return CertaintyScore(-h if h > 0 else 0.0, ScoreFunction.SE, len(samples))

    # log-sum-exp per cluster, then renormalize in log space
    by_cluster: dict[int, list[float]] = {}
    for s in samples:
        by_cluster.setdefault(s.cluster_id, []).append(s.log_prob)
    log_mass = {}
    for cid, lps in by_cluster.items():
        top = max(lps)
        if top == -math.inf:
            raise InvalidInputError(f"cluster {cid} has zero total probability mass")
        log_mass[cid] = top + math.log(math.fsum(math.exp(lp - top) for lp in lps))
    top = max(log_mass.values())
    log_norm = top + math.log(math.fsum(math.exp(v - top) for v in log_mass.values()))
    k = len(samples)
    h = -math.fsum(counts[cid] * (log_mass[cid] - log_norm) for cid in counts) / k
    if len(counts) == 1:
        h = 0.0
    return CertaintyScore(-h, ScoreFunction.SE, k)


def normalize_kernel(raw) -> SemanticKernel:
    """Symmetrize, clip negative eigenvalues to zero and rescale to unit trace."""
    a = np.asarray(raw, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] == 0:
        raise InvalidInputError(f"kernel must be square, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise NumericError("kernel has non-finite entries")
    if not np.any(a):
        raise InvalidInputError("kernel is all zeros")
    peak = float(np.max(np.abs(a)))
    if np.max(np.abs(a - a.T)) > 1e-6 * max(1.0, peak):
        raise InvalidInputError("kernel is not symmetric")
    a = a / peak
    a = 0.5 * (a + a.T)
    w, v = np.linalg.eigh(a)
    if np.any(w < 0):
        w = np.clip(w, 0.0, None)
        a = (v * w) @ v.T
        a = 0.5 * (a + a.T)
    tr = np.trace(a)
    if not tr > 0:
        raise InvalidInputError("kernel has no positive spectrum to normalize")
    return SemanticKernel(a / tr)


def von_neumann_entropy(kernel: SemanticKernel) -> float:
    """``-Tr[K ln K]`` from the spectrum, treating eigenvalues below 1e-12 as 0."""
    k = kernel.entries if isinstance(kernel, SemanticKernel) else np.asarray(kernel, float)
    if not np.all(np.isfinite(k)):
        raise NumericError("kernel has non-finite entries")
    try:
        w = np.linalg.eigvalsh(k)
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"eigendecomposition failed: {exc}") from exc
    w = w[w >= EIG_FLOOR]
    h = -math.fsum(float(x) * math.log(float(x)) for x in w)
    return max(h, 0.0)


def kernel_language_entropy(kernel: SemanticKernel) -> CertaintyScore:
    h = von_neumann_entropy(kernel)
    return CertaintyScore(-h if h > 0 else 0.0, ScoreFunction.KLE, kernel.dim)


def score_record(record, function_id: "ScoreFunction | str") -> CertaintyScore:
    """Score a :class:`~certcal.dataset_io.QuestionRecord` with the chosen function."""
    fid = ScoreFunction.parse(function_id)
    if fid is ScoreFunction.VE:
        if not record.answers:
            raise InvalidInputError(f"record {record.id}: answers required for VE")
        return vanilla_entropy([a.text for a in record.answers])
    if fid is ScoreFunction.SE:
        if not record.answers or any(a.cluster_id is None for a in record.answers):
            raise InvalidInputError(f"record {record.id}: clusters required for SE")
        return semantic_entropy(record.answers)
    if record.kernel is None:
        raise InvalidInputError(f"record {record.id}: kernel required for KLE")
    return kernel_language_entropy(normalize_kernel(record.kernel))
