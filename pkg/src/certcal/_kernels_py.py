"""Pure-Python kernels, used when the compiled extension is unavailable.

Each function mirrors ``_kernels_c`` operation for operation so both
backends return bit-identical results.
"""

import math

import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_TWO_M53 = 1.0 / 9007199254740992.0


def binomial_tail(n0, alpha):
    """Upper tails ``P(Binomial(n0, 1 - alpha) >= k)`` for k = 1..n0+1.

    Terms come from a log-space ratio recursion; suffix sums use Kahan
    compensation. Entry ``k - 1`` holds the tail at ``k``; the last entry is 0.
    """
    out = np.zeros(n0 + 1, dtype=np.float64)
    if n0 == 0:
        return out
    log_odds = math.log1p(-alpha) - math.log(alpha)
    logt = [0.0] * (n0 + 1)
    logt[0] = n0 * math.log(alpha)
    peak = logt[0]
    for j in range(n0):
        logt[j + 1] = logt[j] + math.log(float(n0 - j) / float(j + 1)) + log_odds
        if logt[j + 1] > peak:
            peak = logt[j + 1]
    scale = math.exp(peak)
    s = 0.0
    c = 0.0
    for j in range(n0, 0, -1):
        y = math.exp(logt[j] - peak) - c
        t = s + y
        c = (t - s) - y
        s = t
        out[j - 1] = max(min(s * scale, 1.0), out[j])
    return out


def counter_uniforms(seed, index):
    """SplitMix64 outputs keyed by ``(seed, index)``, mapped to (0, 1]."""
    idx = np.ascontiguousarray(index, dtype=np.int64).astype(np.uint64)
    z = np.uint64(seed) + (idx + np.uint64(1)) * _GOLDEN
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    z = z ^ (z >> np.uint64(31))
    return ((z >> np.uint64(11)) + np.uint64(1)).astype(np.float64) * _TWO_M53
