# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels. Must stay operation-for-operation identical to ``_kernels_py``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport log, log1p, exp

cnp.import_array()

cdef unsigned long long GOLDEN = 0x9E3779B97F4A7C15ULL
cdef unsigned long long MIX1 = 0xBF58476D1CE4E5B9ULL
cdef unsigned long long MIX2 = 0x94D049BB133111EBULL
cdef double TWO_M53 = 1.0 / 9007199254740992.0


def binomial_tail(long n0, double alpha):
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.zeros(n0 + 1, dtype=np.float64)
    if n0 == 0:
        return out
    cdef cnp.ndarray[cnp.float64_t, ndim=1] logt = np.empty(n0 + 1, dtype=np.float64)
    cdef double log_odds = log1p(-alpha) - log(alpha)
    cdef double peak, s, c, y, t, scale
    cdef long j
    logt[0] = n0 * log(alpha)
    peak = logt[0]
    for j in range(n0):
        logt[j + 1] = logt[j] + log(<double>(n0 - j) / <double>(j + 1)) + log_odds
        if logt[j + 1] > peak:
            peak = logt[j + 1]
    scale = exp(peak)
    s = 0.0
    c = 0.0
    for j in range(n0, 0, -1):
        y = exp(logt[j] - peak) - c
        t = s + y
        c = (t - s) - y
        s = t
        y = s * scale
        if y > 1.0:
            y = 1.0
        if y < out[j]:
            y = out[j]
        out[j - 1] = y
    return out


def counter_uniforms(unsigned long long seed, cnp.int64_t[::1] index):
    cdef Py_ssize_t n = index.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(n, dtype=np.float64)
    cdef unsigned long long z
    cdef Py_ssize_t i
    for i in range(n):
        z = seed + (<unsigned long long>index[i] + 1ULL) * GOLDEN
        z = (z ^ (z >> 30)) * MIX1
        z = (z ^ (z >> 27)) * MIX2
        z = z ^ (z >> 31)
        out[i] = (<double>((z >> 11) + 1ULL)) * TWO_M53
    return out
