import math
import os
from fractions import Fraction

import numpy as np
import pytest

from certcal import _kernels, _kernels_py

from .conftest import _kernels_c


def exact_tail(n0, alpha):
    a = Fraction(alpha)
    return [
        float(sum(math.comb(n0, j) * (1 - a) ** j * a ** (n0 - j) for j in range(k, n0 + 1)))
        for k in range(1, n0 + 2)
    ]


@pytest.mark.parametrize("n0", [0, 1, 2, 7, 30])
@pytest.mark.parametrize("alpha", [0.05, 0.1, 0.25, 0.5, 0.9])
def test_tail_matches_exact(kernels, n0, alpha):
    got = kernels.binomial_tail(n0, alpha)
    assert got.shape == (n0 + 1,)
    np.testing.assert_allclose(got, exact_tail(n0, alpha), rtol=0, atol=1e-13)


def test_tail_large_n0_against_beta(kernels):
    from scipy.special import betainc

    n0, alpha = 5000, 0.05
    v = kernels.binomial_tail(n0, alpha)
    k = np.arange(1, n0 + 1)
    np.testing.assert_allclose(v[:-1], betainc(k, n0 - k + 1, 1 - alpha), atol=1e-12)
    assert v[-1] == 0.0
    assert np.all(np.diff(v) <= 0)


@pytest.mark.skipif(_kernels_c is None, reason="compiled kernels not built")
@pytest.mark.parametrize("n0", [0, 1, 50, 1000, 20000])
@pytest.mark.parametrize("alpha", [0.01, 0.05, 0.3, 0.99])
def test_backends_bit_identical_tail(n0, alpha):
    assert np.array_equal(_kernels_py.binomial_tail(n0, alpha), _kernels_c.binomial_tail(n0, alpha))


@pytest.mark.skipif(_kernels_c is None, reason="compiled kernels not built")
@pytest.mark.parametrize("seed", [0, 1, 42, 2**63 + 5, 2**64 - 1])
def test_backends_bit_identical_uniforms(seed):
    idx = np.arange(50_000, dtype=np.int64)
    assert np.array_equal(_kernels_py.counter_uniforms(seed, idx), _kernels_c.counter_uniforms(seed, idx))


def test_uniforms_in_half_open_unit_interval(kernels):
    u = kernels.counter_uniforms(123, np.arange(200_000, dtype=np.int64))
    assert u.min() > 0.0 and u.max() <= 1.0
    assert abs(u.mean() - 0.5) < 0.005
    # counts per decile are roughly flat
    counts = np.histogram(u, bins=10, range=(0, 1))[0]
    assert counts.min() > 19_000 and counts.max() < 21_000


def test_uniforms_keyed_by_index_not_position(kernels):
    idx = np.arange(1000, dtype=np.int64)
    full = kernels.counter_uniforms(9, idx)
    sub = kernels.counter_uniforms(9, idx[500:])
    assert np.array_equal(full[500:], sub)
    assert not np.array_equal(full, kernels.counter_uniforms(10, idx))


def test_backend_selected():
    forced = os.environ.get("CERTCAL_PURE_PYTHON", "") not in ("", "0")
    if forced or _kernels_c is None:
        assert _kernels.BACKEND == "python"
    else:
        assert _kernels.BACKEND == "cython"
