"""Kernel backend selection.

The compiled extension is used when importable; set ``CERTCAL_PURE_PYTHON=1``
to force the pure-Python fallback.
"""

import os

from . import _kernels_py

if os.environ.get("CERTCAL_PURE_PYTHON", "") not in ("", "0"):
    _impl = _kernels_py
    BACKEND = "python"
else:
    try:
        from . import _kernels_c as _impl
        BACKEND = "cython"
    except ImportError:
        _impl = _kernels_py
        BACKEND = "python"

binomial_tail = _impl.binomial_tail
counter_uniforms = _impl.counter_uniforms

__all__ = ["BACKEND", "binomial_tail", "counter_uniforms"]
