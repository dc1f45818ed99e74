import numpy as np
import pytest

from certcal import _kernels_py

try:
    from certcal import _kernels_c
except ImportError:  # extension not built
    _kernels_c = None

BACKENDS = [pytest.param(_kernels_py, id="python")]
if _kernels_c is not None:
    BACKENDS.append(pytest.param(_kernels_c, id="cython"))


@pytest.fixture(params=BACKENDS)
def kernels(request):
    return request.param


@pytest.fixture
def rng():
    return np.random.default_rng(20241016)


def pytest_terminal_summary(terminalreporter):
    from . import test_acceptance

    if not test_acceptance.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in test_acceptance.RESULTS:
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
