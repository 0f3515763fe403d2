import numpy as np
import pytest

from eden_sim import _accel

BACKENDS = ["numpy"] + (["numba"] if _accel.HAVE_NUMBA else [])


@pytest.fixture(params=BACKENDS)
def backend(request):
    """Run the test once per available kernel backend."""
    prev = _accel.set_backend(request.param)
    yield request.param
    _accel.set_backend(prev)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_ACCEPTANCE = pytest.StashKey[dict]()


def pytest_configure(config):
    config.stash[_ACCEPTANCE] = {}


@pytest.fixture
def acceptance(request):
    """Record ``(criterion, passed, detail)`` for the end-of-run summary."""
    store = request.config.stash[_ACCEPTANCE]

    def record(n, passed, detail):
        store[n] = (bool(passed), detail)
        return passed

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    store = config.stash.get(_ACCEPTANCE, {})
    if not store:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for n in sorted(store):
        passed, detail = store[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if passed else 'FAIL'} ({detail})")
