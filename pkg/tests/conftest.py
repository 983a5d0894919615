import numpy as np
import pytest

from few.qops import PAULI
from few.states import bell_state
from few.witness import TracelessObservable, normalize

I2, X, Y, Z = PAULI


@pytest.fixture
def zz_half():
    tau = np.zeros((4, 4))
    tau[3, 3] = 0.5
    return TracelessObservable(tau, (2, 2))


@pytest.fixture
def z_local():
    tau = np.zeros((4, 4))
    tau[3, 0] = 0.5
    return TracelessObservable(tau, (2, 2))


@pytest.fixture
def z_bell():
    """normalize(I/4 - |psi00><psi00|)."""
    return normalize(TracelessObservable.from_matrix(np.eye(4) / 4 - bell_state(0, 0).matrix, (2, 2)))


def random_unit_tau(rng, dims):
    shape = tuple(d * d for d in dims)
    tau = rng.normal(size=shape)
    tau.flat[0] = 0.0
    return normalize(TracelessObservable(tau, dims))


_ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture
def record(request):
    """Log one summary line per acceptance criterion; printed after the run."""
    lines = request.config.stash.setdefault(_ACCEPTANCE, [])

    def _record(criterion: str, ok: bool, detail: str) -> bool:
        lines.append(f"{'PASS' if ok else 'FAIL'}  criterion {criterion}: {detail}")
        return ok

    return _record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
