import numpy as np
import pytest

from cheatdetect.model import DataSet, ParameterState


def random_state(n, j, rng, xi=None, eta=None):
    """A valid parameter state with moderately spread values."""
    st = ParameterState.zeros(n, j)
    st.theta = rng.normal(0, 0.8, n)
    st.tau = rng.normal(0, 0.5, n)
    st.beta = rng.normal(-0.5, 0.8, j)
    st.alpha = rng.normal(0.3, 0.5, j)
    st.xi = (rng.random(n) < 0.4).astype(np.int8) if xi is None else np.asarray(xi, dtype=np.int8)
    st.eta = (rng.random(j) < 0.5).astype(np.int8) if eta is None else np.asarray(eta, dtype=np.int8)
    st.delta, st.gamma, st.kappa = 1.1, 0.7, 0.6
    st.pi1, st.pi2 = 0.3, 0.45
    st.mu = np.array([-0.4, 0.2])
    st.Sigma = np.array([[0.5, 0.1], [0.1, 0.4]])
    st.Omega = np.array([[0.7, 0.2], [0.2, 0.5]])
    return st


def random_data(n, j, rng, missing=0.0):
    y = (rng.random((n, j)) < 0.55).astype(np.int8)
    lt = rng.normal(0.2, 0.8, (n, j))
    mask = rng.random((n, j)) >= missing
    return DataSet(y, lt, mask)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


# one line per acceptance criterion, echoed at the end of the run
ACCEPTANCE_LINES = []


def record_criterion(number, ok, detail):
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'} ({detail})"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
