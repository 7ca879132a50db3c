import numpy as np
import pytest

from stavar.basis import make_basis
from stavar.model import simulate_var
from stavar.panel import NEVER, PanelData, SparsityPattern


def model_panel(rng, n=3, T=20, K=2, A=None, Sigma=None, adopt=None, beta=None, burn=50):
    """Panel drawn from the local-mean VAR(1) with a natural-spline trend."""
    times = np.arange(1, T + 1)
    basis = make_basis(times, K, "natural" if K >= 2 else "polynomial")
    if beta is None:
        beta = rng.normal(0, 2, (K, n))
        beta[0] += 50
    A = np.zeros((n, n)) if A is None else np.asarray(A, float)
    Sigma = np.eye(n) if Sigma is None else np.asarray(Sigma, float)
    Y = simulate_var(basis.eval_cache @ beta, A, Sigma, rng, burn=burn)
    if adopt is None:
        adopt = [NEVER] * n
    ids = tuple(f"u{i}" for i in range(n))
    return PanelData(ids, times, Y.T, adopt), basis, beta


def full_pattern(n, a_mask=None, omega_mask=None):
    a = np.ones((n, n), bool) if a_mask is None else a_mask
    om = np.ones((n, n), bool) if omega_mask is None else omega_mask
    return SparsityPattern(a, om)


def random_spd(rng, n, ridge=0.5):
    M = rng.standard_normal((n, n))
    return M @ M.T / n + ridge * np.eye(n)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# PASS/FAIL lines from the acceptance gate, echoed in the terminal summary
ACCEPTANCE_LINES: list = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
