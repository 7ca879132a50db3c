import numpy as np
import pytest

from conftest import random_spd
from stavar.errors import NoConverge, NotPD
from stavar.panel import SparsityPattern
from stavar.precision import PrecisionEstimate, covariance_select, kkt_residual


def newton_oracle(S, mask, iters=100):
    """Minimize tr(Omega S) - logdet(Omega) over symmetric Omega supported on ``mask``.

    Plain damped Newton in the free upper-triangular entries.
    """
    n = S.shape[0]
    free = [(i, j) for i in range(n) for j in range(i, n) if mask[i, j]]
    E = []
    for i, j in free:
        e = np.zeros((n, n))
        e[i, j] = e[j, i] = 1.0
        E.append(e)
    E = np.array(E)

    def f(om):
        try:
            L = np.linalg.cholesky(om)
        except np.linalg.LinAlgError:
            return np.inf
        return np.trace(om @ S) - 2 * np.log(np.diag(L)).sum()

    om = np.diag(1.0 / np.diag(S))
    for _ in range(iters):
        sig = np.linalg.inv(om)
        grad = np.einsum("aij,ji->a", E, S - sig)
        SE = np.einsum("ij,ajk->aik", sig, E)
        H = np.einsum("aij,bji->ab", SE, SE)
        step = np.linalg.solve(H, grad)
        if np.abs(step).max() < 1e-14:
            break
        d = np.einsum("a,aij->ij", step, E)
        t, base = 1.0, f(om)
        while f(om - t * d) > base - 0.25 * t * grad @ step and t > 1e-12:
            t /= 2
        om = om - t * d
    return om


def random_problem(rng, n=10, forbid=0.3):
    X = rng.standard_normal((3 * n, n)) @ random_spd(rng, n, 0.2)
    S = np.cov(X, rowvar=False)
    upper = np.triu(rng.random((n, n)) >= forbid, 1)
    mask = upper | upper.T | np.eye(n, dtype=bool)
    return S, mask


@pytest.mark.parametrize("seed", range(50))
def test_matches_newton_oracle(seed):
    S, mask = random_problem(np.random.default_rng(seed))
    est = covariance_select(S, mask)
    assert est.kkt_residual <= 1e-6
    assert np.all(est.omega[~mask] == 0.0)
    np.testing.assert_allclose(est.omega, newton_oracle(S, mask), atol=1e-5, rtol=0)


@pytest.mark.parametrize("seed", range(5))
def test_unconstrained_is_inverse(seed):
    rng = np.random.default_rng(seed)
    S = random_spd(rng, 10)
    est = covariance_select(S, np.ones((10, 10), bool))
    np.testing.assert_allclose(est.omega, np.linalg.inv(S), atol=1e-10, rtol=0)


def test_diagonal_mask():
    S = random_spd(np.random.default_rng(4), 6)
    est = covariance_select(S, np.eye(6, dtype=bool))
    np.testing.assert_allclose(est.omega, np.diag(1 / np.diag(S)), atol=1e-14)


def test_three_by_three_example():
    S = np.array([[2, 1, 0.5], [1, 2, 1], [0.5, 1, 2]])
    mask = np.ones((3, 3), bool)
    mask[0, 2] = mask[2, 0] = False
    est = covariance_select(S, SparsityPattern(np.eye(3, dtype=bool), mask))
    assert est.omega[0, 2] == 0.0
    np.testing.assert_allclose(est.omega, newton_oracle(S, mask), atol=1e-6)
    # allowed entries of the implied covariance match S
    np.testing.assert_allclose(est.sigma[mask], S[mask], atol=1e-7)
    assert kkt_residual(est.omega, S, mask) <= 1e-6


def test_kkt_residual_examples():
    S = random_spd(np.random.default_rng(2), 4)
    full = np.ones((4, 4), bool)
    assert kkt_residual(np.linalg.inv(S), S, full) < 1e-12
    mask = full.copy()
    mask[0, 3] = mask[3, 0] = False
    om = covariance_select(S, mask).omega.copy()
    om[0, 3] = om[3, 0] = 0.1
    assert kkt_residual(om, S, mask) >= 0.1


def test_not_pd_clique():
    S = np.array([[1.0, 2.0], [2.0, 1.0]])
    with pytest.raises(NotPD):
        covariance_select(S, np.ones((2, 2), bool))


def test_iteration_cap():
    S, mask = random_problem(np.random.default_rng(0))
    with pytest.raises(NoConverge):
        covariance_select(S, mask, tol=1e-15, max_iter=2)


def test_jitter_rescues_rank_deficient_s():
    rng = np.random.default_rng(7)
    X = rng.standard_normal((3, 5))
    S = X.T @ X / 3     # rank 3
    est = covariance_select(S, np.eye(5, dtype=bool) | np.eye(5, k=1, dtype=bool)
                            | np.eye(5, k=-1, dtype=bool), jitter=True)
    assert est.jitter > 0
    np.linalg.cholesky(est.omega)


def test_json_roundtrip():
    S, mask = random_problem(np.random.default_rng(3), n=5)
    est = covariance_select(S, mask)
    back = PrecisionEstimate.from_json(est.to_json(include_sigma=False))
    np.testing.assert_array_equal(back.omega, est.omega)
    np.testing.assert_allclose(back.sigma, est.sigma, atol=1e-10)
