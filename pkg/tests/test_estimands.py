import numpy as np
import pytest

from stavar.errors import EmptyCluster, InvalidConfig, NoUnitsAtLag, RankDeficientDesign
from stavar.estimands import (EffectDraws, HeteroModel, att_by_lag, att_draws, cluster_effects,
                              cumulative_att, cumulative_att_draws, fit_hetero, individual_effects,
                              kmeans_labels, psi_contrast, psi_contrast_draws, smooth_att,
                              smooth_att_draws, summarize)
from stavar.gibbs import CounterfactualDraws
from stavar.panel import NEVER, PanelData


def effects_from(delta):
    """EffectDraws for a balanced ``(B, n, Q)`` array."""
    delta = np.asarray(delta, dtype=float)
    return EffectDraws(delta, np.full(delta.shape[1], delta.shape[2] - 1))


def test_counterfactual_equal_to_observed_gives_zero():
    rng = np.random.default_rng(0)
    Y = rng.normal(size=(3, 10))
    panel = PanelData(["a", "b", "c"], np.arange(1, 11), Y, [6, 8, NEVER])
    cf = CounterfactualDraws(np.broadcast_to(Y[:, 5:], (4, 3, 5)).copy(), 6, np.arange(6, 11))
    eff = individual_effects(cf, panel)
    assert eff.delta.shape == (4, 3, 5)
    np.testing.assert_array_equal(eff.delta[:, 0, :5], 0.0)
    np.testing.assert_array_equal(eff.delta[:, 1, :3], 0.0)
    assert np.isnan(eff.delta[:, 1, 3:]).all() and np.isnan(eff.delta[:, 2]).all()
    assert eff.max_lag.tolist() == [4, 2, -1]


def test_single_cell_arithmetic():
    Y = np.array([[1.0, 1.0, 10.0], [0.0, 0.0, 0.0]])
    panel = PanelData(["a", "b"], [1, 2, 3], Y, [3, NEVER])
    cf = CounterfactualDraws(np.array([[[7.0], [0.0]]]), 3, np.array([3]))
    eff = individual_effects(cf, panel)
    assert eff.delta[0, 0, 0] == 3.0
    assert att_by_lag(eff, 0).point == 3.0


def test_summaries():
    s = att_by_lag(effects_from(np.zeros((50, 4, 3))), 1)
    assert s.point == 0.0 and s.lower <= 0.0 <= s.upper and s.n_units == 4
    d = np.zeros((30, 2, 1))
    d[:, 0], d[:, 1] = 2.0, 4.0
    s = att_by_lag(effects_from(d), 0)
    assert s.point == 3.0 and s.upper - s.lower == 0.0
    with pytest.raises(InvalidConfig):
        summarize(np.zeros(3), 1, level=1.5)


def test_cumulative_sum_of_constant_lags():
    d = np.broadcast_to(np.array([5.0, 10.0, 20.0]), (8, 3, 3)).copy()
    eff = effects_from(d)
    assert np.all(cumulative_att_draws(eff, 2) == 35.0)
    assert cumulative_att(eff, 0) == att_by_lag(eff, 0)


def test_cumulative_identity_unbalanced():
    rng = np.random.default_rng(3)
    delta = rng.normal(size=(20, 5, 6))
    max_lag = np.array([5, 3, 1, 5, -1])
    for i, m in enumerate(max_lag):
        delta[:, i, m + 1:] = np.nan
    eff = EffectDraws(delta, max_lag)
    for q in range(6):
        want = sum(att_draws(eff, l) for l in range(q + 1))
        np.testing.assert_allclose(cumulative_att_draws(eff, q), want, atol=1e-12, rtol=0)
    with pytest.raises(NoUnitsAtLag):
        att_draws(eff, 6)


def test_hetero_constant_surface():
    rng = np.random.default_rng(1)
    X = rng.normal(size=(12, 3))
    eff = effects_from(np.full((5, 12, 3), 2.0))
    m = fit_hetero(eff, X, spline_df=3, lag_window=2)
    np.testing.assert_allclose(m.coef[:, 0], 2.0, atol=1e-10)
    np.testing.assert_allclose(m.coef[:, 1:], 0.0, atol=1e-10)


def test_hetero_exact_linear_recovery():
    rng = np.random.default_rng(2)
    X = rng.normal(size=(15, 2))
    delta = np.broadcast_to((3 * X[:, 0])[None, :, None], (4, 15, 3)).copy()
    m = fit_hetero(effects_from(delta), X, spline_df=3, lag_window=2)
    np.testing.assert_allclose(m.beta_x[:, 0], 3.0, atol=1e-8)
    np.testing.assert_allclose(m.beta_x[:, 1], 0.0, atol=1e-8)


def test_hetero_rank_deficiency():
    X = np.ones((6, 1))
    with pytest.raises(RankDeficientDesign):
        fit_hetero(effects_from(np.zeros((2, 6, 3))), X)


def test_hetero_spline_lag_terms():
    rng = np.random.default_rng(4)
    X = rng.normal(size=(10, 2))
    lag_effect = np.array([1.0, 4.0, 2.0, 0.5, 0.0, -1.0, 0.3, 2.0, 1.0, 0.0])
    delta = np.broadcast_to(lag_effect[None, None, :], (3, 10, 10)).copy()
    m = fit_hetero(effects_from(delta), X, spline_df=3, lag_window=9)
    assert m.n_lag_cols == 3
    m2 = fit_hetero(effects_from(delta), X, spline_df=3, lag_window=2)
    # saturated: lag means are reproduced exactly
    for l in range(3):
        np.testing.assert_allclose(m2.predict(X.mean(0), l)[:, 0], lag_effect[l], atol=1e-10)


def _linear_model(bj, p=2, B=3, window=2):
    coef = np.zeros((B, 1 + p))
    coef[:, 1 + 0] = bj
    return HeteroModel(coef, 0, window, np.zeros((window + 1, 0)))


def test_psi_contrast_closed_forms():
    X = np.column_stack([np.arange(5.0), np.linspace(-1, 1, 5)])
    assert np.all(psi_contrast_draws(_linear_model(0.0), X, 0, 2) == 0.0)
    # quartiles of 0..4 are 1 and 3
    np.testing.assert_allclose(psi_contrast_draws(_linear_model(1.0), X, 0, 2), 6.0, atol=1e-12)
    s = psi_contrast(_linear_model(1.0), X, 0, 0)
    assert s.point == pytest.approx(2.0) and s.n_units == 5


def test_psi_recovers_injected_surface():
    rng = np.random.default_rng(5)
    X = rng.normal(size=(30, 2))
    truth = 5 + 2 * X[:, 0]
    delta = truth[None, :, None] + rng.normal(0, 0.3, (200, 30, 3))
    m = fit_hetero(effects_from(delta), X, 3, 2)
    iqr = np.subtract(*np.quantile(X[:, 0], [0.75, 0.25]))
    s = psi_contrast(m, X, 0, 0)
    assert s.lower <= 2 * iqr <= s.upper


def test_smooth_constant_and_saturated():
    rng = np.random.default_rng(6)
    eff = effects_from(np.full((4, 6, 10), 1.7))
    np.testing.assert_allclose(smooth_att_draws(eff, 4, 9), 1.7, atol=1e-12)
    delta = rng.normal(size=(4, 6, 10))
    delta[:, 4, 6:] = np.nan
    uneven = EffectDraws(delta, np.array([9, 9, 9, 9, 5, 9]))
    sm = smooth_att_draws(uneven, 10, 9)
    for q in range(10):
        np.testing.assert_allclose(sm[:, q], att_draws(uneven, q), atol=1e-8)
    rows = smooth_att(uneven, 3, 9)
    assert len(rows) == 10 and rows[6].n_units == 5


def test_kmeans_identical_rows_single_cluster():
    X = np.ones((7, 3))
    assert kmeans_labels(X, 1).tolist() == [0] * 7
    with pytest.raises(InvalidConfig):
        kmeans_labels(X, 8)
    with pytest.raises(EmptyCluster):
        kmeans_labels(X, 3)


def test_single_cluster_equals_cumulative_att():
    rng = np.random.default_rng(7)
    X = rng.normal(size=(20, 2))
    delta = rng.normal(size=(15, 20, 3)) + X[None, :, :1]
    eff = effects_from(delta)
    m = fit_hetero(eff, X, 3, 2)
    (c,) = cluster_effects(m, X, k=1, q=2)
    assert c.n_units == 20
    want = cumulative_att(eff, 2)
    assert c.effect.point == pytest.approx(want.point, abs=1e-10)


def test_blob_clusters_are_sign_separated():
    rng = np.random.default_rng(8)
    X = np.vstack([rng.normal(-5, 0.3, (10, 2)), rng.normal(5, 0.3, (10, 2))])
    truth = np.where(X[:, 0] < 0, -10.0, 10.0)
    delta = truth[None, :, None] + rng.normal(0, 0.5, (100, 20, 3))
    m = fit_hetero(effects_from(delta), X, 3, 2)
    out = cluster_effects(m, X, k=2, q=0)
    signs = sorted(np.sign(c.effect.point) for c in out)
    assert signs == [-1.0, 1.0]
    for c in out:
        assert c.effect.upper < 0 or c.effect.lower > 0


def test_five_clusters_schema():
    rng = np.random.default_rng(9)
    X = rng.normal(size=(76, 9))
    m = fit_hetero(effects_from(rng.normal(size=(10, 76, 3))), X, 3, 2)
    out = cluster_effects(m, X, k=5, q=2)
    assert len(out) == 5 and sum(c.n_units for c in out) == 76
    assert all(len(c.profile) == 9 for c in out)
    assert [c.cluster for c in out] == [1, 2, 3, 4, 5]
