import numpy as np
import pytest
from scipy.interpolate import CubicSpline

from stavar.basis import (evaluate_basis, lag_design, make_basis, natural_spline_basis,
                          polynomial_basis)
from stavar.errors import InvalidConfig, RankDeficient

GRID = np.arange(1, 157)


def test_df2_on_short_grid_is_intercept_plus_increasing():
    b = natural_spline_basis(np.arange(1, 11), 2)
    X = b.eval_cache
    np.testing.assert_allclose(X[:, 0], 1.0)
    assert np.all(np.diff(X[:, 1]) > 0)


def test_df4_full_grid_rank():
    b = natural_spline_basis(GRID, 4)
    assert b.eval_cache.shape == (156, 4)
    assert np.linalg.matrix_rank(b.eval_cache) == 4


@pytest.mark.parametrize("kind,df", [("natural", 2), ("natural", 5), ("bspline", 6), ("polynomial", 3)])
def test_cache_matches_pointwise_evaluation(kind, df):
    b = make_basis(GRID, df, kind)
    for g in (0, 17, 77, 155):
        np.testing.assert_allclose(evaluate_basis(b, GRID[g]), b.eval_cache[g], atol=1e-13)
    np.testing.assert_allclose(b.evaluate(GRID), b.eval_cache, atol=1e-13)


def test_df3_matches_natural_interpolation_oracle():
    # any column is a natural cubic spline on (boundary, interior, boundary);
    # a natural interpolant through its knot values must reproduce it
    b = natural_spline_basis(GRID, 3)
    knots = np.array([b.boundary[0], *b.knots, b.boundary[1]])
    assert len(knots) == 3
    at_knots = b.evaluate(knots)
    want = b.evaluate(77.5)
    for k in range(3):
        oracle = CubicSpline(knots, at_knots[:, k], bc_type="natural")(77.5)
        assert abs(oracle - want[k]) <= 1e-10


@pytest.mark.parametrize("df", [3, 4, 6])
def test_matches_oracle_across_grid(df):
    b = natural_spline_basis(GRID, df)
    knots = np.array([b.boundary[0], *b.knots, b.boundary[1]])
    at_knots = b.evaluate(knots)
    t = np.linspace(1, 156, 41)
    for k in range(df):
        cs = CubicSpline(knots, at_knots[:, k], bc_type="natural")
        np.testing.assert_allclose(b.evaluate(t)[:, k], cs(t), atol=1e-9)


def test_linear_beyond_boundary():
    b = natural_spline_basis(GRID, 4)
    t = np.array([156.0, 160.0, 171.0, 190.0])
    V = b.evaluate(t)
    slopes = np.diff(V, axis=0) / np.diff(t)[:, None]
    np.testing.assert_allclose(slopes, np.broadcast_to(slopes[0], slopes.shape), atol=1e-12)
    # the extension continues the boundary slope
    h = 1e-4
    left = (b.evaluate(156.0) - b.evaluate(156.0 - h)) / h
    np.testing.assert_allclose(left, slopes[0], rtol=1e-3, atol=1e-6)
    V0 = b.evaluate(np.array([-10.0, -3.0, 1.0]))
    s0 = np.diff(V0, axis=0) / np.array([[7.0], [4.0]])
    np.testing.assert_allclose(s0[0], s0[1], atol=1e-12)


def test_grid_point_returns_cache_row():
    b = natural_spline_basis(GRID, 5)
    np.testing.assert_array_equal(b.evaluate(float(GRID[40])), b.eval_cache[40])


def test_invalid_requests():
    with pytest.raises(InvalidConfig):
        make_basis(GRID, 3, "fourier")
    with pytest.raises(InvalidConfig):
        natural_spline_basis(np.arange(3), 3)
    with pytest.raises(RankDeficient):
        polynomial_basis(np.array([1.0, 1.0, 1.0]), 2)


def test_polynomial_columns():
    b = polynomial_basis(GRID, 1)
    np.testing.assert_allclose(b.eval_cache[:, 0], 1.0)
    assert np.all(np.diff(b.eval_cache[:, 1]) > 0)


def test_lag_design_saturated_and_spline():
    lags = np.repeat(np.arange(4), 3)
    Z = lag_design(lags, 4)
    assert Z.shape == (12, 4) and np.linalg.matrix_rank(Z) == 4
    Z2 = lag_design(lags, 3)
    assert Z2.shape == (12, 3) and np.linalg.matrix_rank(Z2) == 3
    with pytest.raises(RankDeficient):
        lag_design(lags, 5)


def test_describe_is_serializable():
    import json
    d = natural_spline_basis(GRID, 3).describe()
    assert json.loads(json.dumps(d))["df"] == 3
