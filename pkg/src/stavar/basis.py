"""Basis functions for the unit-specific trends ``f_i(t) = sum_k beta_ik phi_k(t)``.

Every basis starts with an intercept column.  Inputs are mapped to
``x = (t - lo) / (hi - lo)`` before evaluation so that columns stay O(1)
on long grids.

The natural cubic spline uses the truncated-power construction
(Hastie, Tibshirani & Friedman, 2009, eq. 5.4-5.5): with knots
``xi_1 < ... < xi_M`` (boundary knots included),

    N_1 = 1,  N_2 = x,  N_{k+2} = d_k - d_{M-1},
    d_k(x) = ((x - xi_k)_+^3 - (x - xi_M)_+^3) / (xi_M - xi_k).

Each column is linear beyond both boundary knots, which is what makes
forecasts past the end of the grid well behaved.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import BSpline

from .errors import InvalidConfig, RankDeficient

KINDS = ("natural", "polynomial", "bspline")


@dataclass(frozen=True, eq=False)
class BasisSet:
    kind: str
    df: int
    knots: tuple          # interior knots, in time units
    boundary: tuple       # (lo, hi), in time units
    grid: np.ndarray
    eval_cache: np.ndarray

    def evaluate(self, t) -> np.ndarray:
        """Basis values at ``t`` (scalar or 1-d array); shape ``(..., K)``."""
        t = np.asarray(t, dtype=float)
        out = _design(self.kind, self.df, self.knots, self.boundary, np.atleast_1d(t))
        return out[0] if t.ndim == 0 else out

    def describe(self) -> dict:
        return {"kind": self.kind, "df": self.df,
                "knots": [float(k) for k in self.knots],
                "boundary": [float(b) for b in self.boundary]}


def evaluate_basis(basis: BasisSet, t: float) -> np.ndarray:
    return basis.evaluate(t)


def _scale(t, boundary):
    lo, hi = boundary
    return (np.asarray(t, dtype=float) - lo) / (hi - lo)


def _natural_columns(x, knots01):
    xi = np.asarray(knots01, dtype=float)
    M = len(xi)

    def d(k):
        return (np.clip(x - xi[k], 0, None) ** 3
                - np.clip(x - xi[M - 1], 0, None) ** 3) / (xi[M - 1] - xi[k])

    cols = [np.ones_like(x), x]
    last = d(M - 2)
    for k in range(M - 2):
        cols.append(d(k) - last)
    return np.column_stack(cols)


def _bspline_columns(x, interior01, df):
    kts = np.r_[[0.0] * 4, interior01, [1.0] * 4]
    nb = len(kts) - 4
    cols = np.empty((len(x), nb))
    for j in range(nb):
        c = np.zeros(nb)
        c[j] = 1.0
        cols[:, j] = BSpline(kts, c, 3, extrapolate=True)(x)
    # B-splines sum to one; drop the first so the intercept stays separate
    return np.column_stack([np.ones_like(x), cols[:, 1:]])[:, :df]


def _design(kind, df, knots, boundary, t):
    x = _scale(t, boundary)
    inner = _scale(np.asarray(knots, dtype=float), boundary) if len(knots) else np.empty(0)
    if kind == "natural":
        return _natural_columns(x, np.r_[0.0, inner, 1.0])
    if kind == "polynomial":
        return np.column_stack([x ** d for d in range(df)])
    if kind == "bspline":
        return _bspline_columns(x, inner, df)
    raise InvalidConfig(f"unknown basis kind {kind!r}; expected one of {KINDS}")


def _interior_knots(grid, m):
    if m <= 0:
        return ()
    probs = np.linspace(0, 1, m + 2)[1:-1]
    return tuple(float(v) for v in np.quantile(grid, probs))


def make_basis(time_grid, df: int, kind: str = "natural") -> BasisSet:
    """Build a basis of ``df`` columns (intercept included) on ``time_grid``."""
    grid = np.asarray(time_grid, dtype=float)
    if grid.ndim != 1 or len(grid) < 2:
        raise InvalidConfig("time grid must be 1-d with at least two points")
    if df < 1:
        raise InvalidConfig("df must be >= 1")
    if kind == "natural":
        if df < 2:
            raise InvalidConfig("natural spline basis needs df >= 2")
        knots = _interior_knots(grid, df - 2)
    elif kind == "bspline":
        if df < 4:
            raise InvalidConfig("cubic B-spline basis needs df >= 4")
        knots = _interior_knots(grid, df - 4)
    elif kind == "polynomial":
        knots = ()
    else:
        raise InvalidConfig(f"unknown basis kind {kind!r}; expected one of {KINDS}")
    boundary = (float(grid.min()), float(grid.max()))
    if boundary[0] == boundary[1]:
        raise RankDeficient("time grid has a single distinct value")
    X = _design(kind, df, knots, boundary, grid)
    rank = np.linalg.matrix_rank(X)
    if rank < df:
        raise RankDeficient(f"{kind} basis with df={df} has rank {rank} on this grid")
    X.setflags(write=False)
    grid.setflags(write=False)
    return BasisSet(kind, int(df), knots, boundary, grid, X)


def natural_spline_basis(time_grid, df: int) -> BasisSet:
    """Intercept plus ``df - 1`` natural cubic spline columns.

    Interior knots sit at equally spaced quantiles of the grid and the
    boundary knots at its ends.

    Raises
    ------
    RankDeficient
        If the evaluated matrix has rank below ``df``.
    """
    if len(np.asarray(time_grid)) < df + 1:
        raise InvalidConfig("time grid must have at least df + 1 points")
    return make_basis(time_grid, df, "natural")


def polynomial_basis(time_grid, degree: int = 1) -> BasisSet:
    return make_basis(time_grid, degree + 1, "polynomial")


def lag_design(lags, df: int) -> np.ndarray:
    """Design matrix in the lag since adoption, intercept included.

    With ``df`` at least the number of distinct lags the design is
    saturated, and indicator coding is used; its column space equals that
    of any full-rank spline.  Otherwise a natural spline on the observed lag
    range is used.
    """
    lags = np.asarray(lags)
    levels = np.unique(lags)
    if df >= len(levels):
        if df > len(levels):
            raise RankDeficient(
                f"lag design with df={df} exceeds the {len(levels)} distinct lags")
        onehot = (lags[:, None] == levels[None, :]).astype(float)
        return np.column_stack([np.ones(len(lags)), onehot[:, 1:]])
    basis = make_basis(levels, df, "natural" if df >= 2 else "polynomial")
    return basis.evaluate(lags.astype(float))
