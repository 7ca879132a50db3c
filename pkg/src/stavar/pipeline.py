"""End-to-end fit: ALS -> residual covariance -> covariance selection -> Gibbs -> forecast."""
from __future__ import annotations

import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .als import AlsEstimate, ResidualCovariance, als_fit, residual_covariance
from .basis import BasisSet, make_basis
from .errors import InsufficientPreperiod, InvalidConfig
from .estimands import EffectDraws, individual_effects
from .gibbs import CounterfactualDraws, PosteriorDraws, PriorSpec, forecast_counterfactual, gibbs_run
from .panel import NeighborGraph, PanelData, SparsityPattern, build_sparsity
from .precision import PrecisionEstimate, covariance_select


@dataclass(frozen=True)
class PipelineConfig:
    basis_kind: str = "natural"
    basis_df: int = 3
    adoption_gap: float = 12
    beta_variance: float = 1e6
    a_variance: float = 1e6
    iters: int = 4000
    burnin: int = 2000
    thin: int = 1
    als_tol: float = 1e-6
    als_max_iters: int = 500
    precision_tol: float = 1e-7

    def __post_init__(self):
        if self.basis_df < 1:
            raise InvalidConfig("basis_df must be >= 1")
        if self.adoption_gap < 0:
            raise InvalidConfig("adoption_gap must be >= 0")
        if self.iters <= self.burnin:
            raise InvalidConfig("iters must exceed burnin")
        if self.thin < 1:
            raise InvalidConfig("thin must be >= 1")
        PriorSpec(self.beta_variance, self.a_variance)

    @property
    def prior(self) -> PriorSpec:
        return PriorSpec(self.beta_variance, self.a_variance)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(eq=False)
class PipelineResult:
    basis: BasisSet
    pattern: SparsityPattern
    als: AlsEstimate
    residual_cov: ResidualCovariance
    precision: PrecisionEstimate
    draws: PosteriorDraws
    counterfactual: CounterfactualDraws
    effects: EffectDraws
    timings: dict = field(default_factory=dict)


def fit_basis(panel: PanelData, config: PipelineConfig) -> BasisSet:
    basis = make_basis(panel.times, config.basis_df, config.basis_kind)
    shortest = int(panel.adopt_pos[panel.treated].min())
    if config.basis_df >= shortest:
        raise InsufficientPreperiod(
            f"basis with K={config.basis_df} needs more than {shortest} pre-treatment points")
    return basis


def run_pipeline(panel: PanelData, structure, config: PipelineConfig = PipelineConfig(),
                 seed=0) -> PipelineResult:
    """Fit the model and forecast counterfactuals.

    ``structure`` is either a :class:`NeighborGraph` (masks built with
    ``config.adoption_gap``) or a ready :class:`SparsityPattern`.  ``seed``
    may be an int or a ``SeedSequence``; the Gibbs chain and the forecast
    get independent child streams.
    """
    clock = {}
    t0 = time.perf_counter()
    if isinstance(structure, NeighborGraph):
        pattern = build_sparsity(panel, structure, config.adoption_gap)
    else:
        pattern = structure
    basis = fit_basis(panel, config)
    est = als_fit(panel, basis, pattern, config.als_tol, config.als_max_iters)
    scov = residual_covariance(panel, basis, est)
    clock["als"] = time.perf_counter() - t0
    prec = covariance_select(scov, pattern, config.precision_tol, jitter=scov.dof < panel.n)
    clock["precision"] = time.perf_counter() - t0 - clock["als"]
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    chain_ss, fc_ss = ss.spawn(2)
    chain_seed = int(chain_ss.generate_state(1)[0])
    draws = gibbs_run(panel, basis, pattern, prec, config.prior, est,
                      config.iters, config.burnin, config.thin, chain_seed)
    clock["gibbs"] = time.perf_counter() - t0 - clock["als"] - clock["precision"]
    cf = forecast_counterfactual(draws, panel, basis, prec, np.random.default_rng(fc_ss))
    effects = individual_effects(cf, panel)
    clock["total"] = time.perf_counter() - t0
    return PipelineResult(basis, pattern, est, scov, prec, draws, cf, effects, clock)
