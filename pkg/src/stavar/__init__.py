"""Counterfactual forecasting for staggered-adoption panels with a local-mean VAR(1)."""
from .als import AlsEstimate, ResidualCovariance, als_fit, residual_covariance, update_a_rows, update_beta_k
from .basis import BasisSet, evaluate_basis, make_basis, natural_spline_basis, polynomial_basis
from .estimands import (EffectDraws, EstimandSummary, HeteroModel, att_by_lag, cluster_effects,
                        cumulative_att, fit_hetero, individual_effects, psi_contrast, smooth_att)
from .gibbs import (CounterfactualDraws, PosteriorDraws, PriorSpec, conditional_mvn,
                    forecast_counterfactual, gibbs_run, sample_a_block, sample_beta_block)
from .panel import (NEVER, CovariateMatrix, NeighborGraph, PanelData, SparsityPattern,
                    build_sparsity, load_covariates, load_edges, load_panel)
from .pipeline import PipelineConfig, PipelineResult, run_pipeline
from .precision import PrecisionEstimate, covariance_select, kkt_residual

__version__ = "0.1.0"

__all__ = [
    "AlsEstimate", "ResidualCovariance", "als_fit", "residual_covariance", "update_a_rows",
    "update_beta_k", "BasisSet", "evaluate_basis", "make_basis", "natural_spline_basis",
    "polynomial_basis", "EffectDraws", "EstimandSummary", "HeteroModel", "att_by_lag",
    "cluster_effects", "cumulative_att", "fit_hetero", "individual_effects", "psi_contrast",
    "smooth_att", "CounterfactualDraws", "PosteriorDraws", "PriorSpec", "conditional_mvn",
    "forecast_counterfactual", "gibbs_run", "sample_a_block", "sample_beta_block", "NEVER",
    "CovariateMatrix", "NeighborGraph", "PanelData", "SparsityPattern", "build_sparsity",
    "load_covariates", "load_edges", "load_panel", "PipelineConfig", "PipelineResult",
    "run_pipeline", "PrecisionEstimate", "covariance_select", "kkt_residual",
]
