"""Semiparametric Bayesian synthetic likelihood.

Gaussian-copula synthetic likelihoods with KDE or transformation-KDE
marginals, optional whitening with covariance shrinkage, pseudo-marginal
MCMC, and the simulators and metrics used to evaluate them.
"""

__version__ = "0.1.0"

from .copula import copula_logdensity, grc, to_quantiles
from .corestats import KdeModel, SummarySample, mvn_logpdf, silverman_bandwidth
from .marginals import MarginalSpec
from .mcmc import Chain, ChainConfig, Prior, run_chain, tune_n
from .metrics import GridDensity, posterior_tv, density_benchmark, tv_distance
from .models import make_model
from .rng import SeedTree, derive_stream
from .synlik import (
    EstimatorConfig,
    LogLikEstimate,
    estimate_loglik,
    gaussian_loglik,
    semibsl_loglik,
    wsemibsl_loglik,
)
from .tkde import TkdeModel, Variant, fit_hpt, tkde_fit
from .whitening import WhiteningContext, estimate_whitening, warton_shrink, whiten_quantiles

__all__ = [
    "Chain", "ChainConfig", "EstimatorConfig", "GridDensity", "KdeModel", "LogLikEstimate", "MarginalSpec",
    "Prior", "SeedTree", "SummarySample", "TkdeModel", "Variant", "WhiteningContext", "copula_logdensity",
    "derive_stream", "estimate_loglik", "estimate_whitening", "fit_hpt", "gaussian_loglik", "grc",
    "make_model", "mvn_logpdf", "posterior_tv", "run_chain", "semibsl_loglik", "silverman_bandwidth",
    "density_benchmark", "tkde_fit", "to_quantiles", "tune_n", "tv_distance", "warton_shrink",
    "whiten_quantiles", "wsemibsl_loglik",
]
