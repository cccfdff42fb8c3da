"""Synthetic log-likelihood estimators and the simulate-then-estimate driver."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .copula import CorrelationError, copula_logdensity, grc, regularize_correlation, to_quantiles
from .corestats import (
    LOG_SQRT_2PI,
    DegenerateSampleError,
    NotPositiveDefiniteError,
    SummarySample,
    mvn_logpdf,
    sample_cov,
    sample_mean,
)
from .marginals import MarginalSpec, fit_marginals, warm_state
from .rng import SeedTree
from .tkde import PretransformDomainError
from .whitening import WhiteningContext, warton_shrink, warton_shrink_correlation, whiten_quantiles

SIM_BLOCK = 1000
KINDS = ("gaussian", "semiparametric", "whitened", "exact")

# Numerical failures that turn into a -inf estimate rather than a crash.
ESTIMATOR_FAILURES = (
    DegenerateSampleError,
    NotPositiveDefiniteError,
    CorrelationError,
    PretransformDomainError,
    LinAlgError,
    FloatingPointError,
    OverflowError,
)


@dataclass(frozen=True)
class EstimatorConfig:
    """Which estimator to run and at what simulation budget.

    ``dependence`` selects the semiparametric copula matrix: ``"grc"`` (Gaussian
    rank correlation) or ``"quantile_cov"`` (sample covariance of the simulated
    normal scores, the matrix a whitened estimator with ``gamma = 1`` targets).
    ``kind="exact"`` uses the model's closed-form likelihood and simulates nothing.
    """

    kind: str = "semiparametric"
    marginal: MarginalSpec = field(default_factory=MarginalSpec)
    n: int = 500
    gamma: float = 1.0
    whitening: WhiteningContext | None = None
    dependence: str = "grc"
    shrink_correlation: str = "pearson"
    warm_start: bool = True

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown estimator kind {self.kind!r}")
        if self.kind != "exact" and self.n < 3:
            raise ValueError("n must be at least 3")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("gamma must lie in [0, 1]")
        if self.kind == "whitened" and self.whitening is None:
            raise ValueError("whitened estimator requires a whitening context")
        if self.dependence not in ("grc", "quantile_cov"):
            raise ValueError(f"unknown dependence estimator {self.dependence!r}")
        if self.shrink_correlation not in ("pearson", "grc"):
            raise ValueError(f"unknown shrinkage correlation {self.shrink_correlation!r}")

    @property
    def label(self) -> str:
        if self.kind in ("gaussian", "exact"):
            return self.kind
        tag = "semibsl" if self.kind == "semiparametric" else f"wsemibsl(gamma={self.gamma:g})"
        return f"{tag}-{self.marginal.label}"


@dataclass
class LogLikEstimate:
    value: float
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        if math.isnan(self.value):
            self.diagnostics.setdefault("error", "nan estimate")
            self.value = -math.inf

    @property
    def ok(self) -> bool:
        return math.isfinite(self.value)


def _failed(exc: BaseException, **extra) -> LogLikEstimate:
    return LogLikEstimate(-math.inf, {"error": f"{type(exc).__name__}: {exc}", **extra})


def _as_sample(sample) -> SummarySample:
    return sample if isinstance(sample, SummarySample) else SummarySample(sample)


def gaussian_loglik(s_obs, sample) -> LogLikEstimate:
    """Plug-in Gaussian log density at ``s_obs``."""
    try:
        x = _as_sample(sample)
        return LogLikEstimate(mvn_logpdf(s_obs, sample_mean(x), sample_cov(x)))
    except ESTIMATOR_FAILURES as exc:
        return _failed(exc)


def _marginal_terms(s_obs, x: SummarySample, marginal: MarginalSpec, warm, diag):
    models = fit_marginals(x.values, s_obs, marginal, warm)
    logg = np.array([float(m.logpdf(s_obs[j])) for j, m in enumerate(models)])
    flags = [m.flags for m in models if getattr(m, "flags", None)]
    if flags and not all(f.get("hpt_converged", True) for f in flags):
        diag["hpt_unconverged"] = sum(not f.get("hpt_converged", True) for f in flags)
    diag["warm"] = warm_state(models)
    return models, logg


def semibsl_loglik(s_obs, sample, marginal: MarginalSpec | None = None, *, warm=None,
                   dependence: str = "grc") -> LogLikEstimate:
    """Gaussian-copula log-likelihood with nonparametric marginals."""
    marginal = marginal or MarginalSpec()
    diag: dict = {}
    try:
        s_obs = np.atleast_1d(np.asarray(s_obs, dtype=float))
        x = _as_sample(sample)
        models, logg = _marginal_terms(s_obs, x, marginal, warm, diag)
        if not np.all(np.isfinite(logg)):
            diag["error"] = "observed summary outside a marginal's support"
            return LogLikEstimate(-math.inf, diag)
        eta = to_quantiles(models, s_obs, diag)
        if x.d == 1:
            return LogLikEstimate(float(logg.sum()), diag)
        if dependence == "grc":
            r, fixed = regularize_correlation(grc(x))
            if fixed:
                diag["regularized"] = True
            value = copula_logdensity(eta, r)
        else:
            cov = sample_cov(to_quantiles(models, x.values))
            value = _gaussian_quadratic(eta, cov) + 0.5 * float(eta @ eta) + x.d * LOG_SQRT_2PI
        return LogLikEstimate(value + float(logg.sum()), diag)
    except ESTIMATOR_FAILURES as exc:
        return _failed(exc, **{k: v for k, v in diag.items() if k != "error"})


def _gaussian_quadratic(z, cov) -> float:
    """Zero-mean Gaussian log density of ``z`` under ``cov``."""
    try:
        c, low = cho_factor(cov, lower=True)
    except (LinAlgError, ValueError) as exc:
        raise NotPositiveDefiniteError("covariance not positive definite") from exc
    logdet = 2.0 * float(np.sum(np.log(np.diag(c))))
    return -0.5 * logdet - 0.5 * float(z @ cho_solve((c, low), z)) - z.size * LOG_SQRT_2PI


def wsemibsl_loglik(s_obs, sample, marginal: MarginalSpec | None, ctx: WhiteningContext,
                    gamma: float, *, warm=None, shrink_correlation: str = "pearson") -> LogLikEstimate:
    """Whitened semiparametric log-likelihood with Warton shrinkage.

    Returns ``-1/2 log det S - 1/2 e' S^-1 e + sum_j [log g_j - log phi(eta_j)]``
    where ``e = W eta`` and ``S`` is the shrunk covariance of the whitened
    simulated quantiles. With ``gamma = 1`` this differs from the
    quantile-covariance semiparametric estimator only by the constant
    ``d log sqrt(2 pi) - log|det W|``.
    """
    marginal = marginal or MarginalSpec()
    diag: dict = {}
    try:
        s_obs = np.atleast_1d(np.asarray(s_obs, dtype=float))
        x = _as_sample(sample)
        models, logg = _marginal_terms(s_obs, x, marginal, warm, diag)
        if not np.all(np.isfinite(logg)):
            diag["error"] = "observed summary outside a marginal's support"
            return LogLikEstimate(-math.inf, diag)
        eta = to_quantiles(models, s_obs, diag)
        eta_sim = to_quantiles(models, x.values)
        white_sim = whiten_quantiles(ctx, eta_sim)
        white_obs = whiten_quantiles(ctx, eta)
        cov = sample_cov(white_sim)
        if shrink_correlation == "grc":
            shrunk = warton_shrink_correlation(cov, grc(white_sim), gamma)
        else:
            shrunk = warton_shrink(cov, gamma)
        # _gaussian_quadratic carries -d log sqrt(2 pi); add it back, then
        # subtract sum_j log phi(eta_j)
        value = (_gaussian_quadratic(white_obs, shrunk) + x.d * LOG_SQRT_2PI
                 + float(logg.sum()) + 0.5 * float(eta @ eta) + x.d * LOG_SQRT_2PI)
        return LogLikEstimate(value, diag)
    except ESTIMATOR_FAILURES as exc:
        return _failed(exc, **{k: v for k, v in diag.items() if k != "error"})


def as_seed_tree(rng) -> SeedTree:
    if isinstance(rng, SeedTree):
        return rng
    if isinstance(rng, (int, np.integer)):
        return SeedTree(int(rng))
    raise TypeError("expected a SeedTree or an integer seed")


def simulate_summaries(model, theta, n: int, rng, workers: int = 1) -> np.ndarray:
    """``n`` summary vectors, simulated in fixed blocks with one stream per block.

    Block boundaries and streams depend only on ``n``, so the result is the
    same for every worker count.
    """
    tree = as_seed_tree(rng)
    sizes = [min(SIM_BLOCK, n - start) for start in range(0, n, SIM_BLOCK)]

    def block(i):
        return model.simulate_summaries(theta, sizes[i], tree.derive(i).generator())

    if workers > 1 and len(sizes) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(block, range(len(sizes))))
    else:
        parts = [block(i) for i in range(len(sizes))]
    return np.concatenate(parts, axis=0)


def estimate_loglik(config: EstimatorConfig, theta, model, s_obs, rng, *, warm=None,
                    workers: int = 1) -> LogLikEstimate:
    """Simulate ``config.n`` datasets at ``theta`` and apply the configured estimator.

    Simulator failures and numerical breakdowns yield ``-inf`` with the
    reason in ``diagnostics["error"]``.
    """
    theta = np.asarray(theta, dtype=float)
    s_obs = np.asarray(s_obs, dtype=float)
    if config.kind == "exact":
        try:
            return LogLikEstimate(float(model.exact_loglik(s_obs, theta)))
        except ESTIMATOR_FAILURES as exc:
            return _failed(exc)
    try:
        with np.errstate(over="ignore", invalid="ignore"):
            sims = simulate_summaries(model, theta, config.n, rng, workers)
    except ESTIMATOR_FAILURES as exc:
        return _failed(exc, stage="simulate")
    if not np.all(np.isfinite(sims)):
        return LogLikEstimate(-math.inf, {"error": "non-finite simulated summaries", "stage": "simulate"})
    warm = warm if config.warm_start else None
    if config.kind == "gaussian":
        return gaussian_loglik(s_obs, sims)
    if config.kind == "semiparametric":
        return semibsl_loglik(s_obs, sims, config.marginal, warm=warm, dependence=config.dependence)
    return wsemibsl_loglik(s_obs, sims, config.marginal, config.whitening, config.gamma,
                           warm=warm, shrink_correlation=config.shrink_correlation)


def with_n(config: EstimatorConfig, n: int) -> EstimatorConfig:
    return replace(config, n=int(n))


def build_whitening(model, theta0, marginal: MarginalSpec, n_cov: int, rng, workers: int = 1,
                    check_tol: float | None = None) -> WhiteningContext:
    """Estimate ``W`` from ``n_cov`` simulations at ``theta0``.

    Normal scores come from marginals fitted to that same sample, using the
    marginal family the chain will use.
    """
    from .whitening import estimate_whitening

    theta0 = model.check(theta0)
    sims = SummarySample(simulate_summaries(model, theta0, n_cov, rng, workers))
    models = fit_marginals(sims.values, None, marginal)
    return estimate_whitening(to_quantiles(models, sims.values), tuple(theta0), check_tol)
