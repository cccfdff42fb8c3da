"""Benchmark simulators and their summary statistics.

Every simulator draws from a ``numpy.random.Generator`` through the helpers
in :mod:`semibsl.rng` and is vectorised over a batch of ``n`` replicate
datasets. Models are registered by identifier in :data:`MODELS`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from . import rng as rngmod
from .corestats import DegenerateSampleError, mvn_logpdf


class ParameterError(ValueError):
    """Parameter outside the model's support."""


# --- sinh-arcsinh distortion -------------------------------------------------


@dataclass(frozen=True)
class SinhArcsinhDistortion:
    epsilon: float = 0.0
    delta: float = 1.0

    def __post_init__(self):
        if not self.delta > 0:
            raise ValueError("delta must be positive")

    def __call__(self, y):
        return sinh_arcsinh(y, self.epsilon, self.delta)

    def inverse(self, s):
        s = np.asarray(s, dtype=float)
        return np.sinh(self.delta * np.arcsinh(s) - self.epsilon)

    def log_abs_inverse_jacobian(self, s):
        """``log |dy/ds|`` of :meth:`inverse`."""
        s = np.asarray(s, dtype=float)
        u = self.delta * np.arcsinh(s) - self.epsilon
        return math.log(self.delta) + _log_cosh(u) - 0.5 * np.log1p(s * s)

    @property
    def is_identity(self) -> bool:
        return self.epsilon == 0.0 and self.delta == 1.0


def _log_cosh(u):
    a = np.abs(u)
    return a + np.log1p(np.exp(-2.0 * a)) - math.log(2.0)


def sinh_arcsinh(y, eps: float, delta: float):
    """``sinh((asinh(y) + eps) / delta)`` elementwise."""
    if not delta > 0:
        raise ValueError("delta must be positive")
    return np.sinh((np.arcsinh(np.asarray(y, dtype=float)) + eps) / delta)


def sinh_arcsinh_pdf(s, eps: float, delta: float):
    """Density of ``sinh_arcsinh(Y)`` for ``Y ~ N(0, 1)``."""
    dist = SinhArcsinhDistortion(eps, delta)
    y = dist.inverse(s)
    return np.exp(-0.5 * y * y - 0.5 * math.log(2 * math.pi) + dist.log_abs_inverse_jacobian(s))


# --- alpha-stable ------------------------------------------------------------


@dataclass(frozen=True)
class StableParams:
    alpha: float
    beta: float = 0.0
    kappa: float = 1.0
    eta: float = 0.0

    def __post_init__(self):
        if not 0 < self.alpha <= 2:
            raise ValueError("alpha must lie in (0, 2]")
        if not -1 <= self.beta <= 1:
            raise ValueError("beta must lie in [-1, 1]")
        if not self.kappa > 0:
            raise ValueError("kappa must be positive")


def stable_sample(params: StableParams, gen: np.random.Generator, size=None):
    """Chambers-Mallows-Stuck draws in the 1-parameterisation.

    The standard variate is scaled by ``kappa`` and shifted by ``eta``; for
    ``alpha = 1`` the usual ``(2/pi) beta kappa log kappa`` shift applies.
    At ``alpha = 2`` the law is ``N(eta, 2 kappa^2)``.
    """
    a, b = params.alpha, params.beta
    v = math.pi * (rngmod.uniform(gen, size) - 0.5)
    w = rngmod.exponential(gen, 1.0, size)
    if a == 1.0:
        half_pi_bv = 0.5 * math.pi + b * v
        x = (2.0 / math.pi) * (half_pi_bv * np.tan(v)
                               - b * np.log((0.5 * math.pi * w * np.cos(v)) / half_pi_bv))
        return params.kappa * x + (2.0 / math.pi) * b * params.kappa * math.log(params.kappa) + params.eta
    t = b * math.tan(0.5 * math.pi * a)
    bab = math.atan(t) / a
    sab = (1.0 + t * t) ** (0.5 / a)
    x = (sab * np.sin(a * (v + bab)) / np.cos(v) ** (1.0 / a)
         * (np.cos(v - a * (v + bab)) / w) ** ((1.0 - a) / a))
    return params.kappa * x + params.eta


# --- model base --------------------------------------------------------------


class SimulatorModel:
    """Base class: batch simulation plus summaries.

    Subclasses define ``name``, ``param_names``, ``simulate(theta, n, gen)``,
    ``summarize(raw)`` and ``in_support(theta)``.
    """

    name = "model"
    param_names: tuple[str, ...] = ()

    @property
    def p(self) -> int:
        return len(self.param_names)

    @property
    def d(self) -> int:
        raise NotImplementedError

    def in_support(self, theta) -> bool:
        raise NotImplementedError

    def check(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (self.p,) or not self.in_support(theta):
            raise ParameterError(f"{self.name}: invalid parameter {theta.tolist()}")
        return theta

    def simulate(self, theta, n: int, gen) -> np.ndarray:
        raise NotImplementedError

    def summarize(self, raw) -> np.ndarray:
        raise NotImplementedError

    def simulate_summaries(self, theta, n: int, gen) -> np.ndarray:
        return self.summarize(self.simulate(theta, n, gen))

    def options(self) -> dict:
        return {}


# --- MA(2) -------------------------------------------------------------------


def ma2_in_support(theta) -> bool:
    t1, t2 = float(theta[0]), float(theta[1])
    return -1 < t2 < 1 and t1 + t2 > -1 and t1 - t2 < 1


def ma2_simulate(theta, T0: int = 50, sigma2: float = 1.0, gen=None, n: int | None = None):
    """MA(2) series ``x_t = w_t + theta1 w_{t-1} + theta2 w_{t-2}``.

    Two pre-sample innovations are drawn so every ``x_t`` is stationary.
    Returns shape ``(T0,)``, or ``(n, T0)`` when ``n`` is given.
    """
    if not ma2_in_support(theta):
        raise ParameterError("MA(2) parameters violate the invertibility constraints")
    gen = rngmod.as_generator(0 if gen is None else gen)
    shape = (T0 + 2,) if n is None else (n, T0 + 2)
    w = math.sqrt(sigma2) * rngmod.gaussian(gen, shape)
    t1, t2 = float(theta[0]), float(theta[1])
    return w[..., 2:] + t1 * w[..., 1:-1] + t2 * w[..., :-2]


def ma2_covariance(theta, T0: int, sigma2: float = 1.0) -> np.ndarray:
    t1, t2 = float(theta[0]), float(theta[1])
    cov = np.zeros((T0, T0))
    idx = np.arange(T0)
    cov[idx, idx] = 1 + t1 * t1 + t2 * t2
    cov[idx[:-1], idx[1:]] = cov[idx[1:], idx[:-1]] = t1 + t1 * t2
    cov[idx[:-2], idx[2:]] = cov[idx[2:], idx[:-2]] = t2
    return sigma2 * cov


def ma2_true_loglik(y, theta, sigma2: float = 1.0) -> float:
    y = np.asarray(y, dtype=float)
    if not ma2_in_support(theta):
        raise ParameterError("MA(2) parameters violate the invertibility constraints")
    return mvn_logpdf(y, np.zeros(y.size), ma2_covariance(theta, y.size, sigma2))


class MA2Model(SimulatorModel):
    """MA(2) with a sinh-arcsinh distortion applied elementwise as summary."""

    name = "ma2"
    param_names = ("theta1", "theta2")

    def __init__(self, T0: int = 50, sigma2: float = 1.0, eps: float = 0.0, delta: float = 1.0):
        self.T0 = int(T0)
        self.sigma2 = float(sigma2)
        self.distortion = SinhArcsinhDistortion(float(eps), float(delta))

    @property
    def d(self) -> int:
        return self.T0

    def in_support(self, theta) -> bool:
        return ma2_in_support(theta)

    def simulate(self, theta, n, gen):
        return ma2_simulate(theta, self.T0, self.sigma2, gen, n=n)

    def summarize(self, raw):
        return self.distortion(raw)

    def exact_loglik(self, s_obs, theta) -> float:
        """Exact log density of the observed summaries (change of variables)."""
        y = self.distortion.inverse(s_obs)
        jac = float(np.sum(self.distortion.log_abs_inverse_jacobian(s_obs)))
        return ma2_true_loglik(y, theta, self.sigma2) + jac

    def options(self):
        return {"T0": self.T0, "sigma2": self.sigma2,
                "eps": self.distortion.epsilon, "delta": self.distortion.delta}


# --- M/G/1 -------------------------------------------------------------------


def mg1_simulate(theta, customers: int = 51, gen=None, n: int | None = None):
    """Inter-departure times of a single-server FIFO queue.

    Service times are ``U(theta1, theta2)``; inter-arrival times are
    exponential with rate ``theta3``. Returns ``customers - 1`` values
    (or an ``(n, customers - 1)`` batch).
    """
    t1, t2, t3 = (float(v) for v in theta)
    if not (0 < t1 < t2 and t3 > 0):
        raise ParameterError("M/G/1 needs 0 < theta1 < theta2 and theta3 > 0")
    gen = rngmod.as_generator(0 if gen is None else gen)
    shape = (customers,) if n is None else (n, customers)
    arrivals = np.cumsum(rngmod.exponential(gen, t3, shape), axis=-1)
    service = t1 + (t2 - t1) * rngmod.uniform(gen, shape)
    dep = np.empty(shape)
    prev = np.zeros(shape[:-1])
    for i in range(customers):
        prev = np.maximum(arrivals[..., i], prev) + service[..., i]
        dep[..., i] = prev
    return np.diff(dep, axis=-1)


class MG1Model(SimulatorModel):
    name = "mg1"
    param_names = ("theta1", "theta2", "theta3")

    def __init__(self, customers: int = 51):
        self.customers = int(customers)

    @property
    def d(self):
        return self.customers - 1

    def in_support(self, theta):
        t1, t2, t3 = (float(v) for v in theta)
        return 0 < t1 < t2 and t3 > 0

    def simulate(self, theta, n, gen):
        return mg1_simulate(theta, self.customers, gen, n=n)

    def summarize(self, raw):
        return np.asarray(raw, dtype=float)

    def options(self):
        return {"customers": self.customers}


# --- Fowler's toads ----------------------------------------------------------

TOAD_LAGS = (1, 2, 4, 8)
TOAD_RETURN_DISTANCE = 10.0


def toads_simulate(theta, n_toads: int = 66, n_days: int = 63, gen=None, n: int | None = None):
    """Random-return toad movement model.

    Each night a toad moves by a symmetric stable displacement with
    stability ``alpha`` and scale ``xi``. With probability ``p0`` it then
    returns to a refuge drawn uniformly from its own history of refuges
    (so frequently used sites are favoured); otherwise it stays at the new
    location. Day 0 is the origin. Returns ``(n_days, n_toads)`` refuge
    locations, or ``(n, n_days, n_toads)``.
    """
    alpha, xi, p0 = (float(v) for v in theta)
    if not (0 < alpha <= 2 and xi > 0 and 0 <= p0 <= 1):
        raise ParameterError("toads need 0 < alpha <= 2, xi > 0, 0 <= p0 <= 1")
    gen = rngmod.as_generator(0 if gen is None else gen)
    lanes = n_toads if n is None else n * n_toads
    steps = n_days - 1
    u_move = rngmod.uniform(gen, (steps, lanes))
    w_move = rngmod.exponential(gen, 1.0, (steps, lanes))
    u_back = rngmod.uniform(gen, (steps, lanes))
    u_pick = rngmod.uniform(gen, (steps, lanes))
    hist = _kernels.toads_paths(alpha, xi, p0, u_move, w_move, u_back, u_pick)
    if n is None:
        return hist
    return hist.reshape(n_days, n, n_toads).transpose(1, 0, 2)


def _type7_rows(sorted_rows, counts, probs):
    """Linear-interpolation quantiles of the first ``counts[i]`` entries per row."""
    pos = probs[None, :] * (counts[:, None] - 1)
    lo = np.floor(pos).astype(np.int64)
    hi = np.minimum(lo + 1, counts[:, None] - 1)
    frac = pos - lo
    rows = np.arange(sorted_rows.shape[0])[:, None]
    a = sorted_rows[rows, lo]
    b = sorted_rows[rows, hi]
    return a + frac * (b - a)


def toads_summarize(refuges) -> np.ndarray:
    """48 summaries: for lags 1, 2, 4, 8 days, pooled over toads,
    the count of absolute displacements below 10 m, the log-differences of
    the 0, 0.1, ..., 1 quantiles of the larger absolute displacements, and
    their median.

    Accepts ``(n_days, n_toads)`` or a batch ``(n, n_days, n_toads)``.

    Raises
    ------
    DegenerateSampleError
        When a lag has fewer than 12 large displacements or tied quantiles.
    """
    x = np.asarray(refuges, dtype=float)
    single = x.ndim == 2
    if single:
        x = x[None]
    n = x.shape[0]
    probs = np.linspace(0.0, 1.0, 11)
    out = np.empty((n, 12 * len(TOAD_LAGS)))
    for k, lag in enumerate(TOAD_LAGS):
        disp = np.abs(x[:, lag:, :] - x[:, :-lag, :]).reshape(n, -1)
        small = disp < TOAD_RETURN_DISTANCE
        n_small = small.sum(axis=1)
        n_large = disp.shape[1] - n_small
        if np.any(n_large < 12):
            raise DegenerateSampleError("insufficient displacements")
        large = np.sort(np.where(small, np.inf, disp), axis=1)
        q = _type7_rows(large, n_large, probs)
        with np.errstate(divide="ignore"):
            logdiff = np.log(np.diff(q, axis=1))
        if not np.all(np.isfinite(logdiff)):
            raise DegenerateSampleError("insufficient displacements: tied quantiles")
        out[:, 12 * k] = n_small
        out[:, 12 * k + 1:12 * k + 11] = logdiff
        out[:, 12 * k + 11] = q[:, 5]
    return out[0] if single else out


class ToadsModel(SimulatorModel):
    name = "toads"
    param_names = ("alpha", "xi", "p0")

    def __init__(self, n_toads: int = 66, n_days: int = 63):
        self.n_toads = int(n_toads)
        self.n_days = int(n_days)

    @property
    def d(self):
        return 12 * len(TOAD_LAGS)

    def in_support(self, theta):
        alpha, xi, p0 = (float(v) for v in theta)
        return 0 < alpha <= 2 and xi > 0 and 0 <= p0 <= 1

    def simulate(self, theta, n, gen):
        return toads_simulate(theta, self.n_toads, self.n_days, gen, n=n)

    def summarize(self, raw):
        return toads_summarize(raw)

    def options(self):
        return {"n_toads": self.n_toads, "n_days": self.n_days}


# --- alpha-stable stochastic volatility --------------------------------------

SVM_LOG_VOL_CAP = 700.0


def svm_simulate(theta, fixed=None, T0: int = 50, gen=None, n: int | None = None,
                 sigma_is_variance: bool = False, diagnostics: dict | None = None):
    """Returns ``y_t = exp(x_t / 2) v_t`` with stable shocks ``v_t``.

    The log-volatility follows ``x_t ~ N(mu + phi (x_{t-1} - mu), sigma)``
    from ``x_0 = mu``; ``sigma`` is a standard deviation unless
    ``sigma_is_variance``. ``|x_t|`` is capped at 700 to keep ``exp`` finite.
    """
    alpha, beta = float(theta[0]), float(theta[1])
    fx = {"mu": 5.0, "phi": 1.0, "kappa": 1.0, "eta": 0.0, "sigma": 0.2}
    fx.update(fixed or {})
    params = StableParams(alpha, beta, fx["kappa"], fx["eta"])
    sd = math.sqrt(fx["sigma"]) if sigma_is_variance else fx["sigma"]
    gen = rngmod.as_generator(0 if gen is None else gen)
    shape = (T0,) if n is None else (n, T0)
    z = rngmod.gaussian(gen, shape)
    v = stable_sample(params, gen, shape)
    x = np.empty(shape)
    prev = np.full(shape[:-1], fx["mu"])
    for t in range(T0):
        prev = fx["mu"] + fx["phi"] * (prev - fx["mu"]) + sd * z[..., t]
        x[..., t] = prev
    capped = np.abs(x) > SVM_LOG_VOL_CAP
    if np.any(capped):
        x = np.clip(x, -SVM_LOG_VOL_CAP, SVM_LOG_VOL_CAP)
        if diagnostics is not None:
            diagnostics["log_vol_capped"] = int(capped.sum())
    return np.exp(0.5 * x) * v


class SVMModel(SimulatorModel):
    name = "svm"
    param_names = ("alpha", "beta")

    def __init__(self, T0: int = 50, mu: float = 5.0, phi: float = 1.0, kappa: float = 1.0,
                 eta: float = 0.0, sigma: float = 0.2, sigma_is_variance: bool = False):
        self.T0 = int(T0)
        self.fixed = {"mu": float(mu), "phi": float(phi), "kappa": float(kappa),
                      "eta": float(eta), "sigma": float(sigma)}
        self.sigma_is_variance = bool(sigma_is_variance)

    @property
    def d(self):
        return self.T0

    def in_support(self, theta):
        return 0 < float(theta[0]) <= 2 and -1 <= float(theta[1]) <= 1

    def simulate(self, theta, n, gen):
        return svm_simulate(theta, self.fixed, self.T0, gen, n=n,
                            sigma_is_variance=self.sigma_is_variance)

    def summarize(self, raw):
        return np.asarray(raw, dtype=float)

    def options(self):
        return {"T0": self.T0, **self.fixed, "sigma_is_variance": self.sigma_is_variance}


MODELS = {
    "ma2": MA2Model,
    "mg1": MG1Model,
    "toads": ToadsModel,
    "svm": SVMModel,
}


def make_model(name: str, **options) -> SimulatorModel:
    try:
        cls = MODELS[name]
    except KeyError:
        raise ValueError(f"unknown model {name!r}; choose from {sorted(MODELS)}") from None
    return cls(**options)
