"""Sample statistics, Gaussian KDE and the multivariate normal log density."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve
from scipy.special import ndtr

LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)



class DegenerateSampleError(ValueError):
    """A marginal has zero spread or the sample is otherwise unusable."""


class NotPositiveDefiniteError(ValueError):
    pass


@dataclass(frozen=True)
class SummarySample:
    """An ``n x d`` matrix of simulated summary statistics."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim == 1:
            v = v[:, None]
        if v.ndim != 2:
            raise ValueError("summary sample must be a matrix")
        if v.shape[0] < 3 or v.shape[1] < 1:
            raise DegenerateSampleError(f"need n >= 3 and d >= 1, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise DegenerateSampleError("summary sample contains non-finite entries")
        if np.any(np.ptp(v, axis=0) == 0.0):
            raise DegenerateSampleError("degenerate marginal: zero sample variance")
        object.__setattr__(self, "values", v)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def d(self) -> int:
        return self.values.shape[1]


def _matrix(sample) -> np.ndarray:
    if isinstance(sample, SummarySample):
        return sample.values
    x = np.asarray(sample, dtype=float)
    return x[:, None] if x.ndim == 1 else x


def sample_mean(sample) -> np.ndarray:
    return _matrix(sample).mean(axis=0)


def sample_cov(sample) -> np.ndarray:
    """Unbiased sample covariance (divisor ``n - 1``), exactly symmetric."""
    x = _matrix(sample)
    if x.shape[0] < 2:
        raise ValueError("sample_cov needs at least two rows")
    xc = x - x.mean(axis=0)
    cov = xc.T @ xc / (x.shape[0] - 1)
    return 0.5 * (cov + cov.T)


def iqr(points: np.ndarray) -> float:
    q25, q75 = np.percentile(points, [25, 75])  # linear interpolation (type 7)
    return float(q75 - q25)


def silverman_bandwidth(points, rule: str = "robust") -> float:
    """Silverman rule-of-thumb bandwidth.

    ``rule="robust"`` gives ``0.9 * min(sd, IQR / 1.34) * n**(-1/5)``;
    ``rule="normal"`` gives ``1.06 * sd * n**(-1/5)``;
    ``rule="mad"`` gives ``(MAD / 0.6745) * (4 / (3 n))**(1/5)``, the normal
    reference rule with a median-absolute-deviation scale.
    """
    x = np.asarray(points, dtype=float).ravel()
    n = x.size
    if n < 2:
        raise DegenerateSampleError("degenerate marginal: need at least two points")
    if x.min() == x.max():
        # np.std of a constant can come out as rounding noise rather than 0
        raise DegenerateSampleError("degenerate marginal")
    sd = float(np.std(x, ddof=1))
    if rule == "normal":
        spread = sd
        factor = 1.06
    elif rule == "robust":
        spread_iqr = iqr(x) / 1.34
        spread = min(sd, spread_iqr) if spread_iqr > 0 else sd
        factor = 0.9
    elif rule == "mad":
        spread = float(np.median(np.abs(x - np.median(x)))) / 0.6745
        spread = spread if spread > 0 else sd
        factor = (4.0 / 3.0) ** 0.2
    else:
        raise ValueError(f"unknown bandwidth rule {rule!r}")
    if not spread > 0 or not math.isfinite(spread):
        raise DegenerateSampleError("degenerate marginal")
    return factor * spread * n ** (-0.2)


@dataclass(frozen=True)
class KdeModel:
    """Global-bandwidth Gaussian KDE of one marginal."""

    points: np.ndarray
    bandwidth: float

    def __post_init__(self):
        p = np.sort(np.asarray(self.points, dtype=float).ravel())
        if not np.all(np.isfinite(p)):
            raise ValueError("KDE points must be finite")
        if not self.bandwidth > 0:
            raise ValueError("bandwidth must be positive")
        object.__setattr__(self, "points", p)

    @classmethod
    def fit(cls, points, rule: str = "robust") -> "KdeModel":
        return cls(points, silverman_bandwidth(points, rule))

    @property
    def n(self) -> int:
        return self.points.size

    def pdf(self, s):
        return kde_pdf(self, s)

    def logpdf(self, s):
        return kde_logpdf(self, s)

    def cdf(self, s):
        return kde_cdf(self, s)


def _blocks(s: np.ndarray, n: int, budget: int = 1 << 22):
    step = max(1, budget // max(n, 1))
    for start in range(0, s.size, step):
        yield slice(start, start + step)


def kde_pdf(model: KdeModel, s):
    """``(1/n) sum_i phi((s - p_i)/h) / h`` evaluated elementwise on ``s``."""
    s_arr = np.asarray(s, dtype=float)
    flat = s_arr.ravel()
    out = np.empty(flat.size)
    h, p = model.bandwidth, model.points
    norm = 1.0 / (model.n * h * math.sqrt(2.0 * math.pi))
    for sl in _blocks(flat, model.n):
        z = (flat[sl, None] - p[None, :]) / h
        out[sl] = np.exp(-0.5 * z * z).sum(axis=1) * norm
    return out.reshape(s_arr.shape) if s_arr.ndim else float(out[0])


def kde_logpdf(model: KdeModel, s):
    """Log of :func:`kde_pdf`, stable far from the data (log-sum-exp)."""
    s_arr = np.asarray(s, dtype=float)
    flat = s_arr.ravel()
    out = np.empty(flat.size)
    h, p = model.bandwidth, model.points
    const = -math.log(model.n * h) - LOG_SQRT_2PI
    for sl in _blocks(flat, model.n):
        z = (flat[sl, None] - p[None, :]) / h
        with np.errstate(over="ignore", invalid="ignore"):
            a = -0.5 * z * z
            m = a.max(axis=1)
            val = m + np.log(np.exp(a - m[:, None]).sum(axis=1)) + const
        # z * z overflows only for arguments astronomically far from the data
        out[sl] = np.where(np.isneginf(m), -np.inf, val)
    return out.reshape(s_arr.shape) if s_arr.ndim else float(out[0])


def kde_cdf(model: KdeModel, s):
    """``(1/n) sum_i Phi((s - p_i)/h)``; monotone in ``s``."""
    s_arr = np.asarray(s, dtype=float)
    flat = s_arr.ravel()
    out = np.empty(flat.size)
    h, p = model.bandwidth, model.points
    for sl in _blocks(flat, model.n):
        z = (flat[sl, None] - p[None, :]) / h
        out[sl] = ndtr(z).mean(axis=1)
    return out.reshape(s_arr.shape) if s_arr.ndim else float(out[0])


def mvn_logpdf(x, mu, sigma) -> float:
    """Exact multivariate normal log density via a Cholesky factorization.

    Raises
    ------
    NotPositiveDefiniteError
        If ``sigma`` has no Cholesky factor.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    mu = np.atleast_1d(np.asarray(mu, dtype=float))
    sigma = np.atleast_2d(np.asarray(sigma, dtype=float))
    d = x.size
    if sigma.shape != (d, d) or mu.size != d:
        raise ValueError("dimension mismatch in mvn_logpdf")
    if not np.all(np.isfinite(sigma)):
        raise NotPositiveDefiniteError("covariance not positive definite")
    try:
        c, low = cho_factor(sigma, lower=True, check_finite=False)
    except LinAlgError as exc:
        raise NotPositiveDefiniteError("covariance not positive definite") from exc
    diag = np.diag(c)
    if np.any(diag <= 0) or not np.all(np.isfinite(diag)):
        raise NotPositiveDefiniteError("covariance not positive definite")
    # rounding can leave a tiny positive pivot on an exactly singular matrix
    if diag.min() ** 2 <= d * np.finfo(float).eps * np.max(np.diag(sigma)):
        raise NotPositiveDefiniteError("covariance not positive definite")
    r = x - mu
    quad = float(r @ cho_solve((c, low), r, check_finite=False))
    logdet = 2.0 * float(np.sum(np.log(diag)))
    return -0.5 * (d * math.log(2.0 * math.pi) + logdet + quad)
