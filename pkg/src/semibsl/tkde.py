"""Transformation kernel density estimation.

Pipeline for one marginal: optional log pre-transform, median centering,
hyperbolic power transformation (HPT) fitted by profile maximum likelihood,
then a Silverman-bandwidth Gaussian KDE on the transformed points. Densities
are mapped back to the original domain with the chain-rule Jacobian.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .corestats import (
    LOG_SQRT_2PI,
    DegenerateSampleError,
    KdeModel,
    kde_cdf,
    kde_logpdf,
    silverman_bandwidth,
)
from . import _kernels

LOG2 = math.log(2.0)
MIN_SIDE_POINTS = 10


class Variant(enum.Enum):
    """Log pre-transform applied before the HPT (TKDE0..TKDE3)."""

    NONE = 0
    POSITIVE_SKEW = 1
    NEGATIVE_SKEW = 2
    SYMMETRIC = 3

    @classmethod
    def parse(cls, value) -> "Variant":
        if isinstance(value, cls):
            return value
        if isinstance(value, int):
            return cls(value)
        key = str(value).strip().lower()
        aliases = {
            "tkde0": cls.NONE, "none": cls.NONE, "0": cls.NONE,
            "tkde1": cls.POSITIVE_SKEW, "positive": cls.POSITIVE_SKEW, "1": cls.POSITIVE_SKEW,
            "tkde2": cls.NEGATIVE_SKEW, "negative": cls.NEGATIVE_SKEW, "2": cls.NEGATIVE_SKEW,
            "tkde3": cls.SYMMETRIC, "symmetric": cls.SYMMETRIC, "3": cls.SYMMETRIC,
        }
        if key not in aliases:
            raise ValueError(f"unknown TKDE variant {value!r}")
        return aliases[key]


class PretransformDomainError(ValueError):
    pass


@dataclass(frozen=True)
class LogPretransform:
    variant: Variant = Variant.NONE
    delta: float = 0.0
    anchor: float | None = None

    def __post_init__(self):
        if self.delta < 0:
            raise ValueError("delta must be nonnegative")
        if self.variant in (Variant.POSITIVE_SKEW, Variant.NEGATIVE_SKEW) and self.anchor is None:
            raise ValueError("skew pretransforms need an anchor")

    def _arg(self, s):
        if self.variant is Variant.POSITIVE_SKEW:
            return 1.0 + s - self.anchor + self.delta
        if self.variant is Variant.NEGATIVE_SKEW:
            return 1.0 - s + self.anchor + self.delta
        return None

    def in_domain(self, s):
        s = np.asarray(s, dtype=float)
        arg = self._arg(s)
        if arg is None:
            return np.isfinite(s)
        return arg > 0

    def apply(self, s):
        """Forward map; raises on arguments outside the log domain."""
        s = np.asarray(s, dtype=float)
        if self.variant is Variant.NONE:
            return s.copy()
        if self.variant is Variant.SYMMETRIC:
            return np.sign(s) * np.log1p(np.abs(s))
        arg = self._arg(s)
        if np.any(arg <= 0):
            raise PretransformDomainError("pretransform domain violation")
        out = np.log(arg)
        return -out if self.variant is Variant.NEGATIVE_SKEW else out

    def log_jacobian(self, s):
        s = np.asarray(s, dtype=float)
        if self.variant is Variant.NONE:
            return np.zeros_like(s)
        if self.variant is Variant.SYMMETRIC:
            return -np.log1p(np.abs(s))
        return -np.log(self._arg(s))


def log_pretransform(points, s_obs, variant):
    """Apply a log pre-transform chosen by ``variant``.

    The shift ``delta`` keeps the observed value inside the log domain
    when it falls beyond the simulated range. ``s_obs`` may be ``None``
    (no observed value; ``delta = 0``).

    Returns
    -------
    (transformed points, transformed observed value, LogPretransform)
    """
    variant = Variant.parse(variant)
    x = np.asarray(points, dtype=float)
    if variant is Variant.POSITIVE_SKEW:
        anchor = float(x.min())
        delta = anchor - s_obs + 1.0 if s_obs is not None and s_obs < anchor else 0.0
        pre = LogPretransform(variant, delta, anchor)
    elif variant is Variant.NEGATIVE_SKEW:
        anchor = float(x.max())
        delta = s_obs - anchor + 1.0 if s_obs is not None and s_obs > anchor else 0.0
        pre = LogPretransform(variant, delta, anchor)
    else:
        pre = LogPretransform(variant)
    t_obs = None if s_obs is None else float(pre.apply(s_obs))
    return pre.apply(x), t_obs, pre


# --- hyperbolic power transformation ---------------------------------------


def _log_sinh_abs(a):
    # log sinh(a) for a > 0, finite for large a
    with np.errstate(divide="ignore"):
        return a + np.log(-np.expm1(-2.0 * a)) - LOG2


def _log_sech(a):
    return -a + LOG2 - np.log1p(np.exp(-2.0 * a))


def hpt_unit_forward(c, psi, lam):
    """HPT with unit normalising constant on already-centered input."""
    c = np.asarray(c, dtype=float)
    a = np.abs(psi * c)
    # overflow gives inf, which the callers treat as a failed fit
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        logg = _log_sinh_abs(a) + lam * _log_sech(a) - math.log(psi)
        out = np.sign(c) * np.exp(logg)
    return np.where(a == 0.0, 0.0, out)


def hpt_unit_logjac(c, psi, lam):
    """log of d/dc of :func:`hpt_unit_forward`."""
    a = np.abs(psi * np.asarray(c, dtype=float))
    ls = _log_sech(a)
    # 1 - lam * tanh^2 = (1 - lam) + lam * sech^2, positive for |lam| <= 1
    return np.log((1.0 - lam) + lam * np.exp(2.0 * ls)) + (lam - 1.0) * ls


@dataclass(frozen=True)
class HptFit:
    """Fitted HPT for one marginal.

    ``nu`` is the normalising constant used on both sides unless
    ``per_side`` is set, in which case ``side_nu = (nu_minus, nu_plus)``
    is used branch by branch. ``converged`` reports the simplex searches.
    """

    nu: float
    psi_minus: float
    lambda_minus: float
    psi_plus: float
    lambda_plus: float
    center: float = 0.0
    side_nu: tuple[float, float] | None = None
    per_side: bool = False
    converged: bool = True
    objective: float = float("nan")
    initial_objective: float = float("nan")

    def __post_init__(self):
        for name in ("nu", "psi_minus", "psi_plus"):
            v = getattr(self, name)
            if not (v > 0 and math.isfinite(v)):
                raise ValueError(f"{name} must be positive and finite, got {v}")
        for name in ("lambda_minus", "lambda_plus"):
            if not abs(getattr(self, name)) <= 1.0:
                raise ValueError(f"{name} must lie in [-1, 1]")
        if self.per_side and self.side_nu is None:
            raise ValueError("per_side fit needs side_nu")

    @property
    def nu_minus(self) -> float:
        return self.side_nu[0] if self.per_side else self.nu

    @property
    def nu_plus(self) -> float:
        return self.side_nu[1] if self.per_side else self.nu


def hpt_forward(params: HptFit, s):
    """G(s) with ``s`` on the original (uncentered) scale."""
    c = np.asarray(s, dtype=float) - params.center
    left = c <= 0
    out = np.where(
        left,
        params.nu_minus * hpt_unit_forward(c, params.psi_minus, params.lambda_minus),
        params.nu_plus * hpt_unit_forward(c, params.psi_plus, params.lambda_plus),
    )
    return out if out.ndim else float(out)


def hpt_log_jacobian(params: HptFit, s):
    c = np.asarray(s, dtype=float) - params.center
    out = np.where(
        c <= 0,
        math.log(params.nu_minus) + hpt_unit_logjac(c, params.psi_minus, params.lambda_minus),
        math.log(params.nu_plus) + hpt_unit_logjac(c, params.psi_plus, params.lambda_plus),
    )
    return out if out.ndim else float(out)


def hpt_jacobian(params: HptFit, s):
    """dG/ds, strictly positive."""
    return np.exp(hpt_log_jacobian(params, s))


def nu_mle(transformed_with_nu_1) -> float:
    """Normalising constant giving the rescaled sample unit second moment."""
    g = np.asarray(transformed_with_nu_1, dtype=float)
    m2 = float(np.mean(g * g))
    if not (m2 > 0 and math.isfinite(m2)):
        raise DegenerateSampleError("degenerate HPT output")
    return m2 ** -0.5


def _mad(x):
    return float(np.median(np.abs(x - np.median(x))))


def hpt_objective(params: HptFit, points) -> float:
    """Sum of ``log phi(G(s_i)) + log|J(s_i)|`` over ``points``."""
    g = hpt_forward(params, points)
    return float(np.sum(-0.5 * g * g - LOG_SQRT_2PI + hpt_log_jacobian(params, points)))


def _fit_side(c, init, step, max_iter, ftol):
    """Maximise the side profile over (log psi, atanh lambda)."""
    z0, z1, fneg, fneg0, converged = _kernels.fit_side_nm(
        np.ascontiguousarray(c, dtype=float), float(init[0]), float(init[1]),
        float(step), int(max_iter), float(ftol))
    psi = math.exp(max(min(z0, 300.0), -300.0))
    lam = math.tanh(max(min(z1, 18.0), -18.0))
    if not math.isfinite(fneg):
        raise DegenerateSampleError("HPT fit failed: objective not finite")
    return psi, lam, -fneg, -fneg0, bool(converged)


def fit_hpt(points, *, per_side_nu: bool = True, warm_start: HptFit | None = None,
            max_iter: int = 500, ftol: float = 1e-8) -> HptFit:
    """Fit the HPT to ``points`` by profile maximum likelihood.

    The sample is median centered and split at zero; each side's
    ``(psi, lambda)`` pair is found by a Nelder-Mead search in
    ``(log psi, atanh lambda)`` with ``nu`` profiled at its side-local MLE.
    The cold start is ``lambda = 0``, ``psi = 1 / MAD(side)``; a previous fit
    may be passed as ``warm_start``.

    With ``per_side_nu=False`` one ``nu`` is re-estimated over the whole
    transformed sample after both searches.
    """
    x = np.asarray(points, dtype=float).ravel()
    center = float(np.median(x))
    c = x - center
    left, right = c[c <= 0], c[c > 0]
    if left.size < MIN_SIDE_POINTS or right.size < MIN_SIDE_POINTS:
        raise DegenerateSampleError("insufficient data for split fit")

    fits = []
    for side, prev in ((left, "minus"), (right, "plus")):
        if warm_start is not None:
            psi0 = getattr(warm_start, f"psi_{prev}")
            lam0 = getattr(warm_start, f"lambda_{prev}")
            z0 = (math.log(psi0), math.atanh(max(min(lam0, 0.999999), -0.999999)))
            step = 0.1
        else:
            mad = _mad(side)
            if not mad > 0:
                mad = float(np.mean(np.abs(side - side.mean())))
            if not mad > 0:
                raise DegenerateSampleError("degenerate marginal")
            z0 = (-math.log(mad), 0.0)
            step = 0.5
        fits.append(_fit_side(side, z0, step, max_iter, ftol))

    (psi_m, lam_m, obj_m, obj0_m, conv_m), (psi_p, lam_p, obj_p, obj0_p, conv_p) = fits
    g_left = hpt_unit_forward(left, psi_m, lam_m)
    g_right = hpt_unit_forward(right, psi_p, lam_p)
    side_nu = (nu_mle(g_left), nu_mle(g_right))
    shared = nu_mle(np.concatenate([g_left, g_right]))
    fit = HptFit(
        nu=shared, psi_minus=psi_m, lambda_minus=lam_m, psi_plus=psi_p,
        lambda_plus=lam_p, center=center, side_nu=side_nu, per_side=per_side_nu,
        converged=conv_m and conv_p, initial_objective=obj0_m + obj0_p,
    )
    return _with_objective(fit, x)


def _with_objective(fit: HptFit, x) -> HptFit:
    from dataclasses import replace
    return replace(fit, objective=hpt_objective(fit, x))


# --- the TKDE estimator ------------------------------------------------------


@dataclass(frozen=True)
class TkdeModel:
    pretransform: LogPretransform
    hpt: HptFit
    kde: KdeModel
    flags: dict = field(default_factory=dict, compare=False)

    @property
    def n(self) -> int:
        return self.kde.n

    def transform(self, s):
        """Full forward map: pre-transform then HPT (domain assumed valid)."""
        return hpt_forward(self.hpt, self.pretransform.apply(s))

    def logpdf(self, s):
        return tkde_logpdf(self, s)

    def pdf(self, s):
        return tkde_pdf(self, s)

    def cdf(self, s):
        return tkde_cdf(self, s)


def tkde_fit(points, s_obs=None, variant=Variant.NONE, *, per_side_nu: bool = True,
             warm_start: HptFit | None = None, bandwidth_rule: str = "robust") -> TkdeModel:
    """Fit a TKDE for one marginal."""
    pre_points, _, pre = log_pretransform(points, s_obs, variant)
    hpt = fit_hpt(pre_points, per_side_nu=per_side_nu, warm_start=warm_start)
    transformed = hpt_forward(hpt, pre_points)
    kde = KdeModel(transformed, silverman_bandwidth(transformed, bandwidth_rule))
    return TkdeModel(pre, hpt, kde, {"hpt_converged": hpt.converged})


def _split_domain(model: TkdeModel, s):
    s = np.asarray(s, dtype=float)
    ok = model.pretransform.in_domain(s)
    safe = np.where(ok, s, model.pretransform.anchor if model.pretransform.anchor is not None else 0.0)
    return s, ok, safe


def tkde_logpdf(model: TkdeModel, s):
    """Log density on the original domain; ``-inf`` outside the pretransform domain."""
    s, ok, safe = _split_domain(model, s)
    pre = model.pretransform.apply(safe)
    out = (kde_logpdf(model.kde, hpt_forward(model.hpt, pre))
           + hpt_log_jacobian(model.hpt, pre)
           + model.pretransform.log_jacobian(safe))
    out = np.where(ok, out, -np.inf)
    return out if out.ndim else float(out)


def tkde_pdf(model: TkdeModel, s):
    out = np.exp(tkde_logpdf(model, s))
    return out if np.ndim(out) else float(out)


def tkde_cdf(model: TkdeModel, s):
    """CDF on the original domain; monotone maps preserve probabilities."""
    s, ok, safe = _split_domain(model, s)
    pre = model.pretransform.apply(safe)
    out = kde_cdf(model.kde, hpt_forward(model.hpt, pre))
    if model.pretransform.variant is Variant.NEGATIVE_SKEW:
        below = np.ones_like(out)  # beyond the upper bound
    else:
        below = np.zeros_like(out)
    out = np.where(ok, out, below)
    return out if out.ndim else float(out)
