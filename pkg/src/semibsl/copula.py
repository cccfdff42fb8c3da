"""Gaussian copula density and the Gaussian rank correlation (GRC)."""

from __future__ import annotations

import math

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve
from scipy.special import ndtri
from scipy.stats import rankdata

MIN_EIGENVALUE = 1e-8


class CorrelationError(ValueError):
    pass


def column_ranks(x: np.ndarray) -> np.ndarray:
    """Ranks 1..n per column; ties get their average rank."""
    xt = np.ascontiguousarray(np.asarray(x, dtype=float).T)
    d, n = xt.shape
    order = np.argsort(xt, axis=1)
    ranks = np.empty((d, n))
    np.put_along_axis(ranks, order, np.arange(1, n + 1, dtype=float)[None, :], axis=1)
    sorted_x = np.take_along_axis(xt, order, axis=1)
    tied = np.any(np.diff(sorted_x, axis=1) == 0.0, axis=1)
    for j in np.flatnonzero(tied):
        ranks[j] = rankdata(xt[j], method="average")
    return ranks.T


def grc(sample) -> np.ndarray:
    """Gaussian rank correlation matrix of the columns of ``sample``.

    ``R_ij = sum_k z_ki z_kj / sum_k Phi^-1(k/(n+1))^2`` with
    ``z = Phi^-1(rank/(n+1))``. Unit diagonal and exact symmetry are enforced.
    """
    x = sample.values if hasattr(sample, "values") else np.asarray(sample, dtype=float)
    n = x.shape[0]
    if n < 3:
        raise ValueError("grc needs at least three rows")
    ranks = column_ranks(x)
    z = ndtri(ranks / (n + 1.0))
    denom = float(np.sum(ndtri(np.arange(1, n + 1) / (n + 1.0)) ** 2))
    r = z.T @ z / denom
    r = 0.5 * (r + r.T)
    # columns with identical ranks correlate exactly like the diagonal;
    # the matrix product and the denominator sum in different orders
    groups = {}
    for j in range(ranks.shape[1]):
        groups.setdefault(ranks[:, j].tobytes(), []).append(j)
    for members in groups.values():
        if len(members) > 1:
            r[np.ix_(members, members)] = 1.0
    np.fill_diagonal(r, 1.0)
    return r


def regularize_correlation(r: np.ndarray, floor: float = MIN_EIGENVALUE):
    """Clip eigenvalues at ``floor`` and rescale to unit diagonal.

    Returns ``(matrix, regularized)``; the input is returned untouched when
    its smallest eigenvalue already clears the floor.
    """
    vals, vecs = np.linalg.eigh(r)
    if vals[0] >= floor:
        return r, False
    fixed = (vecs * np.maximum(vals, floor)) @ vecs.T
    scale = 1.0 / np.sqrt(np.diag(fixed))
    fixed = fixed * scale[:, None] * scale[None, :]
    fixed = 0.5 * (fixed + fixed.T)
    np.fill_diagonal(fixed, 1.0)
    return fixed, True


def copula_logdensity(eta, r) -> float:
    """``-1/2 log det R - 1/2 eta^T (R^-1 - I) eta``."""
    eta = np.atleast_1d(np.asarray(eta, dtype=float))
    r = np.atleast_2d(np.asarray(r, dtype=float))
    try:
        c, low = cho_factor(r, lower=True, check_finite=True)
    except (LinAlgError, ValueError) as exc:
        raise CorrelationError("correlation not invertible") from exc
    diag = np.diag(c)
    if np.any(diag <= 0):
        raise CorrelationError("correlation not invertible")
    logdet = 2.0 * float(np.sum(np.log(diag)))
    quad = float(eta @ cho_solve((c, low), eta)) - float(eta @ eta)
    return -0.5 * logdet - 0.5 * quad


def clamp_probability(u, n: int):
    lo = 1.0 / (2.0 * n)
    return np.clip(u, lo, 1.0 - lo)


def to_quantiles(marginals, s, diagnostics: dict | None = None) -> np.ndarray:
    """Normal scores ``Phi^-1(G_j(s_j))`` with ``G_j`` clamped to ``[1/(2n), 1 - 1/(2n)]``.

    ``s`` may be a vector (one point) or an ``m x d`` matrix.
    """
    s = np.asarray(s, dtype=float)
    single = s.ndim == 1
    pts = s[None, :] if single else s
    eta = np.empty(pts.shape)
    clamps = 0
    for j, model in enumerate(marginals):
        u = np.atleast_1d(model.cdf(pts[:, j]))
        uc = clamp_probability(u, model.n)
        clamps += int(np.sum(uc != u))
        eta[:, j] = ndtri(uc)
    if diagnostics is not None and clamps:
        diagnostics["clamped"] = diagnostics.get("clamped", 0) + clamps
    return eta[0] if single else eta


def standard_normal_logpdf(z):
    z = np.asarray(z, dtype=float)
    return -0.5 * z * z - 0.5 * math.log(2.0 * math.pi)
