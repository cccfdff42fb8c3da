"""PCA whitening of copula quantiles and Warton covariance shrinkage."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corestats import sample_cov

RANK_TOL = 1e-12


class WhiteningError(ValueError):
    pass


@dataclass(frozen=True)
class WhiteningContext:
    """Whitening matrix estimated once at ``theta0`` from ``n_cov`` simulations."""

    w: np.ndarray
    theta0: tuple = ()
    n_cov: int = 0

    def __post_init__(self):
        w = np.asarray(self.w, dtype=float)
        if w.ndim != 2 or w.shape[0] != w.shape[1]:
            raise WhiteningError("W must be square")
        if np.linalg.matrix_rank(w) < w.shape[0]:
            raise WhiteningError("W must be invertible")
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "theta0", tuple(float(t) for t in self.theta0))

    @property
    def d(self) -> int:
        return self.w.shape[0]

    def to_dict(self) -> dict:
        return {"d": self.d, "n_cov": int(self.n_cov), "theta0": list(self.theta0),
                "w": self.w.ravel().tolist()}

    @classmethod
    def from_dict(cls, data: dict) -> "WhiteningContext":
        d = int(data["d"])
        return cls(np.asarray(data["w"], dtype=float).reshape(d, d),
                   tuple(data.get("theta0", ())), int(data.get("n_cov", 0)))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def load(cls, path) -> "WhiteningContext":
        return cls.from_dict(json.loads(Path(path).read_text()))


def pca_whitening_matrix(cov: np.ndarray) -> np.ndarray:
    """``W = Lambda^{-1/2} U^T`` with eigenvalues in descending order.

    Each eigenvector is signed so its largest-magnitude entry is positive.
    """
    vals, vecs = np.linalg.eigh(0.5 * (cov + cov.T))
    order = np.argsort(vals)[::-1]
    vals, vecs = vals[order], vecs[:, order]
    if vals[-1] <= RANK_TOL:
        raise WhiteningError("rank-deficient quantile covariance")
    pivot = np.argmax(np.abs(vecs), axis=0)
    signs = np.sign(vecs[pivot, np.arange(vecs.shape[1])])
    vecs = vecs * signs
    return vecs.T / np.sqrt(vals)[:, None]


def estimate_whitening(quantile_sample, theta0=(), check_tol: float | None = None) -> WhiteningContext:
    """PCA whitening matrix from an ``n_cov x d`` sample of normal scores."""
    q = np.asarray(quantile_sample, dtype=float)
    n_cov, d = q.shape
    if n_cov <= d:
        raise WhiteningError("need n_cov > d to estimate W")
    cov = sample_cov(q)
    w = pca_whitening_matrix(cov)
    tol = 0.05 * d if check_tol is None else check_tol
    if np.linalg.norm(w @ cov @ w.T - np.eye(d)) > tol:
        raise WhiteningError("whitening check failed")
    return WhiteningContext(w, tuple(theta0), n_cov)


def warton_shrink(sigma_tilde, gamma: float) -> np.ndarray:
    """``D^{1/2} (gamma R + (1 - gamma) I) D^{1/2}``.

    Equivalent to scaling the off-diagonal covariances by ``gamma`` with
    the diagonal kept exactly.
    """
    if not 0.0 <= gamma <= 1.0:
        raise ValueError("gamma must lie in [0, 1]")
    s = np.asarray(sigma_tilde, dtype=float)
    diag = np.diag(s).copy()
    if np.any(diag <= 0):
        raise ValueError("covariance diagonal must be positive")
    out = s * gamma
    np.fill_diagonal(out, diag)
    return out


def warton_shrink_correlation(sigma_tilde, corr, gamma: float) -> np.ndarray:
    """Shrinkage with a separately estimated correlation matrix ``corr``."""
    if not 0.0 <= gamma <= 1.0:
        raise ValueError("gamma must lie in [0, 1]")
    sd = np.sqrt(np.diag(sigma_tilde))
    if np.any(sd <= 0):
        raise ValueError("covariance diagonal must be positive")
    mid = gamma * np.asarray(corr, dtype=float) + (1.0 - gamma) * np.eye(sd.size)
    out = sd[:, None] * mid * sd[None, :]
    np.fill_diagonal(out, np.diag(sigma_tilde))
    return out


def whiten_quantiles(ctx: WhiteningContext, etas) -> np.ndarray:
    """Rows ``eta_i`` mapped to ``W eta_i``."""
    e = np.asarray(etas, dtype=float)
    if e.shape[-1] != ctx.d:
        raise WhiteningError(f"dimension mismatch: W is {ctx.d}x{ctx.d}, quantiles have {e.shape[-1]}")
    return e @ ctx.w.T
