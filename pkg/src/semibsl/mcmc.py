"""Pseudo-marginal random-walk Metropolis-Hastings and simulation-count tuning."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .rng import SeedTree
from .synlik import EstimatorConfig, estimate_loglik, with_n

INIT_RETRIES = 10


class ChainInitError(RuntimeError):
    pass


@dataclass(frozen=True)
class Prior:
    """Uniform prior on a box intersected with linear constraints ``A theta < b``."""

    lower: tuple
    upper: tuple
    a: tuple = ()
    b: tuple = ()

    def __post_init__(self):
        lo, hi = np.asarray(self.lower, float), np.asarray(self.upper, float)
        if lo.shape != hi.shape or np.any(lo >= hi):
            raise ValueError("prior bounds must satisfy lower < upper")
        if len(self.a) != len(self.b):
            raise ValueError("constraint rows and bounds differ in length")
        for row in self.a:
            if len(row) != lo.size:
                raise ValueError("constraint row has the wrong width")

    @property
    def p(self) -> int:
        return len(self.lower)

    def contains(self, theta) -> bool:
        t = np.asarray(theta, dtype=float)
        if t.shape != (self.p,) or not np.all(np.isfinite(t)):
            return False
        if np.any(t <= np.asarray(self.lower)) or np.any(t >= np.asarray(self.upper)):
            return False
        if self.a:
            return bool(np.all(np.asarray(self.a, float) @ t < np.asarray(self.b, float)))
        return True

    def logpdf(self, theta) -> float:
        # unnormalized; the constant cancels in every acceptance ratio
        return 0.0 if self.contains(theta) else -math.inf

    def to_dict(self) -> dict:
        return {"lower": list(self.lower), "upper": list(self.upper),
                "a": [list(r) for r in self.a], "b": list(self.b)}

    @classmethod
    def from_dict(cls, d: dict) -> "Prior":
        return cls(tuple(map(float, d["lower"])), tuple(map(float, d["upper"])),
                   tuple(tuple(map(float, r)) for r in d.get("a", ())),
                   tuple(map(float, d.get("b", ()))))


DEFAULT_PRIORS = {
    # triangle: -1 < t2 < 1, t1 + t2 > -1, t1 - t2 < 1
    "ma2": Prior((-2.0, -1.0), (2.0, 1.0), ((-1.0, -1.0), (1.0, -1.0)), (1.0, 1.0)),
    "toads": Prior((1.0, 0.0, 0.0), (2.0, 100.0, 0.9)),
    # 0 < t2 - t1 < 10 on top of the box
    "mg1": Prior((0.0, 0.0, 0.0), (10.0, 20.0, 0.5), ((1.0, -1.0, 0.0), (-1.0, 1.0, 0.0)), (0.0, 10.0)),
    "svm": Prior((0.5, -1.0), (2.0, 1.0)),
}


@dataclass(frozen=True)
class ChainConfig:
    iterations: int
    proposal_cov: np.ndarray
    prior: Prior
    seed: int
    init_theta: tuple

    def __post_init__(self):
        cov = np.atleast_2d(np.asarray(self.proposal_cov, dtype=float))
        if cov.shape != (self.prior.p, self.prior.p) or not np.allclose(cov, cov.T):
            raise ValueError("proposal covariance must be symmetric p x p")
        if np.linalg.eigvalsh(cov)[0] <= 0:
            raise ValueError("proposal covariance must be positive definite")
        if self.iterations < 1:
            raise ValueError("iterations must be positive")
        if not self.prior.contains(self.init_theta):
            raise ValueError("initial theta lies outside the prior support")
        object.__setattr__(self, "proposal_cov", cov)
        object.__setattr__(self, "init_theta", tuple(float(t) for t in self.init_theta))


@dataclass
class Chain:
    thetas: np.ndarray
    logliks: np.ndarray
    accepted: np.ndarray
    failures: int = 0
    init_attempts: int = 1
    meta: dict = field(default_factory=dict)

    @property
    def acceptance_rate(self) -> float:
        return float(self.accepted[1:].mean()) if len(self.accepted) > 1 else 0.0

    def post_burn_in(self, frac: float = 0.2) -> np.ndarray:
        start = int(math.floor(frac * len(self.thetas)))
        return self.thetas[start:]


def run_chain(config: ChainConfig, estimator: EstimatorConfig, model, s_obs, *,
              workers: int = 1, callback=None) -> Chain:
    """Random-walk MH targeting prior x synthetic likelihood.

    Row 0 holds the initial state. Each later row is one proposal. A rejected
    row copies the previous state and its stored log-likelihood verbatim.
    ``callback(t, chain_so_far)`` may be used for progress or checkpoints.
    """
    tree = SeedTree(int(config.seed))
    prop_gen = tree.derive(0).generator()
    sim_tree = tree.derive(1)
    chol = np.linalg.cholesky(config.proposal_cov)
    p, T = config.prior.p, config.iterations

    theta = np.asarray(config.init_theta)
    est = None
    for attempt in range(INIT_RETRIES):
        est = estimate_loglik(estimator, theta, model, s_obs, tree.derive(2).derive(attempt), workers=workers)
        if est.ok:
            break
    if est is None or not est.ok:
        raise ChainInitError("cannot initialize chain")

    thetas = np.empty((T + 1, p))
    logliks = np.empty(T + 1)
    accepted = np.zeros(T + 1, dtype=bool)
    thetas[0], logliks[0], accepted[0] = theta, est.value, True
    ell, logprior = est.value, config.prior.logpdf(theta)
    warm = est.diagnostics.get("warm")
    failures = 0

    for t in range(1, T + 1):
        step = chol @ prop_gen.standard_normal(p)
        log_u = math.log(prop_gen.random())
        proposal = theta + step
        lp_new = config.prior.logpdf(proposal)
        take = False
        if math.isfinite(lp_new):
            new = estimate_loglik(estimator, proposal, model, s_obs, sim_tree.derive(t),
                                  warm=warm, workers=workers)
            if not new.ok:
                failures += 1
            elif log_u < new.value - ell + lp_new - logprior:
                take = True
                theta, ell, logprior = proposal, new.value, lp_new
                warm = new.diagnostics.get("warm") or warm
        thetas[t], logliks[t], accepted[t] = theta, ell, take
        if callback is not None:
            callback(t, thetas[: t + 1], logliks[: t + 1], accepted[: t + 1])
    return Chain(thetas, logliks, accepted, failures, attempt + 1)


@dataclass(frozen=True)
class TuneRow:
    n: int
    std: float
    failures: int
    reps: int
    in_band: bool
    estimator_failure: bool
    band_upper: float = 2.0

    @property
    def viable(self) -> bool:
        """Spread at or below the band's upper edge."""
        return self.std <= self.band_upper


def tune_n(estimator: EstimatorConfig, model, s_obs, theta0, candidate_ns, reps: int = 50,
           seed: int = 0, band=(1.0, 2.0), workers: int = 1) -> list[TuneRow]:
    """Log-likelihood spread at ``theta0`` for each candidate ``n``."""
    if reps < 20:
        raise ValueError("tuning needs at least 20 replicates")
    tree = SeedTree(int(seed))
    theta0 = model.check(theta0)
    rows = []
    for k, n in enumerate(candidate_ns):
        cfg = with_n(estimator, n)
        values = np.array([estimate_loglik(cfg, theta0, model, s_obs, tree.derive(k).derive(r),
                                           workers=workers).value for r in range(reps)])
        finite = values[np.isfinite(values)]
        fails = reps - finite.size
        # a failed rep is an infinitely bad estimate, so the spread is unbounded
        std = float(np.std(finite, ddof=1)) if fails == 0 else math.inf
        rows.append(TuneRow(int(n), std, int(fails), reps, band[0] <= std <= band[1],
                            finite.size == 0, float(band[1])))
    return rows
