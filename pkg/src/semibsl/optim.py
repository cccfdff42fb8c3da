"""A small Nelder-Mead simplex minimiser.

Standard coefficients: reflection 1, expansion 2, contraction 0.5,
shrink 0.5. Stops when the spread of function values across the simplex
drops below ``ftol`` or after ``max_iter`` iterations.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class SimplexResult:
    x: np.ndarray
    fun: float
    f0: float
    nit: int
    nfev: int
    converged: bool


def nelder_mead(f, x0, step=0.5, max_iter=500, ftol=1e-8,
                alpha=1.0, gamma=2.0, rho=0.5, sigma=0.5) -> SimplexResult:
    x0 = np.asarray(x0, dtype=float)
    k = x0.size
    simplex = np.vstack([x0] + [x0 + step * e for e in np.eye(k)])
    fvals = np.array([f(p) for p in simplex])
    f0 = float(fvals[0])
    nfev = k + 1
    converged = False
    it = 0
    while it < max_iter:
        order = np.argsort(fvals, kind="stable")
        simplex, fvals = simplex[order], fvals[order]
        if np.isfinite(fvals[-1]) and fvals[-1] - fvals[0] < ftol:
            converged = True
            break
        it += 1
        centroid = simplex[:-1].mean(axis=0)
        worst = simplex[-1]
        xr = centroid + alpha * (centroid - worst)
        fr = f(xr)
        nfev += 1
        if fr < fvals[0]:
            xe = centroid + gamma * (xr - centroid)
            fe = f(xe)
            nfev += 1
            if fe < fr:
                simplex[-1], fvals[-1] = xe, fe
            else:
                simplex[-1], fvals[-1] = xr, fr
            continue
        if fr < fvals[-2]:
            simplex[-1], fvals[-1] = xr, fr
            continue
        if fr < fvals[-1]:
            xc = centroid + rho * (xr - centroid)  # outside contraction
            fc = f(xc)
            nfev += 1
            accept = fc <= fr
        else:
            xc = centroid + rho * (worst - centroid)  # inside contraction
            fc = f(xc)
            nfev += 1
            accept = fc < fvals[-1]
        if accept:
            simplex[-1], fvals[-1] = xc, fc
            continue
        best = simplex[0]
        for i in range(1, k + 1):
            simplex[i] = best + sigma * (simplex[i] - best)
            fvals[i] = f(simplex[i])
        nfev += k
    order = np.argsort(fvals, kind="stable")
    return SimplexResult(simplex[order[0]].copy(), float(fvals[order[0]]), f0, it, nfev, converged)
