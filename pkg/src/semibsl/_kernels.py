"""Compiled inner loops for the HPT profile likelihood."""

import math

import numba
import numpy as np

LOG2 = math.log(2.0)
LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


@numba.njit(cache=True)
def side_profile(c, psi, lam):
    """Profile log-likelihood of one median side, nu at its side-local MLE."""
    m = c.size
    sum_g2 = 0.0
    sum_logj = 0.0
    log_psi = math.log(psi)
    for i in range(m):
        a = abs(psi * c[i])
        if a == 0.0:
            # G = 0, log J = 0
            continue
        e2 = math.exp(-2.0 * a)
        log_sech = -a + LOG2 - math.log1p(e2)
        if a < 20.0:
            # algebraic forms: sinh^2 = (1-e2)^2/(4 e2), sech^2 = 4 e2/(1+e2)^2
            sech2 = 4.0 * e2 / ((1.0 + e2) * (1.0 + e2))
            sinh2 = (1.0 - e2) * (1.0 - e2) / (4.0 * e2)
            sum_g2 += sinh2 * math.exp(2.0 * lam * log_sech) / (psi * psi)
        else:
            sech2 = math.exp(2.0 * log_sech)
            logg = a + math.log1p(-e2) - LOG2 + lam * log_sech - log_psi
            if logg > 354.0:
                return -math.inf
            sum_g2 += math.exp(2.0 * logg)
        sum_logj += math.log((1.0 - lam) + lam * sech2) + (lam - 1.0) * log_sech
    m2 = sum_g2 / m
    if not (m2 > 0.0) or not math.isfinite(m2):
        return -math.inf
    return -0.5 * m - m * LOG_SQRT_2PI - 0.5 * m * math.log(m2) + sum_logj


@numba.njit(cache=True)
def _neg_profile(z0, z1, c):
    zc0 = min(max(z0, -300.0), 300.0)
    zc1 = min(max(z1, -18.0), 18.0)
    v = side_profile(c, math.exp(zc0), math.tanh(zc1))
    if math.isfinite(v):
        return -v
    return math.inf


@numba.njit(cache=True)
def fit_side_nm(c, x0, x1, step, max_iter, ftol):
    """Nelder-Mead on (log psi, atanh lambda); returns (z0, z1, f, f_init, converged).

    Same coefficients and stopping rule as :func:`semibsl.optim.nelder_mead`.
    """
    xs = np.empty((3, 2))
    fs = np.empty(3)
    xs[0, 0], xs[0, 1] = x0, x1
    xs[1, 0], xs[1, 1] = x0 + step, x1
    xs[2, 0], xs[2, 1] = x0, x1 + step
    for i in range(3):
        fs[i] = _neg_profile(xs[i, 0], xs[i, 1], c)
    f_init = fs[0]
    converged = False
    it = 0
    while True:
        # insertion sort of 3 vertices, stable
        for i in range(1, 3):
            j = i
            while j > 0 and fs[j] < fs[j - 1]:
                tf = fs[j]; fs[j] = fs[j - 1]; fs[j - 1] = tf
                t0 = xs[j, 0]; xs[j, 0] = xs[j - 1, 0]; xs[j - 1, 0] = t0
                t1 = xs[j, 1]; xs[j, 1] = xs[j - 1, 1]; xs[j - 1, 1] = t1
                j -= 1
        if math.isfinite(fs[2]) and fs[2] - fs[0] < ftol:
            converged = True
            break
        if it >= max_iter:
            break
        it += 1
        cx = 0.5 * (xs[0, 0] + xs[1, 0])
        cy = 0.5 * (xs[0, 1] + xs[1, 1])
        rx = cx + (cx - xs[2, 0])
        ry = cy + (cy - xs[2, 1])
        fr = _neg_profile(rx, ry, c)
        if fr < fs[0]:
            ex = cx + 2.0 * (rx - cx)
            ey = cy + 2.0 * (ry - cy)
            fe = _neg_profile(ex, ey, c)
            if fe < fr:
                xs[2, 0], xs[2, 1], fs[2] = ex, ey, fe
            else:
                xs[2, 0], xs[2, 1], fs[2] = rx, ry, fr
            continue
        if fr < fs[1]:
            xs[2, 0], xs[2, 1], fs[2] = rx, ry, fr
            continue
        if fr < fs[2]:
            kx = cx + 0.5 * (rx - cx)
            ky = cy + 0.5 * (ry - cy)
            fk = _neg_profile(kx, ky, c)
            accept = fk <= fr
        else:
            kx = cx + 0.5 * (xs[2, 0] - cx)
            ky = cy + 0.5 * (xs[2, 1] - cy)
            fk = _neg_profile(kx, ky, c)
            accept = fk < fs[2]
        if accept:
            xs[2, 0], xs[2, 1], fs[2] = kx, ky, fk
            continue
        for i in range(1, 3):
            xs[i, 0] = xs[0, 0] + 0.5 * (xs[i, 0] - xs[0, 0])
            xs[i, 1] = xs[0, 1] + 0.5 * (xs[i, 1] - xs[0, 1])
            fs[i] = _neg_profile(xs[i, 0], xs[i, 1], c)
    best = 0
    for i in range(1, 3):
        if fs[i] < fs[best]:
            best = i
    return xs[best, 0], xs[best, 1], fs[best], f_init, converged


@numba.njit(cache=True)
def _cms_symmetric(alpha, scale, u, w):
    # Chambers-Mallows-Stuck, beta = 0
    v = math.pi * (u - 0.5)
    if alpha == 1.0:
        return scale * math.tan(v)
    x = (math.sin(alpha * v) / math.cos(v) ** (1.0 / alpha)
         * (math.cos(v - alpha * v) / w) ** ((1.0 - alpha) / alpha))
    return scale * x


@numba.njit(cache=True)
def toads_paths(alpha, xi, p0, u_move, w_move, u_back, u_pick):
    """Refuge paths given pre-drawn uniforms/exponentials of shape (n_days - 1, lanes)."""
    steps, lanes = u_move.shape
    hist = np.zeros((steps + 1, lanes))
    for t in range(1, steps + 1):
        for k in range(lanes):
            if u_back[t - 1, k] < p0:
                j = int(u_pick[t - 1, k] * t)
                if j > t - 1:
                    j = t - 1
                hist[t, k] = hist[j, k]
            else:
                hist[t, k] = hist[t - 1, k] + _cms_symmetric(
                    alpha, xi, u_move[t - 1, k], w_move[t - 1, k])
    return hist
