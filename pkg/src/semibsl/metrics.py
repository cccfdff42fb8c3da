"""Total variation distances and the density-estimation benchmark."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import norm

from .marginals import MarginalSpec, fit_marginal
from .models import sinh_arcsinh, sinh_arcsinh_pdf
from .rng import SeedTree, gaussian
from .tkde import Variant


def trapezoid_weights(nodes: np.ndarray) -> np.ndarray:
    """Quadrature weights ``w`` with ``sum(w * f) == trapezoid(f, nodes)``."""
    x = np.asarray(nodes, dtype=float)
    if x.ndim != 1 or x.size < 2 or np.any(np.diff(x) <= 0):
        raise ValueError("grid nodes must be strictly increasing")
    dx = np.diff(x)
    w = np.zeros_like(x)
    w[:-1] += 0.5 * dx
    w[1:] += 0.5 * dx
    return w


@dataclass(frozen=True)
class Grid:
    """Quadrature nodes plus weights. 2-D grids are tensor products."""

    axes: tuple
    weights: np.ndarray

    @classmethod
    def uniform(cls, lo: float, hi: float, size: int) -> "Grid":
        x = np.linspace(lo, hi, size)
        return cls((x,), trapezoid_weights(x))

    @classmethod
    def from_nodes(cls, nodes) -> "Grid":
        x = np.asarray(nodes, dtype=float)
        return cls((x,), trapezoid_weights(x))

    @classmethod
    def mapped(cls, u: np.ndarray, forward, dforward) -> "Grid":
        """Nodes ``forward(u)`` for a uniform ``u``; weights carry ``dforward(u)``.

        Integrates ``f(s) ds`` as ``f(forward(u)) forward'(u) du``, which keeps
        the quadrature accurate when ``s`` spans many orders of magnitude.
        """
        u = np.asarray(u, dtype=float)
        return cls((forward(u),), trapezoid_weights(u) * dforward(u))

    @classmethod
    def tensor(cls, x, y) -> "Grid":
        x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
        return cls((x, y), np.outer(trapezoid_weights(x), trapezoid_weights(y)))

    @property
    def nodes(self):
        return self.axes[0] if len(self.axes) == 1 else self.axes

    def same_as(self, other: "Grid") -> bool:
        return (len(self.axes) == len(other.axes)
                and all(np.array_equal(a, b) for a, b in zip(self.axes, other.axes))
                and np.array_equal(self.weights, other.weights))


@dataclass(frozen=True)
class GridDensity:
    """Nonnegative density values on a grid, renormalized to unit mass.

    ``mass`` keeps the integral seen before renormalization.
    """

    grid: Grid
    values: np.ndarray
    mass: float = field(default=1.0)

    @classmethod
    def build(cls, grid: Grid, values, renormalize: bool = True) -> "GridDensity":
        v = np.asarray(values, dtype=float)
        if v.shape != grid.weights.shape:
            raise ValueError("density values do not match the grid")
        if np.any(v < 0) or not np.all(np.isfinite(v)):
            raise ValueError("density values must be finite and nonnegative")
        mass = float(np.sum(grid.weights * v))
        if renormalize:
            if not mass > 0:
                raise ValueError("density has no mass on the grid")
            v = v / mass
        return cls(grid, v, mass)

    def integral(self) -> float:
        return float(np.sum(self.grid.weights * self.values))


def tv_distance(f1: GridDensity, f2: GridDensity) -> float:
    """``1/2 * integral |f1 - f2|`` by the grid's quadrature, clipped to [0, 1]."""
    if not f1.grid.same_as(f2.grid):
        raise ValueError("densities live on different grids")
    tv = 0.5 * float(np.sum(f1.grid.weights * np.abs(f1.values - f2.values)))
    return min(max(tv, 0.0), 1.0)


# --- test densities ----------------------------------------------------------


@dataclass(frozen=True)
class SinhArcsinhDensity:
    """Law of ``sinh((asinh(Y) + eps) / delta)`` with ``Y ~ N(0, 1)``."""

    eps: float
    delta: float
    variant: Variant = Variant.SYMMETRIC

    @property
    def name(self) -> str:
        return f"sas(eps={self.eps:g},delta={self.delta:g})"

    def sample(self, gen, n: int) -> np.ndarray:
        return sinh_arcsinh(gaussian(gen, n), self.eps, self.delta)

    def pdf(self, s):
        return sinh_arcsinh_pdf(s, self.eps, self.delta)

    def grid(self, size: int = 4096, y_limit: float = 9.0) -> Grid:
        # uniform in u = asinh(s); covers |Y| <= y_limit
        a = math.asinh(y_limit)
        u = np.linspace((self.eps - a) / self.delta, (self.eps + a) / self.delta, size)
        return Grid.mapped(u, np.sinh, np.cosh)


@dataclass(frozen=True)
class GaussianMixtureDensity:
    weights: tuple = (0.5, 0.5)
    means: tuple = (3.0, 8.0)
    sds: tuple = (1.0, 1.0)
    variant: Variant = Variant.NONE

    @property
    def name(self) -> str:
        parts = "+".join(f"{w:g}N({m:g},{s:g})" for w, m, s in zip(self.weights, self.means, self.sds))
        return f"mixture({parts})"

    def sample(self, gen, n: int) -> np.ndarray:
        u = gen.random(n)
        z = gaussian(gen, n)
        idx = np.searchsorted(np.cumsum(self.weights), u, side="right")
        idx = np.minimum(idx, len(self.weights) - 1)
        return np.asarray(self.means)[idx] + np.asarray(self.sds)[idx] * z

    def pdf(self, s):
        s = np.asarray(s, dtype=float)
        return sum(w * norm.pdf(s, m, sd) for w, m, sd in zip(self.weights, self.means, self.sds))

    def grid(self, size: int = 4096, y_limit: float = 9.0) -> Grid:
        return Grid.uniform(min(self.means) - y_limit * max(self.sds),
                            max(self.means) + y_limit * max(self.sds), size)


# The TKDE log variant per density is a fixed user choice made by looking at
# the simulated marginals, never selected automatically at benchmark time.
BENCHMARK_DENSITIES = (
    SinhArcsinhDensity(1.3, 0.6, Variant.SYMMETRIC),
    SinhArcsinhDensity(0.0, 0.35, Variant.SYMMETRIC),
    SinhArcsinhDensity(5.0, 1.0, Variant.POSITIVE_SKEW),
    GaussianMixtureDensity(),
    SinhArcsinhDensity(0.0, 0.1, Variant.SYMMETRIC),
    SinhArcsinhDensity(5.0, 0.4, Variant.POSITIVE_SKEW),
)
BENCHMARK_NS = (100, 500, 1000)


def parse_density(text: str):
    """``sas:eps,delta[:tkdeK]`` or ``bimodal``."""
    parts = text.strip().lower().split(":")
    if parts[0] in ("bimodal", "mixture"):
        return GaussianMixtureDensity()
    if parts[0] == "sas" and len(parts) >= 2:
        eps, delta = (float(v) for v in parts[1].split(","))
        variant = Variant.parse(parts[2]) if len(parts) > 2 else Variant.SYMMETRIC
        return SinhArcsinhDensity(eps, delta, variant)
    raise ValueError(f"unknown test density {text!r}")


@dataclass(frozen=True)
class BenchmarkResult:
    density: str
    n: int
    estimator: str
    mean: float
    std: float
    replicates: int
    failures: int
    reference_mass: float


def _replicate_tv(density, estimator: MarginalSpec, n: int, tree: SeedTree, grid: Grid,
                  truth: GridDensity, renormalize: bool):
    x = density.sample(tree.generator(), n)
    try:
        model = fit_marginal(x, None, estimator)
        with np.errstate(under="ignore"):
            values = np.asarray(model.pdf(grid.nodes), dtype=float)
        return tv_distance(GridDensity.build(grid, values, renormalize), truth)
    except ValueError:
        return math.nan


def density_benchmark(density, n: int, replicates: int, estimator: MarginalSpec, rng,
                     grid: Grid | None = None, workers: int = 1,
                     renormalize: bool = True) -> BenchmarkResult:
    """Mean and standard deviation of TV to the true pdf over ``replicates`` fits.

    Replicate ``r`` draws from ``rng.derive(r)``, so two estimators given the same
    ``rng`` see identical data. Failed fits are excluded and counted.

    The default grid covers the whole line. Pass a finite window with
    ``renormalize=False`` to measure TV restricted to that window; the
    reference mass inside it is reported.
    """
    tree = rng if isinstance(rng, SeedTree) else SeedTree(int(rng))
    grid = grid or density.grid()
    truth = GridDensity.build(grid, density.pdf(grid.nodes), renormalize)

    def one(r):
        return _replicate_tv(density, estimator, n, tree.derive(r), grid, truth, renormalize)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            tvs = np.array(list(pool.map(one, range(replicates))))
    else:
        tvs = np.array([one(r) for r in range(replicates)])
    good = tvs[np.isfinite(tvs)]
    mean = float(np.mean(good)) if good.size else math.nan
    std = float(np.std(good, ddof=1)) if good.size > 1 else math.nan
    return BenchmarkResult(density.name, n, estimator.label, mean, std, replicates,
                           int(replicates - good.size), truth.mass)


# Reference-rule bandwidth with a MAD scale; see silverman_bandwidth.
BENCHMARK_BANDWIDTH = "mad"


def benchmark_estimators(density, bandwidth_rule: str = BENCHMARK_BANDWIDTH) -> tuple[MarginalSpec, MarginalSpec]:
    return (MarginalSpec("kde", bandwidth_rule=bandwidth_rule),
            MarginalSpec("tkde", density.variant, bandwidth_rule=bandwidth_rule))


# --- posterior comparison ------------------------------------------------------


def effective_sample_size(x) -> float:
    """ESS of a 1-D chain via Geyer's initial positive sequence."""
    x = np.asarray(x, dtype=float)
    n = x.size
    if n < 4:
        return float(n)
    x = x - x.mean()
    spec = np.fft.rfft(x, 2 * n)
    acov = np.fft.irfft(spec * np.conj(spec))[:n]
    if acov[0] <= 0:
        return float(n)
    rho = acov / acov[0]
    pairs = rho[: n - n % 2].reshape(-1, 2).sum(axis=1)
    stop = np.flatnonzero(pairs <= 0)
    pairs = pairs[: stop[0]] if stop.size else pairs
    tau = 2.0 * float(pairs.sum()) - 1.0
    return n / max(tau, 1.0)


def posterior_bandwidth(x, size: str = "nominal") -> float:
    """Bivariate normal-reference bandwidth for one coordinate.

    ``min(sd, IQR/1.34) * m**(-1/6)``, the two-dimensional Silverman rule.
    ``size="nominal"`` takes ``m`` as the number of draws, which keeps the
    result independent of draw order. ``size="ess"`` uses the effective
    sample size, which suits autocorrelated MCMC output.
    """
    x = np.asarray(x, dtype=float)
    if size == "ess":
        m = effective_sample_size(x)
    elif size == "nominal":
        m = float(x.size)
    else:
        raise ValueError(f"unknown bandwidth size {size!r}")
    sd = float(np.std(x, ddof=1))
    spread_iqr = float(np.subtract(*np.percentile(x, [75, 25]))) / 1.34
    spread = min(sd, spread_iqr) if spread_iqr > 0 else sd
    if not spread > 0:
        raise ValueError("posterior sample has zero spread")
    return spread * m ** (-1.0 / 6.0)


def posterior_grid(samples_a: np.ndarray, samples_b: np.ndarray, size: int = 128, pad: float = 4.0,
                   bandwidth: str = "nominal") -> Grid:
    """Shared tensor grid covering both samples plus ``pad`` bandwidths."""
    lo, hi = [], []
    for k in range(2):
        both = np.concatenate([samples_a[:, k], samples_b[:, k]])
        h = max(posterior_bandwidth(samples_a[:, k], bandwidth),
                posterior_bandwidth(samples_b[:, k], bandwidth))
        lo.append(both.min() - pad * h)
        hi.append(both.max() + pad * h)
    return Grid.tensor(np.linspace(lo[0], hi[0], size), np.linspace(lo[1], hi[1], size))


def kde2_on_grid(samples: np.ndarray, grid: Grid, bandwidth: str = "nominal") -> np.ndarray:
    """Product-Gaussian-kernel KDE of a 2-column sample on a tensor grid."""
    hx = posterior_bandwidth(samples[:, 0], bandwidth)
    hy = posterior_bandwidth(samples[:, 1], bandwidth)
    x = samples[np.lexsort((samples[:, 1], samples[:, 0]))]  # sum order fixed
    gx, gy = grid.axes
    kx = norm.pdf((gx[:, None] - x[None, :, 0]) / hx) / hx
    ky = norm.pdf((gy[:, None] - x[None, :, 1]) / hy) / hy
    return kx @ ky.T / x.shape[0]


def posterior_tv(chain1, chain2, dims=(0, 1), burn_in_frac: float = 0.2, grid: Grid | None = None,
                 grid_size: int = 128, bandwidth: str = "nominal") -> float:
    """TV between 2-D KDEs of two chains' post-burn-in draws on ``dims``.

    ``bandwidth`` is passed to :func:`posterior_bandwidth`.
    """
    a = _thetas(chain1, burn_in_frac)[:, list(dims)]
    b = _thetas(chain2, burn_in_frac)[:, list(dims)]
    if a.shape[0] < 3 or b.shape[0] < 3:
        raise ValueError("empty post-burn-in chain")
    if a.shape[1] != 2 or b.shape[1] != 2:
        raise ValueError("posterior_tv compares exactly two dimensions")
    grid = grid or posterior_grid(a, b, grid_size, bandwidth=bandwidth)
    f1 = GridDensity.build(grid, kde2_on_grid(a, grid, bandwidth))
    f2 = GridDensity.build(grid, kde2_on_grid(b, grid, bandwidth))
    return tv_distance(f1, f2)


def _thetas(chain, burn_in_frac):
    thetas = np.asarray(getattr(chain, "thetas", chain), dtype=float)
    start = int(math.floor(burn_in_frac * thetas.shape[0]))
    return thetas[start:]
