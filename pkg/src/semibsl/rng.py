"""Splittable, deterministic random streams.

A :class:`SeedTree` is a root seed plus a derivation path. Every randomized
piece of work (a block of simulations, a benchmark replicate, a chain) gets
its own tree, so results never depend on how work is scheduled.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri


@dataclass(frozen=True)
class SeedTree:
    root: int
    path: tuple[int, ...] = ()

    def derive(self, index: int) -> "SeedTree":
        return derive_stream(self, index)

    def generator(self) -> np.random.Generator:
        seq = np.random.SeedSequence(int(self.root), spawn_key=self.path)
        return np.random.Generator(np.random.PCG64(seq))


def derive_stream(tree: SeedTree, index: int) -> SeedTree:
    """Child tree for ``index``; a pure function of ``(root, path, index)``."""
    if index < 0:
        raise ValueError("stream index must be nonnegative")
    return SeedTree(tree.root, tree.path + (int(index),))


def as_generator(rng) -> np.random.Generator:
    """Accept a SeedTree, a Generator or an int seed."""
    if isinstance(rng, SeedTree):
        return rng.generator()
    if isinstance(rng, np.random.Generator):
        return rng
    return SeedTree(int(rng)).generator()


def uniform(gen: np.random.Generator, size=None) -> np.ndarray:
    """Uniform draws on [0, 1)."""
    return gen.random(size)


def gaussian(gen: np.random.Generator, size=None) -> np.ndarray:
    # inverse-CDF: one uniform per draw, no rejection loop
    u = gen.random(size)
    # u == 0 has probability 2**-53; map it to the smallest positive double
    u = np.where(u == 0.0, np.finfo(float).tiny, u)
    return ndtri(u)


def exponential(gen: np.random.Generator, rate: float = 1.0, size=None) -> np.ndarray:
    if not rate > 0:
        raise ValueError("exponential rate must be positive")
    return -np.log1p(-gen.random(size)) / rate
