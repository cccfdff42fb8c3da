"""Per-dimension marginal density models (plain KDE or TKDE)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corestats import KdeModel
from .tkde import Variant, tkde_fit


@dataclass(frozen=True)
class MarginalSpec:
    """``family`` is ``"kde"`` or ``"tkde"``; ``variant`` picks the log pre-transform."""

    family: str = "kde"
    variant: Variant = Variant.NONE
    per_side_nu: bool = True
    bandwidth_rule: str = "robust"

    @classmethod
    def parse(cls, text: str, **kw) -> "MarginalSpec":
        key = str(text).strip().lower()
        if key == "kde":
            return cls("kde", **kw)
        if key == "tkde":
            return cls("tkde", Variant.NONE, **kw)
        if key.startswith("tkde"):
            return cls("tkde", Variant.parse(key), **kw)
        raise ValueError(f"unknown marginal estimator {text!r}")

    @property
    def label(self) -> str:
        return "kde" if self.family == "kde" else f"tkde{self.variant.value}"


def fit_marginal(points, s_obs, spec: MarginalSpec, warm=None):
    if spec.family == "kde":
        return KdeModel.fit(points, spec.bandwidth_rule)
    return tkde_fit(points, s_obs, spec.variant, per_side_nu=spec.per_side_nu,
                    warm_start=warm, bandwidth_rule=spec.bandwidth_rule)


def fit_marginals(sample: np.ndarray, s_obs, spec: MarginalSpec, warm=None) -> list:
    """Fit one model per column; ``warm`` is an optional list of HptFit."""
    d = sample.shape[1]
    warm = warm if warm is not None and len(warm) == d else [None] * d
    obs = [None] * d if s_obs is None else list(np.asarray(s_obs, dtype=float))
    return [fit_marginal(sample[:, j], obs[j], spec, warm[j]) for j in range(d)]


def warm_state(models) -> list | None:
    fits = [getattr(m, "hpt", None) for m in models]
    return None if any(f is None for f in fits) else fits
