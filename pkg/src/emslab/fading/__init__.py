"""Fading laws of the slot gain and the induced capacity law."""

from __future__ import annotations

from collections.abc import Callable
from functools import lru_cache

import numpy as np

from emslab.fading.base import (
    CapacityLaw,
    FadingLaw,
    capacity,
    gain_from_capacity,
)
from emslab.fading.rayleigh import RayleighLaw
from emslab.fading.tabulated import TabulatedLaw
from emslab.models.channel import MIN_TABLE_KNOTS, ChannelSpec
from emslab.models.enums import FadingFamily

__all__ = [
    "CapacityLaw",
    "FadingLaw",
    "RayleighLaw",
    "TabulatedLaw",
    "build_law",
    "capacity",
    "capacity_law",
    "gain_from_capacity",
    "tabulated_from_ppf",
]


@lru_cache(maxsize=64)
def build_law(spec: ChannelSpec) -> FadingLaw:
    """Return the gain law described by ``spec`` (memoised; laws are immutable)."""
    if spec.family is FadingFamily.RAYLEIGH:
        return RayleighLaw(spec.mean_snr)
    return TabulatedLaw(spec.probabilities or (), spec.gains or ())


@lru_cache(maxsize=64)
def capacity_law(spec: ChannelSpec) -> CapacityLaw:
    return CapacityLaw(build_law(spec))


def tabulated_from_ppf(
    ppf: Callable[[np.ndarray], np.ndarray],
    *,
    knots: int = MIN_TABLE_KNOTS,
    tail_probability: float = 1e-12,
) -> ChannelSpec:
    """Tabulate a continuous law from its quantile function.

    Knots are placed uniformly in probability, with the last interior knot moved to
    ``1 - tail_probability`` so the table ends at a finite gain.
    """
    probs = np.linspace(0.0, 1.0, knots)
    inner = probs.copy()
    inner[-1] = 1.0 - tail_probability
    gains = np.maximum.accumulate(np.asarray(ppf(inner), dtype=np.float64))
    gains[0] = max(gains[0], 0.0)
    return ChannelSpec(
        family=FadingFamily.TABULATED,
        probabilities=tuple(float(p) for p in probs),
        gains=tuple(float(g) for g in gains),
    )
