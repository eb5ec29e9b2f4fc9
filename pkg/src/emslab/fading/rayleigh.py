"""Rayleigh block fading: exponentially distributed power gain with mean Γ."""

from __future__ import annotations

import math
from typing import TYPE_CHECKING

import numpy as np

from emslab.errors import DomainError
from emslab.fading.base import Values, as_values, check_probability

if TYPE_CHECKING:
    from numpy.typing import ArrayLike


class RayleighLaw:
    """P_H(h) = exp(-h/Γ)/Γ on h >= 0."""

    def __init__(self, gamma: float) -> None:
        if not gamma > 0.0:
            msg = f"Rayleigh mean gain must be positive, got {gamma}"
            raise DomainError(msg)
        self.gamma = float(gamma)

    def __repr__(self) -> str:
        return f"RayleighLaw(gamma={self.gamma!r})"

    @property
    def label(self) -> str:
        return f"rayleigh({10.0 * math.log10(self.gamma):.4g} dB)"

    @property
    def mean(self) -> float:
        return self.gamma

    def pdf(self, h: ArrayLike) -> Values:
        arr = np.asarray(h, dtype=np.float64)
        dens = np.where(arr >= 0.0, np.exp(-np.maximum(arr, 0.0) / self.gamma) / self.gamma, 0.0)
        return as_values(dens, h)

    def pdf_derivative(self, h: ArrayLike) -> Values:
        return as_values(-np.asarray(self.pdf(h)) / self.gamma, h)

    def cdf(self, h: ArrayLike) -> Values:
        arr = np.asarray(h, dtype=np.float64)
        return as_values(-np.expm1(-np.maximum(arr, 0.0) / self.gamma), h)

    def sf(self, h: ArrayLike) -> Values:
        """Survival 1 - F_H(h), accurate in the far tail."""
        arr = np.asarray(h, dtype=np.float64)
        return as_values(np.exp(-np.maximum(arr, 0.0) / self.gamma), h)

    def quantile(self, p: ArrayLike) -> Values:
        arr = check_probability(p)
        return as_values(-self.gamma * np.log1p(-arr), p)
