"""Fading-law protocol, the capacity map and the induced rate-domain law."""

from __future__ import annotations

import math
from typing import TYPE_CHECKING, Any, Protocol, TypeAlias, overload, runtime_checkable

import numpy as np
import numpy.typing as npt

from emslab.errors import DomainError

if TYPE_CHECKING:
    from numpy.typing import ArrayLike

FloatArray: TypeAlias = npt.NDArray[np.float64]
Values: TypeAlias = float | FloatArray

LN2 = math.log(2.0)


def as_values(value: Any, like: Any) -> Values:
    """Return a Python float for scalar input, an array otherwise."""
    if np.ndim(like) == 0:
        return float(value)
    return np.asarray(value, dtype=np.float64)


# ---------------------------------------------------------------------------
# Capacity map C(h) = 1/2 log2(1 + h) and its inverse
# ---------------------------------------------------------------------------


@overload
def capacity(h: float) -> float: ...
@overload
def capacity(h: FloatArray) -> FloatArray: ...
def capacity(h: ArrayLike) -> Values:
    """Rate supported by gain ``h`` in bits per channel use."""
    arr = np.asarray(h, dtype=np.float64)
    if np.any(arr < 0.0):
        msg = "capacity is defined for nonnegative gains only"
        raise DomainError(msg)
    return as_values(0.5 * np.log1p(arr) / LN2, h)


@overload
def gain_from_capacity(c: float) -> float: ...
@overload
def gain_from_capacity(c: FloatArray) -> FloatArray: ...
def gain_from_capacity(c: ArrayLike) -> Values:
    """Gain at which the capacity equals ``c``: 2^{2c} - 1."""
    arr = np.asarray(c, dtype=np.float64)
    if np.any(arr < 0.0):
        msg = "gain_from_capacity is defined for nonnegative rates only"
        raise DomainError(msg)
    with np.errstate(over="ignore"):
        return as_values(np.expm1(2.0 * LN2 * arr), c)


def check_probability(p: ArrayLike) -> FloatArray:
    arr = np.asarray(p, dtype=np.float64)
    if np.any(arr < 0.0) or np.any(arr >= 1.0):
        msg = "quantile needs probabilities in [0, 1)"
        raise DomainError(msg)
    return arr


# ---------------------------------------------------------------------------
# Gain-domain law
# ---------------------------------------------------------------------------


@runtime_checkable
class FadingLaw(Protocol):
    """Distribution of the slot gain H on [0, inf).

    All methods are vectorised: scalars in, floats out; arrays in, arrays out.
    """

    @property
    def label(self) -> str: ...

    @property
    def mean(self) -> float: ...

    def pdf(self, h: ArrayLike) -> Values:
        """Density P_H(h); zero for h < 0."""
        ...

    def pdf_derivative(self, h: ArrayLike) -> Values:
        """Derivative P'_H(h)."""
        ...

    def cdf(self, h: ArrayLike) -> Values:
        """F_H(h) = Pr{H <= h}."""
        ...

    def quantile(self, p: ArrayLike) -> Values:
        """Inverse CDF on [0, 1); raises DomainError for p outside."""
        ...


# ---------------------------------------------------------------------------
# Rate-domain law of C(H)
# ---------------------------------------------------------------------------


class CapacityLaw:
    """Law of C(H) derived from a gain law by exact composition.

    With g(c) = 2^{2c} - 1 the change of variables gives
    P_C(c) = P_H(g(c)) * dg/dc = P_H(g(c)) * 2^{2c+1} ln 2 = P_H(g(c)) * 2 ln 2 * (1 + g(c)).
    """

    def __init__(self, gain_law: FadingLaw) -> None:
        self.gain_law = gain_law

    def cdf(self, r: ArrayLike) -> Values:
        """F_C(r) = F_H(2^{2r} - 1)."""
        return self.gain_law.cdf(gain_from_capacity(np.asarray(r, dtype=np.float64)))

    def pdf(self, c: ArrayLike) -> Values:
        g = gain_from_capacity(np.asarray(c, dtype=np.float64))
        with np.errstate(over="ignore", invalid="ignore"):
            dens = np.asarray(self.gain_law.pdf(g)) * (2.0 * LN2) * (1.0 + g)
        return as_values(np.nan_to_num(dens, nan=0.0, posinf=0.0), c)

    def quantile(self, p: ArrayLike) -> Values:
        return capacity(np.asarray(self.gain_law.quantile(p), dtype=np.float64))

    def upper_rate(self, tail_probability: float) -> float:
        """Rate below which all but ``tail_probability`` of the mass lies."""
        return float(self.quantile(1.0 - tail_probability))
