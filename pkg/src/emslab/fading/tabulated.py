"""Fading law given by a monotone inverse-CDF table with linear interpolation."""

from __future__ import annotations

from typing import TYPE_CHECKING

import numpy as np

from emslab.fading.base import LN2, FloatArray, Values, as_values, check_probability

if TYPE_CHECKING:
    from numpy.typing import ArrayLike


def _capacity_antiderivative(h: FloatArray) -> FloatArray:
    """Antiderivative of C(h): 1/2 [(1+h) log2(1+h) - h/ln 2]."""
    return 0.5 * ((1.0 + h) * np.log1p(h) / LN2 - h / LN2)


class TabulatedLaw:
    """Piecewise-linear quantile Q(p) through knots (p_k, g_k).

    Between distinct gains the law is uniform (piecewise-constant density, zero
    derivative); repeated gains carry an atom of mass p_{k+1} - p_k.
    """

    def __init__(self, probabilities: ArrayLike, gains: ArrayLike) -> None:
        self.probabilities = np.asarray(probabilities, dtype=np.float64)
        self.gains = np.asarray(gains, dtype=np.float64)
        dp = np.diff(self.probabilities)
        dg = np.diff(self.gains)
        self._cell_mass = dp
        with np.errstate(divide="ignore", invalid="ignore"):
            self._cell_density = np.where(dg > 0.0, dp / np.where(dg > 0.0, dg, 1.0), np.inf)

    def __repr__(self) -> str:
        return f"TabulatedLaw(knots={self.gains.size})"

    @property
    def label(self) -> str:
        return f"tabulated({self.gains.size} knots)"

    @property
    def mean(self) -> float:
        return float(np.sum(self._cell_mass * 0.5 * (self.gains[:-1] + self.gains[1:])))

    def _cell_index(self, arr: FloatArray) -> FloatArray:
        # Index k of the last knot with g_k <= h; ties resolve past every repeated gain.
        return np.searchsorted(self.gains, arr, side="right") - 1

    def cdf(self, h: ArrayLike) -> Values:
        arr = np.asarray(h, dtype=np.float64)
        k = self._cell_index(arr)
        n = self.gains.size
        inner = (k >= 0) & (k < n - 1)
        kc = np.clip(k, 0, n - 2)
        g0, g1 = self.gains[kc], self.gains[kc + 1]
        p0, p1 = self.probabilities[kc], self.probabilities[kc + 1]
        with np.errstate(divide="ignore", invalid="ignore"):
            frac = np.where(g1 > g0, (arr - g0) / np.where(g1 > g0, g1 - g0, 1.0), 1.0)
        out = np.where(inner, p0 + frac * (p1 - p0), np.where(k < 0, 0.0, 1.0))
        return as_values(out, h)

    def pdf(self, h: ArrayLike) -> Values:
        arr = np.asarray(h, dtype=np.float64)
        k = self._cell_index(arr)
        n = self.gains.size
        inside = (k >= 0) & (k < n - 1)
        dens = np.where(inside, self._cell_density[np.clip(k, 0, n - 2)], 0.0)
        return as_values(np.where(np.isfinite(dens), dens, 0.0), h)

    def pdf_derivative(self, h: ArrayLike) -> Values:
        return as_values(np.zeros_like(np.asarray(h, dtype=np.float64)), h)

    def quantile(self, p: ArrayLike) -> Values:
        arr = check_probability(p)
        return as_values(np.interp(arr, self.probabilities, self.gains), p)

    def capacity_moment(self, upper: float) -> float:
        """E[C(H) 1{H <= upper}] integrated exactly cell by cell in the quantile domain."""
        p_hi = float(self.cdf(upper))
        probs = self.probabilities
        k_hi = int(np.searchsorted(probs, p_hi, side="right")) - 1
        k_hi = min(k_hi, probs.size - 1)
        p = np.append(probs[: k_hi + 1], p_hi)
        g = np.interp(p, probs, self.gains)
        dp, dg = np.diff(p), np.diff(g)
        anti = _capacity_antiderivative(g)
        flat = dg <= 1e-15 * np.maximum(1.0, g[:-1])
        with np.errstate(divide="ignore", invalid="ignore"):
            sloped = dp * np.diff(anti) / np.where(flat, 1.0, dg)
        flat_part = dp * 0.5 * np.log1p(g[:-1]) / LN2
        return float(np.sum(np.where(flat, flat_part, sloped)))
