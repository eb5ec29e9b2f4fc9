"""Rate-selection dynamic program whose value function is linear near the origin.

For a multiplier lam, V(u) = max_{r >= 0} { r + E[1{C <= u + r} (V(u + r - C) - lam)] }.
With v = u + r the maximisation runs over v >= u of

    G(v) = v - lam*F_C(v) + int_0^v P_C(x) V(v - x) dx,

so V(u) = max_{v >= u} G(v) - u. On [0, r_A] the fixed point is A - u with
A = max_r { r + (Cbar(r) - lam*F_C(r)) / (1 - F_C(r)) } and Cbar(r) = int_0^r x P_C(x) dx.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np
from scipy import optimize, signal

from emslab.config import QuadratureSettings
from emslab.engine.analysis import capacity_moment
from emslab.errors import ConvergenceError, DomainError
from emslab.fading import capacity_law, gain_from_capacity
from emslab.fading.base import FloatArray

if TYPE_CHECKING:
    from emslab.models.channel import ChannelSpec

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class LinearOffset:
    """A and its maximiser r_A."""

    offset: float
    rate: float


@dataclass(frozen=True)
class RateValueGrid:
    nodes: FloatArray
    values: FloatArray
    lam: float
    iterations: int
    change: float

    def __call__(self, u: float | FloatArray) -> float | FloatArray:
        out = np.interp(np.asarray(u, dtype=np.float64), self.nodes, self.values)
        return float(out) if np.ndim(out) == 0 else out


def linear_value_offset(
    lam: float,
    channel: ChannelSpec,
    settings: QuadratureSettings | None = None,
    *,
    tail_probability: float = 1e-9,
) -> LinearOffset:
    """(A, r_A) for multiplier ``lam``, by bounded scalar maximisation over r."""
    if not lam > 0.0:
        msg = f"multiplier must be positive, got {lam}"
        raise DomainError(msg)
    cap = capacity_law(channel)
    upper = cap.upper_rate(tail_probability)

    def negative(r: float) -> float:
        stay = float(cap.cdf(r))
        mean_below = capacity_moment(channel, gain_from_capacity(r), settings)
        return -(r + (mean_below - lam * stay) / (1.0 - stay))

    result = optimize.minimize_scalar(
        negative, bounds=(0.0, upper), method="bounded", options={"xatol": 1e-10}
    )
    if not result.success:
        msg = f"linear offset maximisation failed for lam={lam}: {result.message}"
        raise ConvergenceError(msg)
    return LinearOffset(offset=-float(result.fun), rate=float(result.x))


def rate_value_iterate(
    lam: float,
    channel: ChannelSpec,
    *,
    upper: float,
    nodes: int = 1024,
    tolerance: float = 1e-10,
    max_iterations: int = 10_000,
) -> RateValueGrid:
    """Fixed point of the rate DP on a uniform grid over [0, upper]."""
    if not lam > 0.0:
        msg = f"multiplier must be positive, got {lam}"
        raise DomainError(msg)
    cap = capacity_law(channel)
    grid = np.linspace(0.0, upper, nodes)
    step = grid[1] - grid[0]
    half_edges = step * (np.arange(nodes, dtype=np.float64) + 0.5)
    cdf_half = np.asarray(cap.cdf(half_edges), dtype=np.float64)
    masses = np.diff(np.concatenate(([0.0], cdf_half)))
    cdf_grid = np.asarray(cap.cdf(grid), dtype=np.float64)
    # Cell k = i at row i only reaches x = v_i, not (i + 1/2) * step.
    closing = np.zeros(nodes, dtype=np.float64)
    closing[1:] = cdf_grid[1:] - cdf_half[:-1]

    values = np.zeros(nodes, dtype=np.float64)
    for iteration in range(1, max_iterations + 1):
        conv = signal.convolve(masses, values, method="auto")[:nodes]
        integral = conv - masses * values[0] + closing * values[0]
        integral[0] = 0.0
        gain = grid - lam * cdf_grid + integral
        best_ahead = np.maximum.accumulate(gain[::-1])[::-1]
        updated = best_ahead - grid
        change = float(np.max(np.abs(updated - values)))
        values = updated
        if change < tolerance:
            logger.debug("rate DP lam=%g: %d iterations", lam, iteration)
            return RateValueGrid(grid, values, lam, iteration, change)
    msg = f"rate DP for lam={lam} did not converge in {max_iterations} iterations"
    raise ConvergenceError(msg)


def linear_form_error(
    lam: float,
    channel: ChannelSpec,
    *,
    nodes: int = 1024,
    span: float = 2.5,
    settings: QuadratureSettings | None = None,
) -> float:
    """Sup-norm gap between the DP fixed point and A - u on [0, r_A], relative to A."""
    linear = linear_value_offset(lam, channel, settings)
    solved = rate_value_iterate(lam, channel, upper=span * linear.rate, nodes=nodes)
    mask = solved.nodes <= linear.rate
    gap = np.abs(solved.values[mask] - (linear.offset - solved.nodes[mask]))
    return float(np.max(gap)) / abs(linear.offset)
