"""Renewal integral equations of the finite-feedback EMS protocol.

For rate unit r and f feedback levels the next-slot rate is the step function
rv(u) = r*min{f-1, floor(f - u/r)} on [0, r*f], and with s(u) = u + rv(u)

    W(u) = rv(u) + int_0^{s(u)} P_C(x) W(s(u) - x) dx      (future cumulative rate)
    M(u) = 1     + int_0^{s(u)} P_C(x) M(s(u) - x) dx      (future slots)

The shift s(u) lands in (r(f-1), r*f] for every u, and on a grid made of f segments with
identical node offsets it maps node k of any segment onto node k of the last segment.
The Nystrom system is therefore solved for Phi(s_k) = int_0^{s_k} P_C(x) W(s_k - x) dx on
the last segment only, and W at any node is rv + Phi at the matching offset.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING

import numpy as np
from numpy.polynomial import legendre
from scipy import interpolate, linalg

from emslab.config import FredholmSettings
from emslab.engine.analysis import ergodic_capacity
from emslab.engine.protocols import composite_rate_feedback
from emslab.errors import ConvergenceError, DomainError, SingularSystemError
from emslab.fading import capacity_law
from emslab.fading.base import FloatArray
from emslab.models.enums import Interpolation
from emslab.models.results import TradeoffPoint

if TYPE_CHECKING:
    from collections.abc import Callable

    from emslab.models.channel import ChannelSpec

logger = logging.getLogger(__name__)

__all__ = [
    "FredholmSolution",
    "GriddedFunction",
    "ems_metrics",
    "grid_drift",
    "integral_residual",
    "solve_M",
    "solve_W",
    "solve_rate_unit_for_target",
    "solve_renewal",
]

_GL_POINTS, _GL_WEIGHTS = legendre.leggauss(4)


def composite_weights(intervals: int, step: float) -> FloatArray:
    """Composite Newton-Cotes weights on ``intervals`` equal intervals.

    Simpson for even counts, Simpson plus a closing 3/8 panel for odd counts >= 3,
    trapezoid for a single interval.
    """
    w = np.zeros(intervals + 1, dtype=np.float64)
    if intervals == 0:
        return w
    if intervals == 1:
        w[:] = step / 2.0
        return w
    simpson = intervals if intervals % 2 == 0 else intervals - 3
    if simpson > 0:
        w[0:simpson + 1:2] += 2.0 * step / 3.0
        w[1:simpson:2] += 4.0 * step / 3.0
        w[0] -= step / 3.0
        w[simpson] -= step / 3.0
    if simpson < intervals:
        w[simpson:] += np.array([1.0, 3.0, 3.0, 1.0]) * 3.0 * step / 8.0
    return w


# ---------------------------------------------------------------------------
# Gridded functions
# ---------------------------------------------------------------------------


@dataclass
class GriddedFunction:
    """A function on [0, r*f] stored per segment ((j-1)r, jr].

    Each breakpoint jr is stored twice: as the last node of segment j (left value) and
    as the first node of segment j+1 (right limit). Evaluation follows the left
    continuity of the composite rate rule.
    """

    rate_unit: float
    levels: int
    segment_nodes: list[FloatArray]
    segment_values: list[FloatArray]
    interpolation: Interpolation = Interpolation.LINEAR
    _splines: list[Callable[[FloatArray], FloatArray]] = field(default_factory=list, repr=False)

    def __post_init__(self) -> None:
        if self.interpolation is Interpolation.CUBIC:
            self._splines = [
                interpolate.CubicSpline(x, y)
                for x, y in zip(self.segment_nodes, self.segment_values, strict=True)
            ]

    @property
    def nodes(self) -> FloatArray:
        return np.concatenate(self.segment_nodes)

    @property
    def values(self) -> FloatArray:
        return np.concatenate(self.segment_values)

    def segment_of(self, u: FloatArray) -> FloatArray:
        """1-based segment index j with u in ((j-1)r, jr]; u = 0 belongs to segment 1."""
        j = np.ceil(np.asarray(u, dtype=np.float64) / self.rate_unit).astype(np.int64)
        return np.clip(j, 1, self.levels)

    def evaluate_on_segment(self, j: int, u: FloatArray) -> FloatArray:
        x = self.segment_nodes[j - 1]
        if self._splines:
            return np.asarray(self._splines[j - 1](u), dtype=np.float64)
        return np.interp(u, x, self.segment_values[j - 1])

    def __call__(self, u: float | FloatArray) -> float | FloatArray:
        arr = np.asarray(u, dtype=np.float64)
        top = self.rate_unit * self.levels
        if np.any(arr < -1e-12 * top) or np.any(arr > top * (1.0 + 1e-12)):
            msg = f"evaluation point outside [0, {top}]"
            raise DomainError(msg)
        flat = np.atleast_1d(arr)
        seg = self.segment_of(flat)
        out = np.empty_like(flat)
        for j in np.unique(seg):
            mask = seg == j
            out[mask] = self.evaluate_on_segment(int(j), flat[mask])
        return float(out[0]) if arr.ndim == 0 else out


# ---------------------------------------------------------------------------
# Solver
# ---------------------------------------------------------------------------


@dataclass
class FredholmSolution:
    """Solved W and M for one (r, f) pair plus diagnostics."""

    rate_unit: float
    levels: int
    W: GriddedFunction
    M: GriddedFunction
    shifts: FloatArray
    phi_w: FloatArray
    phi_m: FloatArray
    contraction: float
    stop_mass: float
    channel: ChannelSpec

    @property
    def nodes_per_segment(self) -> int:
        return self.shifts.size


def _intervals_per_segment(nodes: int, levels: int) -> int:
    m = max(2, math.ceil(nodes / levels))
    return m + (m % 2)


def solve_renewal(
    r: float,
    f: int,
    channel: ChannelSpec,
    settings: FredholmSettings | None = None,
) -> FredholmSolution:
    """Nystrom solution of both renewal equations on a breakpoint-aligned grid."""
    settings = settings or FredholmSettings()
    if not r > 0.0 or f < 1:
        msg = f"need r > 0 and f >= 1, got r={r}, f={f}"
        raise DomainError(msg)
    cap = capacity_law(channel)
    top = r * f
    stop_mass = float(cap.cdf(top))
    if stop_mass > 1.0 - settings.reject_mass:
        msg = f"F_C(r*f) = {stop_mass!r} leaves no stopping mass; parameters rejected"
        raise SingularSystemError(msg)

    m = _intervals_per_segment(settings.nodes, f)
    step = r / m
    offsets = step * np.arange(m + 1, dtype=np.float64)
    shifts = r * (f - 1) + offsets
    full = composite_weights(m, step)

    # Full segments 1..f-1 enter every row with the same weights.
    kernel = np.zeros((m + 1, m + 1), dtype=np.float64)
    source = np.zeros(m + 1, dtype=np.float64)
    for j in range(1, f):
        y = (j - 1) * r + offsets
        block = np.asarray(cap.pdf(shifts[:, None] - y[None, :]), dtype=np.float64) * full
        kernel += block
        source += block.sum(axis=1) * r * (f - j)

    # Last segment: row k integrates over its first k intervals, Toeplitz in k - l.
    density = np.asarray(cap.pdf(offsets), dtype=np.float64)
    for k in range(1, m + 1):
        kernel[k, : k + 1] += composite_weights(k, step) * density[k::-1]

    contraction = float(np.max(kernel.sum(axis=1)))
    system = np.eye(m + 1) - kernel
    try:
        lu = linalg.lu_factor(system, check_finite=True)
    except (linalg.LinAlgError, ValueError) as exc:
        msg = f"Nystrom system for r={r}, f={f} could not be factorised"
        raise SingularSystemError(msg) from exc
    phi_w = linalg.lu_solve(lu, source)
    phi_m = linalg.lu_solve(lu, kernel.sum(axis=1))
    if not (np.all(np.isfinite(phi_w)) and np.all(np.isfinite(phi_m))):
        msg = f"Nystrom system for r={r}, f={f} is singular"
        raise SingularSystemError(msg)

    seg_nodes = [(j - 1) * r + offsets for j in range(1, f + 1)]
    w_values = [r * (f - j) + phi_w for j in range(1, f + 1)]
    m_values = [1.0 + phi_m for _ in range(1, f + 1)]
    logger.debug(
        "Nystrom r=%g f=%d: %d nodes/segment, contraction %.6f, F_C(rf) %.6f",
        r, f, m + 1, contraction, stop_mass,
    )
    return FredholmSolution(
        rate_unit=r,
        levels=f,
        W=GriddedFunction(r, f, seg_nodes, w_values, settings.interpolation),
        M=GriddedFunction(r, f, seg_nodes, m_values, settings.interpolation),
        shifts=shifts,
        phi_w=phi_w,
        phi_m=phi_m,
        contraction=contraction,
        stop_mass=stop_mass,
        channel=channel,
    )


def solve_W(
    r: float, f: int, channel: ChannelSpec, settings: FredholmSettings | None = None
) -> GriddedFunction:
    """Expected future cumulative rate W(u) of an EMS episode."""
    return solve_renewal(r, f, channel, settings).W


def solve_M(
    r: float, f: int, channel: ChannelSpec, settings: FredholmSettings | None = None
) -> GriddedFunction:
    """Expected number of future slots M(u) of an EMS episode."""
    return solve_renewal(r, f, channel, settings).M


# ---------------------------------------------------------------------------
# Residuals and metrics
# ---------------------------------------------------------------------------


def _integral(
    solution: FredholmSolution, fn: GriddedFunction, shift: float
) -> float:
    """int_0^shift P_C(shift - y) fn(y) dy, 4-point Gauss-Legendre per grid cell."""
    cap = capacity_law(solution.channel)
    total = 0.0
    for j, x in enumerate(fn.segment_nodes, start=1):
        left, right = x[:-1], np.minimum(x[1:], shift)
        keep = left < shift
        if not np.any(keep):
            continue
        left, right = left[keep], right[keep]
        half = 0.5 * (right - left)
        mid = 0.5 * (right + left)
        y = mid[:, None] + half[:, None] * _GL_POINTS[None, :]
        values = fn.evaluate_on_segment(j, y.ravel()).reshape(y.shape)
        dens = np.asarray(cap.pdf(np.maximum(shift - y, 0.0)), dtype=np.float64)
        total += float(np.sum(half[:, None] * _GL_WEIGHTS[None, :] * dens * values))
    return total


def probe_points(r: float, f: int, count: int) -> FloatArray:
    """Off-node probe locations spread over [0, r*f]."""
    return r * f * (np.arange(count, dtype=np.float64) + 0.381966) / count


def integral_residual(
    solution: FredholmSolution, probes: FloatArray | None = None
) -> tuple[float, float]:
    """Max absolute residual of the W and M equations at off-node probes."""
    if probes is None:
        probes = probe_points(solution.rate_unit, solution.levels, 7)
    worst_w = 0.0
    worst_m = 0.0
    for u in np.atleast_1d(probes):
        rate = composite_rate_feedback(
            float(u), rate_unit=solution.rate_unit, levels=solution.levels
        )
        shift = float(u) + rate
        res_w = float(solution.W(float(u))) - rate - _integral(solution, solution.W, shift)
        res_m = float(solution.M(float(u))) - 1.0 - _integral(solution, solution.M, shift)
        worst_w = max(worst_w, abs(res_w))
        worst_m = max(worst_m, abs(res_m))
    return worst_w, worst_m


def _label(f: int) -> str:
    return f"EMS{f + 1}"


def ems_metrics(
    r: float,
    f: int,
    channel: ChannelSpec,
    settings: FredholmSettings | None = None,
    *,
    solution: FredholmSolution | None = None,
) -> TradeoffPoint:
    """(T, eta) of finite-feedback EMS from the solved renewal functions.

    The first slot sends r*f; both outer expectations E[1{C <= rf} W(rf - C)] and
    E[1{C <= rf} M(rf - C)] are Phi evaluated at the top shift s = r*f.
    """
    solution = solution or solve_renewal(r, f, channel, settings)
    tau = 1.0 + float(solution.phi_m[-1])
    reward = r * f + float(solution.phi_w[-1])
    return TradeoffPoint(
        label=_label(f),
        avg_decoding_time=tau,
        throughput=reward / tau,
        params={"r": r, "f": float(f)},
        metadata={
            "contraction": solution.contraction,
            "stop_mass": solution.stop_mass,
            "nodes_per_segment": solution.nodes_per_segment,
        },
        ceiling=ergodic_capacity(channel),
    )


def grid_drift(
    r: float, f: int, channel: ChannelSpec, settings: FredholmSettings | None = None
) -> float:
    """Largest relative change of (eta, T) when the node count doubles."""
    settings = settings or FredholmSettings()
    coarse = ems_metrics(r, f, channel, settings)
    fine = ems_metrics(r, f, channel, settings.model_copy(update={"nodes": 2 * settings.nodes}))
    return max(
        abs(fine.throughput - coarse.throughput) / fine.throughput,
        abs(fine.avg_decoding_time - coarse.avg_decoding_time) / fine.avg_decoding_time,
    )


def solve_rate_unit_for_target(
    T: float,
    f: int,
    channel: ChannelSpec,
    settings: FredholmSettings | None = None,
    *,
    max_iterations: int = 200,
) -> TradeoffPoint:
    """EMS operating point whose average decoding time is T (to the target tolerance)."""
    if not T > 1.0:
        msg = f"average decoding time must exceed 1 slot, got {T}"
        raise DomainError(msg)
    settings = settings or FredholmSettings()
    cap = capacity_law(channel)

    def point(r: float) -> TradeoffPoint:
        return ems_metrics(r, f, channel, settings)

    hi = float(cap.quantile(1.0 - 1.0 / T)) / f
    hi_point = point(hi)
    while hi_point.avg_decoding_time < T:
        hi *= 1.5
        hi_point = point(hi)
    lo = 0.0
    best = hi_point
    for _ in range(max_iterations):
        mid = 0.5 * (lo + hi)
        candidate = point(mid)
        if abs(candidate.avg_decoding_time - T) <= settings.target_tolerance:
            logger.info(
                "%s T=%g: r=%.6g eta=%.6g", candidate.label, T, mid, candidate.throughput
            )
            return candidate
        if candidate.avg_decoding_time < T:
            lo = mid
        else:
            hi, best = mid, candidate
        if hi - lo <= 1e-14 * hi:
            break
    msg = (
        f"could not place EMS{f + 1} at T={T}: closest T={best.avg_decoding_time} "
        f"at r={best.params['r']}"
    )
    raise ConvergenceError(msg)
