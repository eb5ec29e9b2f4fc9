"""HARQ-INR with power adaptation: value iteration, dual search and the trade-off curve.

The transmitter picks a power rho(u) from the remaining information u. For a multiplier
lam the Lagrangian value function satisfies

    J(u) = min_rho { 1 + lam*(rho - 1) + int_0^{(2^{2u}-1)/rho} P_H(h) J(u - C(h*rho)) dh },

with J(u) = 0 for u < 0. Substituting x = C(h*rho) turns the integral into
int_0^u J(u - x) dF_rho(x) with F_rho(x) = F_H((2^{2x} - 1)/rho), the law of the capacity
delivered at power rho. On the node grid each node's integral lumps the mass of F_rho
between half-node boundaries onto the node, so masses in a row add up to F_rho(u_i)
exactly.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING

import numpy as np

from emslab.config import MonteCarloSettings, PowerDPSettings
from emslab.engine import mc
from emslab.engine.analysis import brq_threshold, ergodic_capacity
from emslab.engine.search import INV_PHI, bisect_increasing, golden_maximize
from emslab.errors import ConvergenceError, DomainError
from emslab.fading import build_law, capacity
from emslab.fading.base import LN2, FloatArray
from emslab.models.policy import PowerAdaptedHarqPolicy
from emslab.models.results import RenewalEstimate, TradeoffPoint

if TYPE_CHECKING:
    from emslab.models.channel import ChannelSpec

logger = logging.getLogger(__name__)

LABEL = "HARQ-INR-P"
LAMBDA_FLOOR = 1e-6
GAP_TOLERANCE = 0.02
POWER_SLACK = 1.005


# ---------------------------------------------------------------------------
# Value function grid
# ---------------------------------------------------------------------------


@dataclass
class ValueFunctionGrid:
    """J_lam on nodes of [0, R] with the minimising power at each node."""

    nodes: FloatArray
    values: FloatArray
    powers: FloatArray
    lam: float
    rate: float
    change: float = math.inf
    iterations: int = 0

    def __call__(self, u: float | FloatArray) -> float | FloatArray:
        arr = np.asarray(u, dtype=np.float64)
        out = np.where(arr < 0.0, 0.0, np.interp(arr, self.nodes, self.values))
        return float(out) if out.ndim == 0 else out

    @property
    def value_at_rate(self) -> float:
        return float(self.values[-1])


def geometric_nodes(rate: float, count: int, clustering: float) -> FloatArray:
    """count nodes on [0, rate], clustered near 0 for clustering > 0."""
    t = np.linspace(0.0, 1.0, count)
    if clustering == 0.0:
        return rate * t
    return rate * np.expm1(clustering * t) / math.expm1(clustering)


@dataclass(frozen=True)
class DualResult:
    """Maximiser lam* of the dual and its value J* = J_{lam*}(R)."""

    lam: float
    value: float
    grid: ValueFunctionGrid
    evaluations: int
    expansions: int


# ---------------------------------------------------------------------------
# Dynamic program for one rate R
# ---------------------------------------------------------------------------


class PowerAdaptationDP:
    """Bellman operator and dual search for a fixed first-slot rate R."""

    def __init__(
        self, channel: ChannelSpec, rate: float, settings: PowerDPSettings | None = None
    ) -> None:
        if not rate > 0.0:
            msg = f"rate must be positive, got {rate}"
            raise DomainError(msg)
        self.channel = channel
        self.rate = rate
        self.settings = settings or PowerDPSettings()
        self.law = build_law(channel)
        self.nodes = geometric_nodes(rate, self.settings.nodes, self.settings.clustering)
        n = self.nodes.size
        bounds = np.empty(n + 1, dtype=np.float64)
        bounds[0] = 0.0
        bounds[1:n] = 0.5 * (self.nodes[:-1] + self.nodes[1:])
        bounds[n] = 2.0 * rate + 1.0
        offsets = np.maximum(self.nodes[:, None] - bounds[None, :], 0.0)
        # Gain needed at unit power to deliver each capacity offset.
        self._gains = np.expm1(2.0 * LN2 * offsets)
        self.scan = np.geomspace(
            self.settings.rho_min, self.settings.rho_max, self.settings.rho_scan
        )
        self._scan_masses: list[FloatArray] | None = None
        budget = self.settings.kernel_cache_mb * 2**20
        if self.scan.size * n * n * 8 <= budget:
            self._scan_masses = [self._masses(rho) for rho in self.scan]
        self._last: ValueFunctionGrid | None = None
        self._duals: dict[float, float] = {}

    # -- kernels ------------------------------------------------------------

    def _masses(self, rho: float) -> FloatArray:
        cdf = np.asarray(self.law.cdf(self._gains / rho), dtype=np.float64)
        return cdf[:, :-1] - cdf[:, 1:]

    def _row_values(self, rhos: FloatArray, values: FloatArray, lam: float) -> FloatArray:
        """Q_i(rho_i) = 1 + lam*(rho_i - 1) + sum_k A_ik(rho_i) J_k for per-node powers."""
        cdf = np.asarray(self.law.cdf(self._gains / rhos[:, None]), dtype=np.float64)
        masses = cdf[:, :-1] - cdf[:, 1:]
        return 1.0 + lam * (rhos - 1.0) + masses @ values

    def _scan_values(self, values: FloatArray, lam: float) -> FloatArray:
        rows = []
        for j, rho in enumerate(self.scan):
            masses = self._scan_masses[j] if self._scan_masses is not None else self._masses(rho)
            rows.append(1.0 + lam * (rho - 1.0) + masses @ values)
        return np.vstack(rows)

    # -- Bellman backup -----------------------------------------------------

    def backup(self, grid: ValueFunctionGrid) -> ValueFunctionGrid:
        """One Bellman backup at every node."""
        lam = grid.lam
        values = grid.values
        fixed = self.settings.fixed_power
        if fixed is not None:
            rhos = np.full(values.size, fixed)
            new_values = self._row_values(rhos, values, lam)
        else:
            rhos, new_values = self._minimise(values, lam)
        if not np.all(np.isfinite(new_values)):
            msg = f"Bellman backup produced non-finite values at lam={lam}"
            raise ConvergenceError(msg)
        return ValueFunctionGrid(
            nodes=self.nodes,
            values=new_values,
            powers=rhos,
            lam=lam,
            rate=self.rate,
            change=float(np.max(np.abs(new_values - values))),
            iterations=grid.iterations + 1,
        )

    def _minimise(self, values: FloatArray, lam: float) -> tuple[FloatArray, FloatArray]:
        """Log-grid scan over rho, then vectorised golden-section refinement per node."""
        scan_q = self._scan_values(values, lam)
        idx = np.argmin(scan_q, axis=0)
        n = values.size
        scan_best = scan_q[idx, np.arange(n)]
        log_scan = np.log(self.scan)
        lo = log_scan[np.maximum(idx - 1, 0)]
        hi = log_scan[np.minimum(idx + 1, self.scan.size - 1)]
        x1 = hi - INV_PHI * (hi - lo)
        x2 = lo + INV_PHI * (hi - lo)
        f1 = self._row_values(np.exp(x1), values, lam)
        f2 = self._row_values(np.exp(x2), values, lam)
        width = math.log1p(self.settings.rho_rtol)
        while np.max(hi - lo) > width:
            left = f1 <= f2
            hi = np.where(left, x2, hi)
            lo = np.where(left, lo, x1)
            probe = np.where(left, hi - INV_PHI * (hi - lo), lo + INV_PHI * (hi - lo))
            f_probe = self._row_values(np.exp(probe), values, lam)
            x1, x2, f1, f2 = (
                np.where(left, probe, x2),
                np.where(left, x1, probe),
                np.where(left, f_probe, f2),
                np.where(left, f1, f_probe),
            )
        refined_x = np.where(f1 <= f2, x1, x2)
        refined_f = np.minimum(f1, f2)
        better = refined_f < scan_best
        rhos = np.where(better, np.exp(refined_x), self.scan[idx])
        return rhos, np.where(better, refined_f, scan_best)

    # -- value iteration ----------------------------------------------------

    def initial_grid(
        self, lam: float, initial: ValueFunctionGrid | None = None
    ) -> ValueFunctionGrid:
        if initial is None:
            values = np.zeros_like(self.nodes)
            powers = np.ones_like(self.nodes)
        else:
            values = np.interp(self.nodes, initial.nodes, initial.values)
            powers = np.interp(self.nodes, initial.nodes, initial.powers)
        return ValueFunctionGrid(self.nodes, values, powers, lam, self.rate, iterations=0)

    def value_iterate(
        self, lam: float, *, initial: ValueFunctionGrid | None = None
    ) -> ValueFunctionGrid:
        """Iterate backups until the sup-norm change drops below the tolerance."""
        if not lam > 0.0:
            msg = f"multiplier must be positive, got {lam}"
            raise DomainError(msg)
        grid = self.initial_grid(lam, initial)
        for _ in range(self.settings.max_iterations):
            grid = self.backup(grid)
            if grid.change < self.settings.tolerance:
                logger.debug(
                    "value iteration R=%g lam=%g: %d iterations, J(R)=%.8g",
                    self.rate, lam, grid.iterations, grid.value_at_rate,
                )
                self._last = grid
                return grid
        msg = (
            f"value iteration for R={self.rate}, lam={lam} did not converge in "
            f"{self.settings.max_iterations} iterations (last change {grid.change:.3e})"
        )
        raise ConvergenceError(msg)

    def dual(self, lam: float) -> float:
        """d(lam) = J_lam(R), warm-started from the previous solve."""
        if lam not in self._duals:
            self._duals[lam] = self.value_iterate(lam, initial=self._last).value_at_rate
        return self._duals[lam]

    def dual_solve(self) -> DualResult:
        """Maximise the concave dual over lam in [LAMBDA_FLOOR, lam_hi].

        lam_hi doubles from ``lambda_start`` until the dual decreases; it never passes
        ``lambda_cap`` < 1 because for lam >= 1 the stage cost 1 + lam*(rho - 1) is no
        longer positive and the minimisation is unbounded.
        """
        settings = self.settings
        cap = settings.lambda_cap
        hi = min(settings.lambda_start, cap)
        previous = self.dual(hi)
        expansions = 0
        while hi < cap:
            expansions += 1
            if expansions > settings.max_doublings:
                msg = f"dual bracket for R={self.rate} did not close after {expansions} doublings"
                raise ConvergenceError(msg)
            candidate = min(2.0 * hi, cap)
            value = self.dual(candidate)
            hi = candidate
            if value < previous:
                break
            previous = value
        best = golden_maximize(self.dual, LAMBDA_FLOOR, hi, tol=settings.lambda_tolerance)
        grid = self.value_iterate(best.argument, initial=self._last)
        logger.debug(
            "dual R=%g: lam*=%.6g J*=%.8g (%d evaluations)",
            self.rate, best.argument, best.value, len(self._duals),
        )
        return DualResult(best.argument, best.value, grid, len(self._duals), expansions)


# ---------------------------------------------------------------------------
# Module-level operations
# ---------------------------------------------------------------------------


def bellman_backup(grid: ValueFunctionGrid, dp: PowerAdaptationDP) -> ValueFunctionGrid:
    """Apply one Bellman backup of ``dp`` to ``grid``."""
    return dp.backup(grid)


def value_iterate(
    lam: float,
    R: float,
    channel: ChannelSpec,
    settings: PowerDPSettings | None = None,
    *,
    initial: ValueFunctionGrid | None = None,
) -> ValueFunctionGrid:
    """Converged J_lam on [0, R], iterated from J = 0 unless ``initial`` is given."""
    return PowerAdaptationDP(channel, R, settings).value_iterate(lam, initial=initial)


def dual_solve(
    R: float, channel: ChannelSpec, settings: PowerDPSettings | None = None
) -> DualResult:
    """(lam*, J*) with J* = max_lam J_lam(R), the minimal expected decoding time."""
    return PowerAdaptationDP(channel, R, settings).dual_solve()


def extract_policy(grid: ValueFunctionGrid) -> PowerAdaptedHarqPolicy:
    return PowerAdaptedHarqPolicy(
        rate=grid.rate,
        nodes=tuple(float(u) for u in grid.nodes),
        powers=tuple(float(p) for p in grid.powers),
    )


@dataclass(frozen=True)
class PolicyCertificate:
    """Simulated primal check of an extracted power policy."""

    power_ratio: float
    primal_tau: float
    primal_tau_se: float
    dual_value: float
    estimate: RenewalEstimate = field(repr=False)

    @property
    def gap(self) -> float:
        return abs(self.primal_tau - self.dual_value) / self.dual_value

    @property
    def flagged(self) -> bool:
        return self.gap > GAP_TOLERANCE

    @property
    def passed(self) -> bool:
        """Gap within tolerance and average power within the budget."""
        return not self.flagged and self.power_ratio <= POWER_SLACK


def certify_policy(
    dual: DualResult,
    channel: ChannelSpec,
    *,
    n_episodes: int,
    seed: int,
    workers: int = 1,
    mc_settings: MonteCarloSettings | None = None,
) -> PolicyCertificate:
    """Simulate the policy extracted at lam* and compare its E[tau] with J*."""
    policy = extract_policy(dual.grid)
    estimate = mc.estimate(
        policy, channel, n_episodes, seed, workers=workers, settings=mc_settings
    )
    certificate = PolicyCertificate(
        power_ratio=estimate.power_ratio or 0.0,
        primal_tau=estimate.mean_tau,
        primal_tau_se=estimate.mean_tau_se,
        dual_value=dual.value,
        estimate=estimate,
    )
    if certificate.flagged:
        logger.warning(
            "power policy at R=%g: primal E[tau]=%.5g vs dual %.5g (gap %.2f%%)",
            dual.grid.rate, certificate.primal_tau, dual.value, 100.0 * certificate.gap,
        )
    return certificate


def solve_point(
    T: float, channel: ChannelSpec, settings: PowerDPSettings | None = None
) -> tuple[TradeoffPoint, DualResult | None]:
    """Best R/J*(R) subject to J*(R) <= T, with the dual solution at the chosen rate."""
    if T < 1.0:
        msg = f"average decoding time must be >= 1, got {T}"
        raise DomainError(msg)
    if T <= 1.0 + 1e-12:
        return TradeoffPoint(LABEL, 1.0, 0.0, {"R": 0.0}, {"note": "T=1 forces R=0"}), None
    settings = settings or PowerDPSettings()
    upper = 2.0 * T * capacity(brq_threshold(T, channel))
    solved: dict[float, DualResult] = {}

    def solve(R: float) -> DualResult:
        if R not in solved:
            solved[R] = dual_solve(R, channel, settings)
        return solved[R]

    def duration(R: float) -> float:
        return 1.0 if R <= 0.0 else solve(R).value

    def objective(R: float) -> float:
        return R / duration(R)

    tol = settings.rate_tolerance
    boundary = bisect_increasing(duration, T, 0.0, upper, tol=tol)
    if boundary <= tol:
        msg = f"no positive rate meets T={T} within tolerance {tol}"
        raise ConvergenceError(msg)
    # Quasi-concave objective: if it still rises into the constraint, the boundary wins.
    if objective(boundary) >= objective(0.95 * boundary):
        rate = boundary
    else:
        rate = golden_maximize(objective, tol, boundary, tol=tol).argument
    result = solve(rate)
    logger.info("HARQ-INR-P T=%g: R=%.6g J*=%.6g lam*=%.4g", T, rate, result.value, result.lam)
    point = TradeoffPoint(
        LABEL,
        avg_decoding_time=max(result.value, 1.0),
        throughput=rate / result.value,
        params={"R": rate},
        metadata={"lambda": result.lam, "nodes": int(result.grid.nodes.size)},
        ceiling=ergodic_capacity(channel),
    )
    return point, result


def eta_harq_inr_p(
    T: float, channel: ChannelSpec, settings: PowerDPSettings | None = None
) -> TradeoffPoint:
    """Throughput of power-adapted HARQ-INR at average decoding time T."""
    return solve_point(T, channel, settings)[0]
