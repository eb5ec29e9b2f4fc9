"""Run a sweep configuration: analytic trade-off points per grid point and protocol, with
optional Monte Carlo verdicts."""

from __future__ import annotations

import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING

from emslab.config import (
    AppConfig,
    FredholmSettings,
    MonteCarloSettings,
    OutageSettings,
    PowerDPSettings,
    QuadratureSettings,
)
from emslab.engine import analysis, fredholm, mc, powerdp
from emslab.errors import EmslabError
from emslab.models.enums import ProtocolKind
from emslab.models.policy import BrqPolicy, EmsPolicy, HarqInrPolicy

if TYPE_CHECKING:
    from emslab.fading.base import FloatArray
    from emslab.models.channel import ChannelSpec
    from emslab.models.policy import RatePolicy
    from emslab.models.results import EpisodeTrace, RenewalEstimate, TradeoffPoint, Verdict
    from emslab.models.sweep import ProtocolEntry, SweepConfig

logger = logging.getLogger(__name__)

_PARAM_KEYS = {
    ProtocolKind.BRQ: "h_T",
    ProtocolKind.EMS: "r",
    ProtocolKind.HARQ_INR: "R",
    ProtocolKind.HARQ_INR_P: "R",
}


@dataclass(frozen=True)
class SweepDumps:
    """Optional per-row artefacts written next to the CSV."""

    traces: bool = False
    kernels: bool = False
    policy: bool = False


@dataclass(frozen=True)
class Numerics:
    """Resolved solver settings for one sweep."""

    quadrature: QuadratureSettings
    outage: OutageSettings
    fredholm: FredholmSettings
    powerdp: PowerDPSettings
    monte_carlo: MonteCarloSettings


@dataclass
class SweepRow:
    """One protocol at one grid point."""

    point_index: int
    protocol: str
    kind: ProtocolKind
    snr_db: float
    target_t: float
    point: TradeoffPoint | None = None
    estimate: RenewalEstimate | None = None
    verdict: Verdict | None = None
    certified: bool | None = None
    error: str | None = None
    traces: list[EpisodeTrace] = field(default_factory=list)
    kernel: dict[str, FloatArray] = field(default_factory=dict)
    policy_table: dict[str, FloatArray] = field(default_factory=dict)

    @property
    def param(self) -> float | None:
        if self.point is None:
            return None
        return self.point.params.get(_PARAM_KEYS[self.kind])

    @property
    def failed(self) -> bool:
        """A verdict was produced and it did not pass."""
        if self.certified is not None:
            return not self.certified
        return self.verdict is not None and not self.verdict.passed

    @property
    def verdict_text(self) -> str:
        if self.error is not None:
            return f"error: {self.error}"
        if self.certified is None and self.verdict is None:
            return ""
        return "fail" if self.failed else "pass"


@dataclass
class SweepResult:
    """Rows in grid-then-protocol order and the files written for them."""

    rows: list[SweepRow]
    csv_path: Path
    summary_path: Path
    verdicts_path: Path | None = None
    dump_paths: list[Path] = field(default_factory=list)
    elapsed: float = 0.0

    @property
    def failures(self) -> list[SweepRow]:
        return [row for row in self.rows if row.failed]

    @property
    def errors(self) -> list[SweepRow]:
        return [row for row in self.rows if row.error is not None]

    @property
    def passed(self) -> bool:
        return not self.failures and not self.errors


# ---------------------------------------------------------------------------
# Settings
# ---------------------------------------------------------------------------


def resolve_numerics(config: SweepConfig, app_config: AppConfig | None = None) -> Numerics:
    """Sweep overrides on top of the application settings."""
    app_config = app_config or AppConfig()
    override = config.numerics
    mc_settings = app_config.monte_carlo.model_copy(
        update={"episodes": config.monte_carlo.episodes, "seed": config.monte_carlo.seed}
    )
    return Numerics(
        quadrature=override.quadrature or app_config.quadrature,
        outage=override.outage or app_config.outage,
        fredholm=override.fredholm or app_config.fredholm,
        powerdp=override.powerdp or app_config.powerdp,
        monte_carlo=mc_settings,
    )


# ---------------------------------------------------------------------------
# Rows
# ---------------------------------------------------------------------------


def _simulate(
    row: SweepRow, policy: RatePolicy, channel: ChannelSpec, numerics: Numerics,
    dumps: SweepDumps,
) -> None:
    settings = numerics.monte_carlo
    assert row.point is not None
    row.estimate = mc.estimate(
        policy, channel, settings.episodes, settings.seed, settings=settings
    )
    row.verdict = mc.compare(row.estimate, row.point)
    if dumps.traces:
        row.traces = mc.collect_traces(
            policy, channel, settings.trace_limit, settings.seed, max_slots=settings.max_slots
        )


def _brq_row(row: SweepRow, channel: ChannelSpec, numerics: Numerics) -> RatePolicy:
    row.point = analysis.brq_point(row.target_t, channel, numerics.quadrature)
    return BrqPolicy(threshold=row.point.params["h_T"])


def _ems_row(
    row: SweepRow, entry: ProtocolEntry, channel: ChannelSpec, numerics: Numerics,
    dumps: SweepDumps,
) -> RatePolicy:
    f = entry.feedback_levels
    row.point = fredholm.solve_rate_unit_for_target(row.target_t, f, channel, numerics.fredholm)
    r = row.point.params["r"]
    if dumps.kernels:
        solution = fredholm.solve_renewal(r, f, channel, numerics.fredholm)
        row.kernel = {"u": solution.W.nodes, "W": solution.W.values, "M": solution.M.values}
    return EmsPolicy(rate_unit=r, feedback_levels=f)


def _harq_row(row: SweepRow, channel: ChannelSpec, numerics: Numerics) -> RatePolicy | None:
    row.point = analysis.eta_harq_inr(row.target_t, channel, numerics.outage)
    rate = row.point.params["R"]
    return HarqInrPolicy(rate=rate) if rate > 0.0 else None


def _power_row(
    row: SweepRow, channel: ChannelSpec, numerics: Numerics, dumps: SweepDumps,
    simulate: bool,
) -> None:
    row.point, dual = powerdp.solve_point(row.target_t, channel, numerics.powerdp)
    if dual is None:
        return
    if dumps.policy:
        grid = dual.grid
        row.policy_table = {"u": grid.nodes, "J": grid.values, "rho_star": grid.powers}
    if not simulate:
        return
    settings = numerics.monte_carlo
    certificate = powerdp.certify_policy(
        dual, channel, n_episodes=settings.episodes, seed=settings.seed,
        mc_settings=settings,
    )
    row.estimate = certificate.estimate
    row.verdict = mc.compare(certificate.estimate, row.point)
    row.certified = certificate.passed
    row.point.metadata.update(
        {"primal_tau": certificate.primal_tau, "gap_flagged": certificate.flagged}
    )
    if dumps.traces:
        row.traces = mc.collect_traces(
            powerdp.extract_policy(dual.grid), channel, settings.trace_limit, settings.seed,
            max_slots=settings.max_slots,
        )


def compute_row(
    point_index: int,
    entry: ProtocolEntry,
    channel: ChannelSpec,
    target_t: float,
    numerics: Numerics,
    *,
    simulate: bool = False,
    dumps: SweepDumps | None = None,
) -> SweepRow:
    """Analytic point for one protocol, with a verdict when ``simulate`` is set.

    Any emslab error, including a runaway or undecodable simulated episode, is caught and
    recorded on the row so the rest of the sweep still runs.
    """
    dumps = dumps or SweepDumps()
    row = SweepRow(point_index, entry.label, entry.kind, channel.mean_snr_db, target_t)
    try:
        policy: RatePolicy | None
        if entry.kind is ProtocolKind.BRQ:
            policy = _brq_row(row, channel, numerics)
        elif entry.kind is ProtocolKind.EMS:
            policy = _ems_row(row, entry, channel, numerics, dumps)
        elif entry.kind is ProtocolKind.HARQ_INR:
            policy = _harq_row(row, channel, numerics)
        else:
            _power_row(row, channel, numerics, dumps, simulate)
            policy = None
        if simulate and policy is not None:
            _simulate(row, policy, channel, numerics, dumps)
    except EmslabError as exc:
        logger.warning("%s at T=%g (%s): %s", entry.label, target_t, channel.label, exc)
        row.error = str(exc)
    else:
        if row.point is not None:
            logger.info(
                "%s at T=%g (%s): eta=%.6g %s",
                row.protocol, target_t, channel.label, row.point.throughput, row.verdict_text,
            )
    return row


def _grid_point(
    task: tuple[int, ChannelSpec, float, list[ProtocolEntry], Numerics, bool, SweepDumps],
) -> list[SweepRow]:
    index, channel, target_t, entries, numerics, simulate, dumps = task
    return [
        compute_row(index, entry, channel, target_t, numerics, simulate=simulate, dumps=dumps)
        for entry in entries
    ]


# ---------------------------------------------------------------------------
# Driver
# ---------------------------------------------------------------------------


def run_sweep(
    config: SweepConfig,
    *,
    out_dir: Path | None = None,
    workers: int = 1,
    seed: int | None = None,
    dumps: SweepDumps | None = None,
    app_config: AppConfig | None = None,
) -> SweepResult:
    """Evaluate every grid point and protocol, then write CSV, verdicts and summary.

    Parameters
    ----------
    config:
        Validated sweep configuration.
    out_dir:
        Output directory; defaults to the configuration's ``output``.
    workers:
        Processes for grid points. Rows come back in grid order either way.
    seed:
        Replaces the configuration's Monte Carlo seed.
    dumps:
        Which per-row artefacts to write.
    app_config:
        Application settings underneath the sweep's ``numerics`` overrides.
    """
    from emslab.pipeline.export import write_sweep_outputs  # noqa: PLC0415

    started = time.perf_counter()
    dumps = dumps or SweepDumps()
    if seed is not None:
        config = config.model_copy(
            update={"monte_carlo": config.monte_carlo.model_copy(update={"seed": seed})}
        )
    numerics = resolve_numerics(config, app_config)
    simulate = config.monte_carlo.enabled
    tasks = [
        (index, channel, target_t, list(config.protocols), numerics, simulate, dumps)
        for index, (channel, target_t) in enumerate(config.grid_points())
    ]
    logger.info(
        "sweep %s: %d grid point(s) x %d protocol(s), %d worker(s)",
        config.figure, len(tasks), len(config.protocols), workers,
    )
    if workers > 1 and len(tasks) > 1 and config.protocols:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            batches = list(pool.map(_grid_point, tasks))
    else:
        batches = [_grid_point(task) for task in tasks]
    rows = [row for batch in batches for row in batch]

    result = write_sweep_outputs(config, rows, out_dir or config.output, dumps)
    result.elapsed = time.perf_counter() - started
    logger.info(
        "sweep finished in %.1fs: %d row(s), %d failing verdict(s), %d error(s)",
        result.elapsed, len(rows), len(result.failures), len(result.errors),
    )
    return result
