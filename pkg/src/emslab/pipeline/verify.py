"""Acceptance suite: named checks that cross-validate analysis, solvers and simulation.

Each check returns a :class:`CheckResult`; failures and solver errors are reported on
the result, never raised.
"""

from __future__ import annotations

import json
import logging
import math
import tempfile
import time
from collections.abc import Callable
from dataclasses import dataclass, field
from pathlib import Path

from emslab.config import (
    FredholmSettings,
    MonteCarloSettings,
    OutageSettings,
    PowerDPSettings,
    QuadratureSettings,
)
from emslab.engine import analysis, fredholm, mc, powerdp, ratedp
from emslab.engine.protocols import run_episode, unresolved
from emslab.engine.streams import episode_stream
from emslab.errors import EmslabError
from emslab.fading import build_law, capacity, capacity_law
from emslab.models.channel import ChannelSpec
from emslab.models.enums import FigureKind, Interpolation, ProtocolKind, VerifySuite
from emslab.models.policy import BrqPolicy, EmsPolicy, RatePolicy
from emslab.models.results import TradeoffPoint
from emslab.models.sweep import MonteCarloBlock, ProtocolEntry, SweepConfig
from emslab.pipeline.sweep import run_sweep

logger = logging.getLogger(__name__)

ORDER_SLACK = 2e-3
RESIDUAL_LIMIT = 1e-6
DRIFT_LIMIT = 1e-5
REDUCTION_LIMIT = 5e-3
LHS_LIMIT = 1e-9
CURVATURE_LIMIT = 1e-4
IDENTITY_LIMIT = 1e-12
DECODE_LIMIT = 1e-9
BRQ_LIMIT_TOLERANCE = 1e-3
HARQ_LIMIT_TOLERANCE = 0.05
EMS_GAP_LIMIT = 0.05
ABLATION_LIMIT = 1e-3
LINEAR_FORM_LIMIT = 5e-3


@dataclass(frozen=True)
class SuiteProfile:
    """Sample sizes and solver grids of one suite."""

    episodes: int
    decodability_episodes: int
    power_episodes: int
    sweep_episodes: int
    fredholm: FredholmSettings
    outage: OutageSettings
    powerdp: PowerDPSettings
    power_check: PowerDPSettings
    ablation: PowerDPSettings
    rate_dp_nodes: int = 1024


def suite_profile(suite: VerifySuite) -> SuiteProfile:
    if suite is VerifySuite.FULL:
        return SuiteProfile(
            episodes=10_000_000,
            decodability_episodes=1_000_000,
            power_episodes=1_000_000,
            sweep_episodes=100_000,
            fredholm=FredholmSettings(),
            outage=OutageSettings(),
            powerdp=PowerDPSettings(),
            power_check=PowerDPSettings(),
            ablation=PowerDPSettings(fixed_power=1.0),
        )
    reduced = PowerDPSettings(
        nodes=48,
        rho_scan=24,
        rho_rtol=1e-3,
        tolerance=1e-6,
        lambda_tolerance=1e-2,
        rate_tolerance=2e-2,
    )
    return SuiteProfile(
        episodes=100_000,
        decodability_episodes=100_000,
        power_episodes=100_000,
        sweep_episodes=10_000,
        fredholm=FredholmSettings(),
        outage=OutageSettings(),
        powerdp=reduced,
        power_check=reduced.model_copy(update={"nodes": 128, "lambda_tolerance": 1e-3}),
        ablation=PowerDPSettings(nodes=512, fixed_power=1.0),
    )


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str = ""
    values: dict[str, float] = field(default_factory=dict)
    elapsed: float = 0.0

    def to_json(self) -> str:
        record = {
            "name": self.name,
            "passed": self.passed,
            "detail": self.detail,
            "values": {k: (v if math.isfinite(v) else repr(v)) for k, v in self.values.items()},
            "elapsed": self.elapsed,
        }
        return json.dumps(record, separators=(",", ":"))


@dataclass
class VerifyReport:
    suite: VerifySuite
    checks: list[CheckResult] = field(default_factory=list)
    elapsed: float = 0.0

    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks)

    @property
    def failures(self) -> list[CheckResult]:
        return [check for check in self.checks if not check.passed]

    def write_jsonl(self, path: Path) -> Path:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(
            "".join(check.to_json() + "\n" for check in self.checks), encoding="utf-8"
        )
        return path


@dataclass(frozen=True)
class _Context:
    profile: SuiteProfile
    channel: ChannelSpec
    workers: int

    def mc_settings(self) -> MonteCarloSettings:
        return MonteCarloSettings(workers=self.workers)


def reference_channel() -> ChannelSpec:
    return ChannelSpec(snr_db=10.0)


# ---------------------------------------------------------------------------
# Checks
# ---------------------------------------------------------------------------


def _simulated_verdict(
    ctx: _Context, policy: RatePolicy, point: TradeoffPoint, seed: int
) -> tuple[bool, float, float]:
    estimate = mc.estimate(
        policy, ctx.channel, ctx.profile.episodes, seed,
        workers=ctx.workers, settings=ctx.mc_settings(),
    )
    verdict = mc.compare(estimate, point)
    return verdict.passed, verdict.z_eta, verdict.z_tau


def check_brq_mc(ctx: _Context) -> CheckResult:
    """Analytic BRQ throughput and delay against simulation."""
    values: dict[str, float] = {}
    ok = True
    for seed, T in enumerate((1.5, 2.0, 3.0, 5.0), start=11):
        h_t = analysis.brq_threshold(T, ctx.channel)
        point = TradeoffPoint(
            analysis.BRQ_LABEL, T, analysis.eta_brq(T, ctx.channel), {"h_T": h_t}
        )
        passed, z_eta, z_tau = _simulated_verdict(ctx, BrqPolicy(threshold=h_t), point, seed)
        values[f"z_eta@T={T}"] = z_eta
        values[f"z_tau@T={T}"] = z_tau
        ok &= passed
    return CheckResult("brq_mc", ok, values=values)


def check_ems_fredholm(ctx: _Context) -> CheckResult:
    """EMS renewal solution against simulation, with residual and grid drift."""
    values: dict[str, float] = {}
    ok = True
    settings = ctx.profile.fredholm
    cubic = settings.model_copy(update={"interpolation": Interpolation.CUBIC})
    for seed, (f, T) in enumerate(((2, 2.0), (2, 4.0), (3, 2.0), (3, 4.0)), start=21):
        point = fredholm.solve_rate_unit_for_target(T, f, ctx.channel, settings)
        r = point.params["r"]
        policy = EmsPolicy(rate_unit=r, feedback_levels=f)
        passed, z_eta, z_tau = _simulated_verdict(ctx, policy, point, seed)
        worst_w, worst_m = fredholm.integral_residual(
            fredholm.solve_renewal(r, f, ctx.channel, cubic),
            fredholm.probe_points(r, f, settings.probe_points),
        )
        drift = fredholm.grid_drift(r, f, ctx.channel, settings)
        key = f"f={f},T={T}"
        values.update(
            {f"z_eta@{key}": z_eta, f"z_tau@{key}": z_tau,
             f"residual@{key}": max(worst_w, worst_m), f"drift@{key}": drift}
        )
        ok &= passed and max(worst_w, worst_m) <= RESIDUAL_LIMIT and drift < DRIFT_LIMIT
    return CheckResult("ems_fredholm", ok, values=values)


def check_single_level(ctx: _Context) -> CheckResult:
    """EMS with one feedback level reduces to HARQ-INR."""
    cap = capacity_law(ctx.channel)
    values: dict[str, float] = {}
    ok = True
    for p in (0.2, 0.5, 0.8):
        r = float(cap.quantile(p))
        ems = fredholm.ems_metrics(r, 1, ctx.channel, ctx.profile.fredholm)
        tau = analysis.harq_expected_tau(r, ctx.channel, ctx.profile.outage)
        err = max(
            abs(ems.avg_decoding_time - tau) / tau,
            abs(ems.throughput - r / tau) / (r / tau),
        )
        values[f"rel_err@F={p}"] = err
        ok &= err <= REDUCTION_LIMIT
    return CheckResult("single_level_reduction", ok, values=values)


def _t_eta(T: float, channel: ChannelSpec, settings: QuadratureSettings) -> float:
    return T * analysis.eta_brq(T, channel, settings)


def _curvature_fd(T: float, channel: ChannelSpec, settings: QuadratureSettings) -> float:
    """Central second difference of T*eta_BRQ with one Richardson step."""

    def second(step: float) -> float:
        return (
            _t_eta(T + step, channel, settings)
            - 2.0 * _t_eta(T, channel, settings)
            + _t_eta(T - step, channel, settings)
        ) / step**2

    step = 0.02 * T
    return (4.0 * second(step / 2.0) - second(step)) / 3.0


def check_optimality(ctx: _Context) -> CheckResult:
    """Rayleigh optimality condition and concavity of T*eta_BRQ."""
    values: dict[str, float] = {}
    ok = True
    for h in (0.0, 0.5, 1.0, 5.0, 20.0):
        err = abs(analysis.brq_optimality_lhs(h, ctx.channel) - 1.0 / (1.0 + h))
        values[f"lhs_err@h={h}"] = err
        ok &= err <= LHS_LIMIT
    tight = QuadratureSettings(epsrel=1e-11, epsabs=0.0)
    for T in (1.2, 2.0, 5.0, 20.0):
        exact = analysis.t_eta_second_derivative(T, ctx.channel)
        numeric = _curvature_fd(T, ctx.channel, tight)
        rel = abs(numeric - exact) / abs(exact)
        values[f"d2@T={T}"] = exact
        values[f"d2_rel_err@T={T}"] = rel
        ok &= exact <= 0.0 and rel <= CURVATURE_LIMIT
    return CheckResult("optimality_condition", ok, values=values)


def check_decodability(ctx: _Context) -> CheckResult:
    """Every BRQ and EMS episode stops with nothing left unresolved."""
    law = build_law(ctx.channel)
    T = 3.0
    h_t = analysis.brq_threshold(T, ctx.channel)
    brq = BrqPolicy(threshold=h_t)
    ems_point = fredholm.solve_rate_unit_for_target(T, 2, ctx.channel, ctx.profile.fredholm)
    ems = EmsPolicy(rate_unit=ems_point.params["r"], feedback_levels=2)
    worst_decode = -math.inf
    worst_identity = 0.0
    n = ctx.profile.decodability_episodes
    for index in range(n):
        trace = run_episode(brq, episode_stream(law, 31, index))
        worst_decode = max(worst_decode, trace.max_unresolved_at_stop)
        first = unresolved(trace.rates, trace.gains, 1, trace.tau)
        identity = capacity(h_t) - capacity(trace.gains[-1])
        worst_identity = max(worst_identity, abs(first - identity))
    for index in range(n):
        trace = run_episode(ems, episode_stream(law, 32, index))
        worst_decode = max(worst_decode, trace.max_unresolved_at_stop)
    ok = worst_decode <= DECODE_LIMIT and worst_identity <= IDENTITY_LIMIT
    return CheckResult(
        "decodability", ok,
        detail=f"{2 * n} episodes",
        values={"max_unresolved": worst_decode, "identity_err": worst_identity},
    )


def check_ordering(ctx: _Context) -> CheckResult:
    """BRQ >= EMS4 >= EMS3 >= HARQ-INR-P >= HARQ-INR, all below the ergodic capacity."""
    c_erg = analysis.ergodic_capacity(ctx.channel)
    values: dict[str, float] = {"c_erg": c_erg}
    ok = True
    for T in (2.0, 3.0, 4.5):
        chain = [
            analysis.brq_point(T, ctx.channel).throughput,
            fredholm.solve_rate_unit_for_target(T, 3, ctx.channel, ctx.profile.fredholm).throughput,
            fredholm.solve_rate_unit_for_target(T, 2, ctx.channel, ctx.profile.fredholm).throughput,
            powerdp.eta_harq_inr_p(T, ctx.channel, ctx.profile.powerdp).throughput,
            analysis.eta_harq_inr(T, ctx.channel, ctx.profile.outage).throughput,
        ]
        for name, eta in zip(("brq", "ems4", "ems3", "harq_p", "harq"), chain, strict=True):
            values[f"{name}@T={T}"] = eta
        ordered = all(a >= b * (1.0 - ORDER_SLACK) for a, b in zip(chain, chain[1:], strict=False))
        gap = (chain[0] - chain[2]) / chain[0]
        values[f"ems3_gap@T={T}"] = gap
        ok &= ordered and max(chain) <= c_erg and gap <= EMS_GAP_LIMIT
    return CheckResult("ordering", ok, values=values)


def check_capacity_limit(ctx: _Context) -> CheckResult:
    """Throughput approaches the ergodic capacity as the delay grows."""
    c_erg = analysis.ergodic_capacity(ctx.channel)
    brq_err = abs(analysis.eta_brq(1e6, ctx.channel) - c_erg) / c_erg
    harq = analysis.eta_harq_inr(1e3, ctx.channel, ctx.profile.outage).throughput
    harq_err = abs(harq - c_erg) / c_erg
    ok = brq_err <= BRQ_LIMIT_TOLERANCE and harq_err <= HARQ_LIMIT_TOLERANCE
    return CheckResult(
        "capacity_limit", ok,
        values={"c_erg": c_erg, "brq_rel_err": brq_err, "harq_rel_err": harq_err},
    )


def check_power_dp(ctx: _Context) -> CheckResult:
    """Extracted power policy meets its budget and its dual value; rho = 1 is plain HARQ."""
    rate = float(capacity_law(ctx.channel).quantile(0.6))
    dual = powerdp.dual_solve(rate, ctx.channel, ctx.profile.power_check)
    certificate = powerdp.certify_policy(
        dual, ctx.channel, n_episodes=ctx.profile.power_episodes, seed=41,
        workers=ctx.workers, mc_settings=ctx.mc_settings(),
    )
    ablation = powerdp.dual_solve(rate, ctx.channel, ctx.profile.ablation).value
    tau = analysis.harq_expected_tau(rate, ctx.channel, ctx.profile.outage)
    ablation_err = abs(ablation - tau) / tau
    ok = certificate.passed and ablation_err <= ABLATION_LIMIT
    return CheckResult(
        "power_dp", ok,
        values={
            "R": rate,
            "lambda": dual.lam,
            "dual_value": dual.value,
            "primal_tau": certificate.primal_tau,
            "power_ratio": certificate.power_ratio,
            "gap": certificate.gap,
            "ablation_rel_err": ablation_err,
        },
    )


def check_rate_dp(ctx: _Context) -> CheckResult:
    """Rate DP fixed point is linear on [0, r_A] at the BRQ multiplier."""
    lam = analysis.brq_multiplier(2.0, ctx.channel)
    error = ratedp.linear_form_error(lam, ctx.channel, nodes=ctx.profile.rate_dp_nodes)
    return CheckResult(
        "rate_dp_linear_form", error <= LINEAR_FORM_LIMIT,
        values={"lambda": lam, "rel_sup_err": error},
    )


def check_determinism(ctx: _Context) -> CheckResult:
    """The sweep CSV is byte-identical with one and with several workers."""
    config = SweepConfig(
        channel=ctx.channel,
        figure=FigureKind.THROUGHPUT_VS_DELAY,
        protocols=[
            ProtocolEntry(kind=ProtocolKind.BRQ),
            ProtocolEntry(kind=ProtocolKind.EMS, feedback_cost=3),
            ProtocolEntry(kind=ProtocolKind.HARQ_INR),
        ],
        t_grid=[2.0, 3.0],
        monte_carlo=MonteCarloBlock(enabled=True, episodes=ctx.profile.sweep_episodes, seed=7),
    )
    many = max(ctx.workers, 8)
    with tempfile.TemporaryDirectory(prefix="emslab-verify-") as tmp:
        single = run_sweep(config, out_dir=Path(tmp) / "single", workers=1)
        pooled = run_sweep(config, out_dir=Path(tmp) / "pooled", workers=many)
        same = single.csv_path.read_bytes() == pooled.csv_path.read_bytes()
    return CheckResult(
        "determinism", same, detail=f"1 vs {many} workers", values={"rows": len(single.rows)}
    )


CHECKS: dict[str, Callable[[_Context], CheckResult]] = {
    "brq_mc": check_brq_mc,
    "ems_fredholm": check_ems_fredholm,
    "single_level_reduction": check_single_level,
    "optimality_condition": check_optimality,
    "decodability": check_decodability,
    "ordering": check_ordering,
    "capacity_limit": check_capacity_limit,
    "power_dp": check_power_dp,
    "rate_dp_linear_form": check_rate_dp,
    "determinism": check_determinism,
}


def _run_check(name: str, ctx: _Context) -> CheckResult:
    started = time.perf_counter()
    try:
        result = CHECKS[name](ctx)
    except EmslabError as exc:
        logger.warning("check %s raised: %s", name, exc)
        result = CheckResult(name, False, detail=f"error: {exc}")
    except (ValueError, ArithmeticError) as exc:
        logger.warning("check %s raised: %s", name, exc)
        result = CheckResult(name, False, detail=f"error: {type(exc).__name__}: {exc}")
    result.elapsed = time.perf_counter() - started
    logger.info(
        "check %s: %s (%.1fs)", name, "pass" if result.passed else "FAIL", result.elapsed
    )
    return result


def verify(
    suite: VerifySuite = VerifySuite.FAST,
    *,
    workers: int = 1,
    checks: list[str] | None = None,
    channel: ChannelSpec | None = None,
) -> VerifyReport:
    """Run the acceptance suite, or the named subset of it, and report every check."""
    names = list(CHECKS) if checks is None else checks
    unknown = sorted(set(names) - set(CHECKS))
    if unknown:
        msg = f"unknown check(s): {', '.join(unknown)}"
        raise ValueError(msg)
    ctx = _Context(suite_profile(suite), channel or reference_channel(), max(workers, 1))
    started = time.perf_counter()
    report = VerifyReport(suite)
    for name in names:
        report.checks.append(_run_check(name, ctx))
    report.elapsed = time.perf_counter() - started
    return report
