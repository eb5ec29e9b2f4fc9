"""Tests for the power-adaptation dynamic program and its dual search."""

from __future__ import annotations

import numpy as np
import pytest

from emslab.config import OutageSettings, PowerDPSettings
from emslab.engine.analysis import eta_harq_inr, harq_expected_tau
from emslab.engine.powerdp import (
    GAP_TOLERANCE,
    LABEL,
    PolicyCertificate,
    PowerAdaptationDP,
    bellman_backup,
    certify_policy,
    dual_solve,
    eta_harq_inr_p,
    extract_policy,
    geometric_nodes,
    solve_point,
    value_iterate,
)
from emslab.errors import DomainError
from emslab.fading import capacity_law
from emslab.models import ChannelSpec
from emslab.models.results import RenewalEstimate


def _estimate(mean_tau: float, mean_power: float) -> RenewalEstimate:
    return RenewalEstimate(
        label=LABEL,
        n_episodes=10_000,
        mean_reward=1.0,
        mean_reward_se=0.0,
        mean_tau=mean_tau,
        mean_tau_se=0.01,
        throughput=1.0 / mean_tau,
        throughput_se=0.0,
        seed=1,
        mean_power=mean_power,
        mean_power_se=0.01,
    )


# ---------------------------------------------------------------------------
# Grid and kernel
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("clustering", [0.0, 4.0])
def test_geometric_nodes(clustering: float) -> None:
    nodes = geometric_nodes(2.0, 17, clustering)
    assert nodes[0] == 0.0
    assert nodes[-1] == pytest.approx(2.0, rel=1e-14)
    assert np.all(np.diff(nodes) > 0.0)


def test_clustering_packs_nodes_near_zero() -> None:
    uniform = geometric_nodes(1.0, 11, 0.0)
    clustered = geometric_nodes(1.0, 11, 4.0)
    assert clustered[1] < uniform[1]


def test_rejects_nonpositive_arguments(
    rayleigh_10db: ChannelSpec, small_powerdp: PowerDPSettings
) -> None:
    with pytest.raises(DomainError):
        PowerAdaptationDP(rayleigh_10db, 0.0, small_powerdp)
    dp = PowerAdaptationDP(rayleigh_10db, 1.0, small_powerdp)
    with pytest.raises(DomainError):
        dp.value_iterate(0.0)
    with pytest.raises(DomainError):
        solve_point(0.5, rayleigh_10db, small_powerdp)


def test_first_backup_is_stage_cost(
    rayleigh_10db: ChannelSpec, small_powerdp: PowerDPSettings
) -> None:
    fixed = small_powerdp.model_copy(update={"fixed_power": 2.0})
    dp = PowerAdaptationDP(rayleigh_10db, 1.5, fixed)
    grid = bellman_backup(dp.initial_grid(0.5), dp)
    np.testing.assert_allclose(grid.values, 1.0 + 0.5 * (2.0 - 1.0))
    np.testing.assert_allclose(grid.powers, 2.0)
    assert grid.iterations == 1


def test_value_function_below_zero_is_zero(
    rayleigh_10db: ChannelSpec, small_powerdp: PowerDPSettings
) -> None:
    grid = value_iterate(0.3, 1.5, rayleigh_10db, small_powerdp)
    assert grid(-0.1) == 0.0
    assert grid.value_at_rate > float(grid(0.0))


# ---------------------------------------------------------------------------
# Fixed-power ablation and dual
# ---------------------------------------------------------------------------


def test_unit_power_reproduces_harq(rayleigh_10db: ChannelSpec) -> None:
    R = float(capacity_law(rayleigh_10db).quantile(0.6))
    settings = PowerDPSettings(nodes=512, rho_scan=4, fixed_power=1.0)
    grid = value_iterate(0.5, R, rayleigh_10db, settings)
    assert grid.value_at_rate == pytest.approx(harq_expected_tau(R, rayleigh_10db), rel=2e-3)


def test_dual_does_not_exceed_fixed_power(
    rayleigh_10db: ChannelSpec, small_powerdp: PowerDPSettings
) -> None:
    R = 2.0
    result = dual_solve(R, rayleigh_10db, small_powerdp)
    assert 0.0 < result.lam < 1.0
    assert 1.0 <= result.value <= harq_expected_tau(R, rayleigh_10db) * 1.05
    assert result.grid.lam == pytest.approx(result.lam)
    assert np.all(result.grid.powers > 0.0)


def test_extract_policy(rayleigh_10db: ChannelSpec, small_powerdp: PowerDPSettings) -> None:
    grid = value_iterate(0.3, 1.5, rayleigh_10db, small_powerdp)
    policy = extract_policy(grid)
    assert policy.label == LABEL
    assert policy.rate == 1.5
    assert len(policy.nodes) == len(policy.powers) == small_powerdp.nodes
    assert policy.powers[-1] == pytest.approx(float(grid.powers[-1]))


# ---------------------------------------------------------------------------
# Certificates
# ---------------------------------------------------------------------------


def test_certificate_flags_gap() -> None:
    good = PolicyCertificate(1.0, 2.01, 0.01, 2.0, _estimate(2.01, 2.01))
    assert good.gap == pytest.approx(0.005)
    assert good.passed
    wide = PolicyCertificate(1.0, 2.0 * (1.0 + 2.0 * GAP_TOLERANCE), 0.01, 2.0, _estimate(2.1, 2.1))
    assert wide.flagged
    assert not wide.passed


def test_certificate_checks_power_budget() -> None:
    certificate = PolicyCertificate(1.02, 2.0, 0.01, 2.0, _estimate(2.0, 2.04))
    assert not certificate.flagged
    assert not certificate.passed


@pytest.mark.slow
def test_certify_extracted_policy(rayleigh_10db: ChannelSpec) -> None:
    settings = PowerDPSettings(nodes=128, rho_scan=24, rho_rtol=1e-3, lambda_tolerance=1e-3)
    result = dual_solve(2.0, rayleigh_10db, settings)
    certificate = certify_policy(result, rayleigh_10db, n_episodes=20_000, seed=3)
    assert certificate.estimate.label == LABEL
    assert certificate.estimate.n_episodes == 20_000
    assert certificate.gap < 0.05


# ---------------------------------------------------------------------------
# Trade-off points
# ---------------------------------------------------------------------------


def test_unit_delay_point(rayleigh_10db: ChannelSpec) -> None:
    point, result = solve_point(1.0, rayleigh_10db)
    assert point.throughput == 0.0
    assert result is None


@pytest.mark.slow
def test_power_adaptation_beats_fixed_power(
    rayleigh_10db: ChannelSpec, small_powerdp: PowerDPSettings
) -> None:
    T = 2.0
    point = eta_harq_inr_p(T, rayleigh_10db, small_powerdp)
    harq = eta_harq_inr(T, rayleigh_10db, OutageSettings(cells=1024))
    assert point.label == LABEL
    assert point.avg_decoding_time <= T + 1e-9
    assert point.throughput > 0.97 * harq.throughput
