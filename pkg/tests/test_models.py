"""Tests for emslab data models."""

from __future__ import annotations

import json

import pytest
from pydantic import ValidationError

from emslab.models import (
    BrqPolicy,
    ChannelSpec,
    EmsPolicy,
    EpisodeTrace,
    FadingFamily,
    FigureKind,
    HarqInrPolicy,
    PowerAdaptedHarqPolicy,
    ProtocolKind,
    TradeoffPoint,
)
from emslab.models.channel import MIN_TABLE_KNOTS
from emslab.models.sweep import MIN_VERDICT_EPISODES, ProtocolEntry, SweepConfig


def _table(count: int = MIN_TABLE_KNOTS) -> dict[str, tuple[float, ...]]:
    probs = tuple(i / (count - 1) for i in range(count))
    return {"probabilities": probs, "gains": tuple(10.0 * p for p in probs)}


def _delay_sweep(**overrides: object) -> dict[str, object]:
    data: dict[str, object] = {
        "channel": {"snr_db": 10.0},
        "figure": "throughput_vs_delay",
        "protocols": [{"kind": "brq"}],
        "t_grid": [1.5, 2.0, 3.0],
    }
    data.update(overrides)
    return data


# ---------------------------------------------------------------------------
# Channel
# ---------------------------------------------------------------------------


def test_enums() -> None:
    assert FadingFamily.RAYLEIGH == "rayleigh"
    assert ProtocolKind.HARQ_INR_P == "harq_inr_p"
    assert FigureKind.THROUGHPUT_VS_SNR == "throughput_vs_snr"


def test_rayleigh_channel_by_snr() -> None:
    channel = ChannelSpec(snr_db=10.0)
    assert channel.mean_snr == pytest.approx(10.0)
    assert channel.mean_snr_db == pytest.approx(10.0)
    assert channel.label == "rayleigh(10 dB)"


def test_rayleigh_channel_by_gamma() -> None:
    channel = ChannelSpec(gamma=100.0)
    assert channel.mean_snr_db == pytest.approx(20.0)


@pytest.mark.parametrize(
    "kwargs",
    [
        {},
        {"snr_db": 10.0, "gamma": 10.0},
        {"gamma": 0.0},
        {"snr_db": 10.0, "gains": (1.0,)},
    ],
)
def test_rayleigh_channel_rejects(kwargs: dict[str, object]) -> None:
    with pytest.raises(ValidationError):
        ChannelSpec(**kwargs)  # type: ignore[arg-type]


def test_channel_is_frozen_and_hashable() -> None:
    channel = ChannelSpec(snr_db=10.0)
    with pytest.raises(ValidationError):
        channel.snr_db = 20.0  # type: ignore[misc]
    assert hash(channel) == hash(ChannelSpec(snr_db=10.0))


def test_with_snr_db() -> None:
    assert ChannelSpec(gamma=1.0).with_snr_db(20.0) == ChannelSpec(snr_db=20.0)
    tabulated = ChannelSpec(family=FadingFamily.TABULATED, **_table())
    with pytest.raises(ValueError, match="rayleigh"):
        tabulated.with_snr_db(10.0)


def test_tabulated_channel() -> None:
    channel = ChannelSpec(family=FadingFamily.TABULATED, **_table())
    assert channel.label == f"tabulated({MIN_TABLE_KNOTS} knots)"
    assert channel.mean_snr == pytest.approx(5.0, rel=1e-6)


@pytest.mark.parametrize(
    ("table", "message"),
    [
        (_table(16), "at least"),
        ({**_table(), "gains": (1.0,) * (MIN_TABLE_KNOTS - 1) + (0.5,)}, "nondecreasing"),
        ({**_table(), "probabilities": (0.1,) + _table()["probabilities"][1:]}, "from 0 to 1"),
        ({"probabilities": _table()["probabilities"]}, "needs"),
    ],
)
def test_tabulated_channel_rejects(table: dict[str, object], message: str) -> None:
    with pytest.raises(ValidationError, match=message):
        ChannelSpec(family=FadingFamily.TABULATED, **table)  # type: ignore[arg-type]


# ---------------------------------------------------------------------------
# Policies and results
# ---------------------------------------------------------------------------


def test_policy_labels() -> None:
    assert BrqPolicy(threshold=1.0).label == "BRQ"
    assert EmsPolicy(rate_unit=0.5, feedback_levels=4).label == "EMS5"
    assert EmsPolicy(rate_unit=0.5, feedback_levels=4).first_rate == 2.0
    assert HarqInrPolicy(rate=1.0).label == "HARQ-INR"


def test_power_policy_table_checks() -> None:
    with pytest.raises(ValidationError, match="matching"):
        PowerAdaptedHarqPolicy(rate=1.0, nodes=(0.0,), powers=(1.0,))
    with pytest.raises(ValidationError, match="increasing"):
        PowerAdaptedHarqPolicy(rate=1.0, nodes=(0.0, 0.0), powers=(1.0, 1.0))
    with pytest.raises(ValidationError, match="positive"):
        PowerAdaptedHarqPolicy(rate=1.0, nodes=(0.0, 1.0), powers=(1.0, 0.0))


def test_tradeoff_point_bounds() -> None:
    with pytest.raises(ValueError, match=">= 1"):
        TradeoffPoint("BRQ", 0.5, 1.0)
    with pytest.raises(ValueError, match="nonnegative"):
        TradeoffPoint("BRQ", 2.0, -0.1)


def test_tradeoff_point_ceiling() -> None:
    with pytest.raises(ValueError, match="ergodic capacity"):
        TradeoffPoint("BRQ", 2.0, 1.01, ceiling=1.0)
    assert TradeoffPoint("BRQ", 2.0, 1.00005, ceiling=1.0).throughput == 1.00005
    assert TradeoffPoint("BRQ", 2.0, 5.0).ceiling is None


def test_episode_trace_lengths() -> None:
    with pytest.raises(ValueError, match="length tau"):
        EpisodeTrace("BRQ", (1.0,), (1.0, 0.5), (1.0,), (1.0,), 1, 1.0, 0.0)
    trace = EpisodeTrace("BRQ", (1.0,), (1.0,), (1.0,), (1.0,), 1, 1.0, -0.5)
    assert json.loads(trace.to_json())["tau"] == 1


# ---------------------------------------------------------------------------
# Sweep configuration
# ---------------------------------------------------------------------------


def test_protocol_entry_labels() -> None:
    assert ProtocolEntry(kind=ProtocolKind.EMS, feedback_cost=3).label == "EMS3"
    assert ProtocolEntry(kind=ProtocolKind.EMS, feedback_cost=3).feedback_levels == 2
    assert ProtocolEntry(kind=ProtocolKind.HARQ_INR_P).label == "HARQ-INR-P"


def test_protocol_entry_cost_rules() -> None:
    with pytest.raises(ValidationError, match="feedback_cost"):
        ProtocolEntry(kind=ProtocolKind.EMS)
    with pytest.raises(ValidationError, match="only applies"):
        ProtocolEntry(kind=ProtocolKind.BRQ, feedback_cost=3)
    with pytest.raises(ValidationError):
        ProtocolEntry(kind=ProtocolKind.EMS, feedback_cost=1)


def test_delay_sweep_grid_points() -> None:
    config = SweepConfig.model_validate(_delay_sweep())
    points = config.grid_points()
    assert [t for _, t in points] == [1.5, 2.0, 3.0]
    assert all(channel == ChannelSpec(snr_db=10.0) for channel, _ in points)
    assert not config.monte_carlo.enabled


def test_snr_sweep_grid_points() -> None:
    config = SweepConfig.model_validate(
        {
            "channel": {"snr_db": 0.0},
            "figure": "throughput_vs_snr",
            "snr_grid_db": [0.0, 10.0],
            "target_t": 2.0,
        }
    )
    points = config.grid_points()
    assert [channel.snr_db for channel, _ in points] == [0.0, 10.0]
    assert {t for _, t in points} == {2.0}


@pytest.mark.parametrize(
    ("overrides", "message"),
    [
        ({"t_grid": None}, "t_grid"),
        ({"t_grid": [1.0, 2.0]}, "exceed 1"),
        ({"t_grid": [2.0, 1.5]}, "strictly increasing"),
        ({"t_grid": []}, "must not be empty"),
        ({"figure": "throughput_vs_snr"}, "snr_grid_db"),
        ({"monte_carlo": {"enabled": True, "episodes": MIN_VERDICT_EPISODES - 1}}, "at least"),
        ({"extra": 1}, "extra"),
    ],
)
def test_sweep_config_rejects(overrides: dict[str, object], message: str) -> None:
    with pytest.raises(ValidationError, match=message):
        SweepConfig.model_validate(_delay_sweep(**overrides))


def test_snr_sweep_needs_rayleigh() -> None:
    with pytest.raises(ValidationError, match="rayleigh"):
        SweepConfig.model_validate(
            {
                "channel": {"family": "tabulated", **_table()},
                "figure": "throughput_vs_snr",
                "snr_grid_db": [0.0],
                "target_t": 2.0,
            }
        )
