"""Tests for sweep.json schema validation and loading."""

from __future__ import annotations

import copy
import json
from typing import TYPE_CHECKING

import pytest
from jsonschema import ValidationError

from emslab.errors import SweepConfigError
from emslab.models import ProtocolKind
from emslab.models.sweep import load_sweep_config
from emslab.pipeline.validation import sweep_schema, validate_sweep_json

if TYPE_CHECKING:
    from pathlib import Path

VALID_SWEEP: dict[str, object] = {
    "channel": {"family": "rayleigh", "snr_db": 10.0},
    "figure": "throughput_vs_delay",
    "protocols": [
        {"kind": "brq"},
        {"kind": "ems", "feedback_cost": 3},
        {"kind": "harq_inr"},
        {"kind": "harq_inr_p"},
    ],
    "t_grid": [1.5, 2.0, 4.0],
    "monte_carlo": {"enabled": True, "episodes": 10000, "seed": 7},
    "output": "out",
    "numerics": {
        "fredholm": {"nodes": 256, "interpolation": "cubic"},
        "powerdp": {"nodes": 64, "fixed_power": 1.0},
    },
}


def _write(tmp_path: Path, data: object) -> Path:
    path = tmp_path / "sweep.json"
    path.write_text(json.dumps(data), encoding="utf-8")
    return path


# ---------------------------------------------------------------------------
# Schema
# ---------------------------------------------------------------------------


def test_schema_loads() -> None:
    schema = sweep_schema()
    assert schema["required"] == ["channel", "figure"]
    assert sweep_schema() is schema


def test_valid_sweep_passes() -> None:
    validate_sweep_json(VALID_SWEEP)


def test_minimal_sweep_passes() -> None:
    validate_sweep_json({"channel": {"gamma": 1.0}, "figure": "throughput_vs_snr"})


@pytest.mark.parametrize("key", ["channel", "figure"])
def test_missing_required_key(key: str) -> None:
    data = copy.deepcopy(VALID_SWEEP)
    del data[key]
    with pytest.raises(ValidationError):
        validate_sweep_json(data)


@pytest.mark.parametrize(
    "mutate",
    [
        lambda d: d.update(unknown=True),
        lambda d: d["channel"].update(color="blue"),
        lambda d: d["protocols"][0].update(rate=1.0),
        lambda d: d["monte_carlo"].update(workers=4),
        lambda d: d["numerics"].update(solver={}),
        lambda d: d["numerics"]["powerdp"].update(grid=3),
    ],
)
def test_unknown_keys_rejected(mutate: object) -> None:
    data = copy.deepcopy(VALID_SWEEP)
    mutate(data)  # type: ignore[operator]
    with pytest.raises(ValidationError):
        validate_sweep_json(data)


@pytest.mark.parametrize(
    ("path", "value"),
    [
        (("figure",), "throughput_vs_power"),
        (("t_grid",), [0.5, 2.0]),
        (("monte_carlo", "seed"), -1),
        (("channel", "gamma"), 0.0),
        (("numerics", "powerdp", "lambda_cap"), 1.0),
        (("numerics", "fredholm", "interpolation"), "quintic"),
    ],
)
def test_bad_values_rejected(path: tuple[str, ...], value: object) -> None:
    data = copy.deepcopy(VALID_SWEEP)
    target: dict[str, object] = data
    for key in path[:-1]:
        target = target[key]  # type: ignore[assignment]
    target[path[-1]] = value
    with pytest.raises(ValidationError):
        validate_sweep_json(data)


def test_protocol_kind_enum_matches_schema() -> None:
    kinds = sweep_schema()["properties"]["protocols"]["items"]["properties"]["kind"]["enum"]
    assert sorted(kinds) == sorted(kind.value for kind in ProtocolKind)


# ---------------------------------------------------------------------------
# Loading
# ---------------------------------------------------------------------------


def test_load_valid_sweep(tmp_path: Path) -> None:
    config = load_sweep_config(_write(tmp_path, VALID_SWEEP))
    assert [entry.label for entry in config.protocols] == ["BRQ", "EMS3", "HARQ-INR", "HARQ-INR-P"]
    assert config.monte_carlo.seed == 7
    assert config.numerics.fredholm is not None
    assert config.numerics.fredholm.nodes == 256
    assert config.numerics.outage is None


def test_load_missing_file(tmp_path: Path) -> None:
    with pytest.raises(SweepConfigError, match="not found"):
        load_sweep_config(tmp_path / "absent.json")


def test_load_invalid_json(tmp_path: Path) -> None:
    path = tmp_path / "sweep.json"
    path.write_text("{not json", encoding="utf-8")
    with pytest.raises(SweepConfigError, match="invalid JSON"):
        load_sweep_config(path)


def test_load_schema_violation_names_location(tmp_path: Path) -> None:
    data = copy.deepcopy(VALID_SWEEP)
    data["monte_carlo"] = {"enabled": "yes"}
    with pytest.raises(SweepConfigError, match="monte_carlo/enabled"):
        load_sweep_config(_write(tmp_path, data))


def test_load_model_violation(tmp_path: Path) -> None:
    data = copy.deepcopy(VALID_SWEEP)
    data["protocols"] = [{"kind": "ems"}]
    with pytest.raises(SweepConfigError, match="invalid structure"):
        load_sweep_config(_write(tmp_path, data))
