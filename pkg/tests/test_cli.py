"""Tests for the CLI entry point."""

from __future__ import annotations

import json
from typing import TYPE_CHECKING

import pytest
from typer.testing import CliRunner

from emslab import __version__
from emslab.cli import EXIT_CONFIG, EXIT_NUMERIC, EXIT_OK, EXIT_VERIFY_FAILED, app
from emslab.engine import analysis, fredholm
from emslab.errors import ConvergenceError
from emslab.models import TradeoffPoint
from emslab.pipeline import verify as verify_module
from emslab.pipeline.verify import CheckResult

if TYPE_CHECKING:
    from pathlib import Path

runner = CliRunner()


# ---------------------------------------------------------------------------
# Helpers
# ---------------------------------------------------------------------------


def _write_sweep(tmp_path: Path, **overrides: object) -> Path:
    data: dict[str, object] = {
        "channel": {"snr_db": 10.0},
        "figure": "throughput_vs_delay",
        "protocols": [{"kind": "brq"}],
        "t_grid": [1.5, 2.0],
        "output": str(tmp_path / "results"),
    }
    data.update(overrides)
    path = tmp_path / "sweep.json"
    path.write_text(json.dumps(data), encoding="utf-8")
    return path


# ---------------------------------------------------------------------------
# Top level
# ---------------------------------------------------------------------------


def test_version_flag() -> None:
    result = runner.invoke(app, ["--version"])
    assert result.exit_code == EXIT_OK
    assert result.output.strip() == f"emslab {__version__}"


def test_no_command_prints_help() -> None:
    result = runner.invoke(app, [])
    assert result.exit_code == EXIT_OK
    assert "sweep" in result.output
    assert "verify" in result.output


# ---------------------------------------------------------------------------
# init-config
# ---------------------------------------------------------------------------


def test_init_config_writes_defaults(isolated_home: Path) -> None:
    result = runner.invoke(app, ["init-config"])
    assert result.exit_code == EXIT_OK
    text = (isolated_home / ".emslab" / "config.toml").read_text(encoding="utf-8")
    assert "[fredholm]" in text
    assert "nodes = 2048" in text


def test_init_config_refuses_overwrite(isolated_home: Path) -> None:
    assert runner.invoke(app, ["init-config"]).exit_code == EXIT_OK
    result = runner.invoke(app, ["init-config"])
    assert result.exit_code == EXIT_CONFIG
    assert "--force" in result.output
    assert runner.invoke(app, ["init-config", "--force"]).exit_code == EXIT_OK


# ---------------------------------------------------------------------------
# sweep
# ---------------------------------------------------------------------------


def test_sweep_writes_csv(tmp_path: Path, isolated_home: Path) -> None:
    result = runner.invoke(app, ["sweep", "--config", str(_write_sweep(tmp_path))])
    assert result.exit_code == EXIT_OK, result.output
    csv_path = tmp_path / "results" / "throughput_vs_delay.csv"
    assert csv_path.exists()
    assert "(2 rows)" in result.output
    assert len(csv_path.read_text(encoding="utf-8").splitlines()) == 3


def test_sweep_out_option(tmp_path: Path, isolated_home: Path) -> None:
    out = tmp_path / "elsewhere"
    result = runner.invoke(app, ["sweep", "-c", str(_write_sweep(tmp_path)), "-o", str(out)])
    assert result.exit_code == EXIT_OK
    assert (out / "summary.md").exists()


def test_sweep_missing_config(tmp_path: Path, isolated_home: Path) -> None:
    result = runner.invoke(app, ["sweep", "--config", str(tmp_path / "absent.json")])
    assert result.exit_code == EXIT_CONFIG
    assert "not found" in result.output


def test_sweep_invalid_config(tmp_path: Path, isolated_home: Path) -> None:
    path = _write_sweep(tmp_path, t_grid=[0.5])
    result = runner.invoke(app, ["sweep", "--config", str(path)])
    assert result.exit_code == EXIT_CONFIG
    assert "t_grid" in result.output


def test_sweep_row_error_exits_numeric(
    tmp_path: Path, isolated_home: Path, monkeypatch: pytest.MonkeyPatch
) -> None:
    def fail(*args: object, **kwargs: object) -> None:
        raise ConvergenceError("no bracket")

    monkeypatch.setattr(fredholm, "solve_rate_unit_for_target", fail)
    path = _write_sweep(tmp_path, protocols=[{"kind": "ems", "feedback_cost": 3}])
    result = runner.invoke(app, ["sweep", "--config", str(path)])
    assert result.exit_code == EXIT_NUMERIC
    assert "no bracket" in result.output


def test_sweep_runaway_episode_exits_numeric(
    tmp_path: Path, isolated_home: Path, monkeypatch: pytest.MonkeyPatch
) -> None:
    monkeypatch.setenv("EMSLAB_MONTE_CARLO__MAX_SLOTS", "1")
    path = _write_sweep(tmp_path, monte_carlo={"enabled": True, "episodes": 10_000, "seed": 2})
    result = runner.invoke(app, ["sweep", "--config", str(path)])
    assert result.exit_code == EXIT_NUMERIC, result.output
    assert "exceeded 1 slots" in result.output
    csv_text = (tmp_path / "results" / "throughput_vs_delay.csv").read_text(encoding="utf-8")
    assert len(csv_text.splitlines()) == 3


def test_sweep_failing_verdict_exits_one(
    tmp_path: Path, isolated_home: Path, monkeypatch: pytest.MonkeyPatch
) -> None:
    real_threshold = analysis.brq_threshold

    def wrong_point(T: float, channel: object, settings: object = None) -> TradeoffPoint:
        h_T = real_threshold(T, channel)  # type: ignore[arg-type]
        return TradeoffPoint("BRQ", T, 5.0, {"h_T": h_T})

    monkeypatch.setattr(analysis, "brq_point", wrong_point)
    path = _write_sweep(
        tmp_path, t_grid=[2.0], monte_carlo={"enabled": True, "episodes": 10_000, "seed": 2}
    )
    result = runner.invoke(app, ["sweep", "--config", str(path), "--seed", "3"])
    assert result.exit_code == EXIT_VERIFY_FAILED
    verdicts = (tmp_path / "results" / "verdicts.jsonl").read_text(encoding="utf-8")
    assert json.loads(verdicts)["verdict"] == "fail"


# ---------------------------------------------------------------------------
# verify
# ---------------------------------------------------------------------------


def test_verify_unknown_check() -> None:
    result = runner.invoke(app, ["verify", "--check", "nonsense"])
    assert result.exit_code == EXIT_CONFIG
    assert "nonsense" in result.output


def test_verify_selected_check(tmp_path: Path, monkeypatch: pytest.MonkeyPatch) -> None:
    monkeypatch.setitem(
        verify_module.CHECKS,
        "capacity_limit",
        lambda ctx: CheckResult("capacity_limit", True, values={"c_erg": 1.7}),
    )
    result = runner.invoke(
        app, ["verify", "--check", "capacity_limit", "--out", str(tmp_path)]
    )
    assert result.exit_code == EXIT_OK, result.output
    assert "1/1 checks passed" in result.output
    record = json.loads((tmp_path / "verify.jsonl").read_text(encoding="utf-8"))
    assert record["name"] == "capacity_limit"
    assert record["values"] == {"c_erg": 1.7}


def test_verify_failure_exits_one(monkeypatch: pytest.MonkeyPatch) -> None:
    monkeypatch.setitem(
        verify_module.CHECKS, "ordering", lambda ctx: CheckResult("ordering", False)
    )
    result = runner.invoke(app, ["verify", "-s", "fast", "--check", "ordering"])
    assert result.exit_code == EXIT_VERIFY_FAILED
    assert "0/1 checks passed" in result.output
