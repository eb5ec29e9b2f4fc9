"""Tests for configuration system."""

from __future__ import annotations

from typing import TYPE_CHECKING

import pytest
import tomli_w
from pydantic import ValidationError

from emslab.config import (
    AppConfig,
    FredholmSettings,
    MonteCarloSettings,
    OutageSettings,
    PowerDPSettings,
    QuadratureSettings,
    load_config,
)
from emslab.models.enums import Interpolation

if TYPE_CHECKING:
    from pathlib import Path


def test_quadrature_defaults() -> None:
    q = QuadratureSettings()
    assert q.epsrel == 1e-9
    assert q.limit == 200


def test_outage_defaults() -> None:
    o = OutageSettings()
    assert o.cells == 4096
    assert o.series_cutoff == 1e-9


def test_fredholm_defaults() -> None:
    f = FredholmSettings()
    assert f.nodes == 2048
    assert f.interpolation is Interpolation.LINEAR


def test_powerdp_defaults() -> None:
    p = PowerDPSettings()
    assert p.lambda_cap < 1.0
    assert p.fixed_power is None


def test_monte_carlo_defaults() -> None:
    m = MonteCarloSettings()
    assert m.episodes == 100_000
    assert m.workers == 1


@pytest.mark.parametrize(
    ("cls", "kwargs"),
    [
        (QuadratureSettings, {"epsrel": 0.0}),
        (OutageSettings, {"cells": 8}),
        (FredholmSettings, {"nodes": 4}),
        (PowerDPSettings, {"lambda_cap": 1.0}),
        (PowerDPSettings, {"rho_max": 0.5}),
        (MonteCarloSettings, {"seed": -1}),
        (MonteCarloSettings, {"seed": 2**64}),
    ],
)
def test_settings_rejected(cls: type, kwargs: dict[str, object]) -> None:
    with pytest.raises(ValidationError):
        cls(**kwargs)


def test_app_config_defaults(isolated_home: Path) -> None:
    config = AppConfig()
    assert config.config_dir == isolated_home / ".emslab"
    assert config.config_file == isolated_home / ".emslab" / "config.toml"
    assert config.output_dir.name == "results"


def test_env_override(isolated_home: Path, monkeypatch: pytest.MonkeyPatch) -> None:
    monkeypatch.setenv("EMSLAB_FREDHOLM__NODES", "512")
    monkeypatch.setenv("EMSLAB_MONTE_CARLO__SEED", "42")
    config = AppConfig()
    assert config.fredholm.nodes == 512
    assert config.monte_carlo.seed == 42


def test_groups_ignore_unprefixed_env(monkeypatch: pytest.MonkeyPatch) -> None:
    for name, value in {"NODES": "3", "SEED": "5", "LIMIT": "1", "WORKERS": "9"}.items():
        monkeypatch.setenv(name, value)
    assert FredholmSettings().nodes == 2048
    assert QuadratureSettings().limit == 200
    assert MonteCarloSettings().seed == 1
    assert MonteCarloSettings().workers == 1


def test_group_reads_its_own_prefix(monkeypatch: pytest.MonkeyPatch) -> None:
    monkeypatch.setenv("EMSLAB_FREDHOLM__NODES", "512")
    monkeypatch.setenv("EMSLAB_OUTAGE__CELLS", "1024")
    assert FredholmSettings().nodes == 512
    assert OutageSettings().cells == 1024
    assert PowerDPSettings().nodes == 1024


def test_toml_file_is_read(isolated_home: Path) -> None:
    config_dir = isolated_home / ".emslab"
    config_dir.mkdir()
    (config_dir / "config.toml").write_text(
        tomli_w.dumps({"outage": {"cells": 2048}, "powerdp": {"nodes": 256}}), encoding="utf-8"
    )
    config = AppConfig()
    assert config.outage.cells == 2048
    assert config.powerdp.nodes == 256


def test_env_wins_over_toml(isolated_home: Path, monkeypatch: pytest.MonkeyPatch) -> None:
    config_dir = isolated_home / ".emslab"
    config_dir.mkdir()
    (config_dir / "config.toml").write_text(
        tomli_w.dumps({"outage": {"cells": 2048}}), encoding="utf-8"
    )
    monkeypatch.setenv("EMSLAB_OUTAGE__CELLS", "1024")
    assert AppConfig().outage.cells == 1024


def test_to_toml_dict_drops_none(isolated_home: Path) -> None:
    data = AppConfig().to_toml_dict()
    assert "fixed_power" not in data["powerdp"]
    assert data["fredholm"]["interpolation"] == "linear"
    assert isinstance(data["config_dir"], str)
    assert tomli_w.dumps(data)


def test_load_config_creates_dirs(isolated_home: Path) -> None:
    config = load_config()
    assert config.config_dir.is_dir()
    assert config.output_dir.is_dir()
