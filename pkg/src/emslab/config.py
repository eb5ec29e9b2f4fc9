"""Application configuration with pydantic-settings + TOML."""

from __future__ import annotations

from pathlib import Path
from typing import Any

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict, TomlConfigSettingsSource

from emslab.models.enums import Interpolation


def _default_config_dir() -> Path:
    return Path.home() / ".emslab"


def _default_output_dir() -> Path:
    return Path.cwd() / "results"


class QuadratureSettings(BaseSettings):
    """Adaptive quadrature tolerances for the closed-form analysis."""

    model_config = SettingsConfigDict(env_prefix="EMSLAB_QUADRATURE__")

    epsrel: float = Field(default=1e-9, gt=0.0, lt=1.0)
    epsabs: float = Field(default=1e-13, ge=0.0)
    tail_probability: float = Field(default=1e-12, gt=0.0, lt=1e-3)
    limit: int = Field(default=200, ge=10)


class OutageSettings(BaseSettings):
    """Lattice sizes and truncation for HARQ-INR outage series."""

    model_config = SettingsConfigDict(env_prefix="EMSLAB_OUTAGE__")

    cells: int = Field(default=4096, ge=16)
    series_cutoff: float = Field(default=1e-9, gt=0.0, lt=1e-2)
    max_terms: int = Field(default=100_000, ge=10)
    max_cell_width: float = Field(default=0.1, gt=0.0)
    max_cells: int = Field(default=65_536, ge=256)


class FredholmSettings(BaseSettings):
    """Nystrom discretization of the EMS renewal equations."""

    model_config = SettingsConfigDict(env_prefix="EMSLAB_FREDHOLM__")

    nodes: int = Field(default=2048, ge=8)
    interpolation: Interpolation = Interpolation.LINEAR
    probe_points: int = Field(default=7, ge=1)
    target_tolerance: float = Field(default=1e-4, gt=0.0)
    reject_mass: float = Field(default=1e-12, gt=0.0)


class PowerDPSettings(BaseSettings):
    """Grid, power search and dual search controls for the power-adaptation DP."""

    model_config = SettingsConfigDict(env_prefix="EMSLAB_POWERDP__")

    nodes: int = Field(default=1024, ge=8)
    clustering: float = Field(default=4.0, ge=0.0)
    rho_min: float = Field(default=1e-6, gt=0.0)
    rho_max: float = Field(default=64.0, gt=1.0)
    rho_scan: int = Field(default=64, ge=4)
    rho_rtol: float = Field(default=1e-6, gt=0.0)
    tolerance: float = Field(default=1e-7, gt=0.0)
    max_iterations: int = Field(default=10_000, ge=1)
    lambda_start: float = Field(default=0.125, gt=0.0)
    lambda_cap: float = Field(default=0.999, gt=0.0, lt=1.0)
    lambda_tolerance: float = Field(default=1e-4, gt=0.0)
    max_doublings: int = Field(default=16, ge=1)
    rate_tolerance: float = Field(default=1e-3, gt=0.0)
    fixed_power: float | None = Field(default=None, gt=0.0)
    kernel_cache_mb: int = Field(default=256, ge=0)


class MonteCarloSettings(BaseSettings):
    """Renewal-reward simulation defaults."""

    model_config = SettingsConfigDict(env_prefix="EMSLAB_MONTE_CARLO__")

    episodes: int = Field(default=100_000, ge=1)
    seed: int = Field(default=1, ge=0, lt=2**64)
    workers: int = Field(default=1, ge=1)
    max_slots: int = Field(default=1_000_000, ge=1)
    chunk_size: int = Field(default=4096, ge=1)
    trace_limit: int = Field(default=100, ge=0)


class AppConfig(BaseSettings):
    """Root application configuration."""

    model_config = SettingsConfigDict(
        env_prefix="EMSLAB_",
        env_nested_delimiter="__",
    )

    config_dir: Path = Field(default_factory=_default_config_dir)
    output_dir: Path = Field(default_factory=_default_output_dir)
    quadrature: QuadratureSettings = Field(default_factory=QuadratureSettings)
    outage: OutageSettings = Field(default_factory=OutageSettings)
    fredholm: FredholmSettings = Field(default_factory=FredholmSettings)
    powerdp: PowerDPSettings = Field(default_factory=PowerDPSettings)
    monte_carlo: MonteCarloSettings = Field(default_factory=MonteCarloSettings)

    @classmethod
    def settings_customise_sources(  # type: ignore[override]
        cls,
        settings_cls: type[BaseSettings],
        **kwargs: Any,
    ) -> tuple[Any, ...]:
        toml_path = _default_config_dir() / "config.toml"
        sources: tuple[Any, ...] = (
            kwargs.get("init_settings"),
            kwargs.get("env_settings"),
        )
        if toml_path.exists():
            sources = (*sources, TomlConfigSettingsSource(settings_cls, toml_file=toml_path))
        return (*sources, kwargs.get("dotenv_settings"), kwargs.get("file_secret_settings"))

    @property
    def config_file(self) -> Path:
        return self.config_dir / "config.toml"

    def ensure_dirs(self) -> None:
        """Create config and output directories if they don't exist."""
        self.config_dir.mkdir(parents=True, exist_ok=True)
        self.output_dir.mkdir(parents=True, exist_ok=True)

    def to_toml_dict(self) -> dict[str, Any]:
        """Plain mapping suitable for ``tomli_w.dumps`` (None values dropped)."""
        return self.model_dump(mode="json", exclude_none=True)


def load_config() -> AppConfig:
    """Load application config, creating defaults if needed."""
    config = AppConfig()
    config.ensure_dirs()
    return config
