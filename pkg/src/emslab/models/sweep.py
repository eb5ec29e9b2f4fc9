"""Sweep configuration - one JSON document describing a figure family to reproduce."""

from __future__ import annotations

import json
from pathlib import Path

import jsonschema
from pydantic import BaseModel, ConfigDict, Field, model_validator
from pydantic import ValidationError as PydanticValidationError

from emslab.config import (
    FredholmSettings,
    OutageSettings,
    PowerDPSettings,
    QuadratureSettings,
)
from emslab.errors import SweepConfigError
from emslab.models.channel import ChannelSpec
from emslab.models.enums import FigureKind, ProtocolKind

MIN_VERDICT_EPISODES = 10_000

_LABELS = {
    ProtocolKind.BRQ: "BRQ",
    ProtocolKind.HARQ_INR: "HARQ-INR",
    ProtocolKind.HARQ_INR_P: "HARQ-INR-P",
}


class _Strict(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")


class ProtocolEntry(_Strict):
    """One curve of the figure. EMS entries carry their feedback cost f+1."""

    kind: ProtocolKind
    feedback_cost: int | None = Field(default=None, ge=2)

    @model_validator(mode="after")
    def _check_cost(self) -> ProtocolEntry:
        if self.kind is ProtocolKind.EMS and self.feedback_cost is None:
            msg = "ems protocol entries need 'feedback_cost'"
            raise ValueError(msg)
        if self.kind is not ProtocolKind.EMS and self.feedback_cost is not None:
            msg = f"'feedback_cost' only applies to ems, not {self.kind}"
            raise ValueError(msg)
        return self

    @property
    def feedback_levels(self) -> int:
        """f, the number of non-ACK feedback symbols."""
        return (self.feedback_cost or 2) - 1

    @property
    def label(self) -> str:
        if self.kind is ProtocolKind.EMS:
            return f"EMS{self.feedback_cost}"
        return _LABELS[self.kind]


class MonteCarloBlock(_Strict):
    enabled: bool = False
    episodes: int = Field(default=100_000, ge=1)
    seed: int = Field(default=1, ge=0, lt=2**64)


class NumericsOverride(_Strict):
    """Per-sweep replacements for the application's solver settings."""

    quadrature: QuadratureSettings | None = None
    outage: OutageSettings | None = None
    fredholm: FredholmSettings | None = None
    powerdp: PowerDPSettings | None = None


def _check_grid(name: str, grid: list[float]) -> None:
    if not grid:
        msg = f"'{name}' must not be empty"
        raise ValueError(msg)
    if any(b <= a for a, b in zip(grid, grid[1:], strict=False)):
        msg = f"'{name}' must be strictly increasing"
        raise ValueError(msg)


class SweepConfig(_Strict):
    """A figure family: channel, protocols, grid and optional Monte Carlo verdicts."""

    channel: ChannelSpec
    figure: FigureKind
    protocols: list[ProtocolEntry] = Field(default_factory=list)
    t_grid: list[float] | None = None
    snr_grid_db: list[float] | None = None
    target_t: float | None = Field(default=None, gt=1.0)
    monte_carlo: MonteCarloBlock = Field(default_factory=MonteCarloBlock)
    output: Path = Path("results")
    numerics: NumericsOverride = Field(default_factory=NumericsOverride)

    @model_validator(mode="after")
    def _check_axes(self) -> SweepConfig:
        if self.figure is FigureKind.THROUGHPUT_VS_DELAY:
            if self.t_grid is None:
                msg = "throughput_vs_delay sweeps need 't_grid'"
                raise ValueError(msg)
            _check_grid("t_grid", self.t_grid)
            if self.t_grid[0] <= 1.0:
                msg = "average decoding times in 't_grid' must exceed 1"
                raise ValueError(msg)
        else:
            if self.snr_grid_db is None or self.target_t is None:
                msg = "throughput_vs_snr sweeps need 'snr_grid_db' and 'target_t'"
                raise ValueError(msg)
            _check_grid("snr_grid_db", self.snr_grid_db)
            if self.channel.family != "rayleigh":
                msg = "throughput_vs_snr sweeps need a rayleigh channel"
                raise ValueError(msg)
        if self.monte_carlo.enabled and self.monte_carlo.episodes < MIN_VERDICT_EPISODES:
            msg = f"verdict-bearing sweeps need at least {MIN_VERDICT_EPISODES} episodes"
            raise ValueError(msg)
        return self

    def grid_points(self) -> list[tuple[ChannelSpec, float]]:
        """(channel, target T) for every point on the sweep axis, in grid order."""
        if self.figure is FigureKind.THROUGHPUT_VS_DELAY:
            return [(self.channel, t) for t in self.t_grid or ()]
        target = self.target_t or 0.0
        return [(self.channel.with_snr_db(snr), target) for snr in self.snr_grid_db or ()]


def load_sweep_config(path: Path) -> SweepConfig:
    """Read, schema-check and validate a sweep configuration file."""
    from emslab.pipeline.validation import validate_sweep_json  # noqa: PLC0415

    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        msg = f"sweep config not found: {path}"
        raise SweepConfigError(msg) from None
    except PermissionError:
        msg = f"permission denied reading sweep config: {path}"
        raise SweepConfigError(msg) from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        msg = f"sweep config contains invalid JSON: {exc}"
        raise SweepConfigError(msg) from None
    try:
        validate_sweep_json(data)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(part) for part in exc.absolute_path) or "<root>"
        msg = f"sweep config violates the schema at {where}: {exc.message}"
        raise SweepConfigError(msg) from None
    try:
        return SweepConfig.model_validate(data)
    except PydanticValidationError as exc:
        msg = f"sweep config has invalid structure: {exc}"
        raise SweepConfigError(msg) from None
