"""Rate-selection policies of the retransmission protocols."""

from __future__ import annotations

from typing import Annotated, Literal

from pydantic import BaseModel, ConfigDict, Field, model_validator


class _Policy(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")


class BrqPolicy(_Policy):
    """Backtrack retransmission: first-slot rate C(h_T), then min{C(H_{t-1}), C(h_T)}."""

    kind: Literal["brq"] = "brq"
    threshold: float = Field(gt=0.0)

    @property
    def label(self) -> str:
        return "BRQ"


class EmsPolicy(_Policy):
    """Finite-feedback expandable message space with rate unit r and f feedback levels.

    The feedback alphabet is {-1, 0, ..., f-1}, i.e. the feedback cost is f+1.
    """

    kind: Literal["ems"] = "ems"
    rate_unit: float = Field(gt=0.0)
    feedback_levels: int = Field(ge=1)

    @property
    def label(self) -> str:
        return f"EMS{self.feedback_levels + 1}"

    @property
    def first_rate(self) -> float:
        return self.rate_unit * self.feedback_levels


class HarqInrPolicy(_Policy):
    """HARQ with incremental redundancy: rate R in slot one, redundancy afterwards."""

    kind: Literal["harq_inr"] = "harq_inr"
    rate: float = Field(gt=0.0)

    @property
    def label(self) -> str:
        return "HARQ-INR"


class PowerAdaptedHarqPolicy(_Policy):
    """HARQ-INR with a power law rho(u) of the remaining information u."""

    kind: Literal["harq_inr_p"] = "harq_inr_p"
    rate: float = Field(gt=0.0)
    nodes: tuple[float, ...]
    powers: tuple[float, ...]

    @model_validator(mode="after")
    def _check_table(self) -> PowerAdaptedHarqPolicy:
        if len(self.nodes) != len(self.powers) or len(self.nodes) < 2:
            msg = "power table needs matching nodes and powers (at least two)"
            raise ValueError(msg)
        if any(b <= a for a, b in zip(self.nodes, self.nodes[1:], strict=False)):
            msg = "power table nodes must be strictly increasing"
            raise ValueError(msg)
        if min(self.powers) <= 0.0:
            msg = "powers must be positive"
            raise ValueError(msg)
        return self

    @property
    def label(self) -> str:
        return "HARQ-INR-P"


RatePolicy = Annotated[
    BrqPolicy | EmsPolicy | HarqInrPolicy | PowerAdaptedHarqPolicy,
    Field(discriminator="kind"),
]
