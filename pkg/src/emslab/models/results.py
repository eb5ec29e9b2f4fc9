"""Result records produced by the engine: episodes, trade-off points, estimates, verdicts."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

CEILING_RTOL = 1e-4


@dataclass(frozen=True)
class EpisodeTrace:
    """One renewal episode of a retransmission protocol."""

    label: str
    gains: tuple[float, ...]
    rates: tuple[float, ...]
    feedback: tuple[float, ...]
    powers: tuple[float, ...]
    tau: int
    cum_rate: float
    max_unresolved_at_stop: float

    def __post_init__(self) -> None:
        if not len(self.gains) == len(self.rates) == len(self.powers) == self.tau:
            msg = "trace sequences must all have length tau"
            raise ValueError(msg)

    def to_json(self) -> str:
        return json.dumps(asdict(self), separators=(",", ":"))


@dataclass(frozen=True)
class TradeoffPoint:
    """An (average decoding time, throughput) operating point of one protocol."""

    label: str
    avg_decoding_time: float
    throughput: float
    params: dict[str, float] = field(default_factory=dict)
    metadata: dict[str, object] = field(default_factory=dict)
    ceiling: float | None = None

    def __post_init__(self) -> None:
        if not self.avg_decoding_time >= 1.0 - 1e-12:
            msg = f"average decoding time must be >= 1, got {self.avg_decoding_time}"
            raise ValueError(msg)
        if not self.throughput >= 0.0:
            msg = f"throughput must be nonnegative, got {self.throughput}"
            raise ValueError(msg)
        if self.ceiling is not None and self.throughput > self.ceiling * (1.0 + CEILING_RTOL):
            msg = f"throughput {self.throughput} exceeds the ergodic capacity {self.ceiling}"
            raise ValueError(msg)


@dataclass(frozen=True)
class RenewalEstimate:
    """Monte Carlo renewal-reward summary."""

    label: str
    n_episodes: int
    mean_reward: float
    mean_reward_se: float
    mean_tau: float
    mean_tau_se: float
    throughput: float
    throughput_se: float
    seed: int
    mean_power: float | None = None
    mean_power_se: float | None = None
    max_tau: int = 0

    @property
    def power_ratio(self) -> float | None:
        """Average power per slot, E[sum rho]/E[tau]."""
        if self.mean_power is None:
            return None
        return self.mean_power / self.mean_tau


@dataclass(frozen=True)
class Verdict:
    """Outcome of comparing a simulation against an analytic prediction."""

    label: str
    predicted_eta: float
    predicted_tau: float
    estimated_eta: float
    estimated_tau: float
    z_eta: float
    z_tau: float
    threshold: float = 3.0

    @property
    def passed(self) -> bool:
        return abs(self.z_eta) <= self.threshold and abs(self.z_tau) <= self.threshold

    def to_json(self) -> str:
        record = asdict(self)
        record["passed"] = self.passed
        for key in ("z_eta", "z_tau"):
            if math.isinf(record[key]):
                record[key] = "inf" if record[key] > 0 else "-inf"
        return json.dumps(record, separators=(",", ":"))
