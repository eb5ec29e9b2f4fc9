"""emslab data models - pure Pydantic and dataclasses, no numerics."""

from emslab.models.channel import ChannelSpec
from emslab.models.enums import (
    FadingFamily,
    FigureKind,
    Interpolation,
    ProtocolKind,
    VerifySuite,
)
from emslab.models.policy import (
    BrqPolicy,
    EmsPolicy,
    HarqInrPolicy,
    PowerAdaptedHarqPolicy,
    RatePolicy,
)
from emslab.models.results import EpisodeTrace, RenewalEstimate, TradeoffPoint, Verdict

__all__ = [
    "BrqPolicy",
    "ChannelSpec",
    "EmsPolicy",
    "EpisodeTrace",
    "FadingFamily",
    "FigureKind",
    "HarqInrPolicy",
    "Interpolation",
    "PowerAdaptedHarqPolicy",
    "ProtocolKind",
    "RatePolicy",
    "RenewalEstimate",
    "TradeoffPoint",
    "Verdict",
    "VerifySuite",
]
