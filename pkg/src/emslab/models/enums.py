"""Enumerations used throughout emslab."""

from enum import StrEnum


class FadingFamily(StrEnum):
    RAYLEIGH = "rayleigh"
    TABULATED = "tabulated"


class ProtocolKind(StrEnum):
    BRQ = "brq"
    EMS = "ems"
    HARQ_INR = "harq_inr"
    HARQ_INR_P = "harq_inr_p"


class FigureKind(StrEnum):
    THROUGHPUT_VS_DELAY = "throughput_vs_delay"
    THROUGHPUT_VS_SNR = "throughput_vs_snr"


class VerifySuite(StrEnum):
    FAST = "fast"
    FULL = "full"


class Interpolation(StrEnum):
    LINEAR = "linear"
    CUBIC = "cubic"
