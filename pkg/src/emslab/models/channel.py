"""Fading channel description."""

from __future__ import annotations

import math

from pydantic import BaseModel, ConfigDict, Field, model_validator

from emslab.models.enums import FadingFamily

MIN_TABLE_KNOTS = 4096


class ChannelSpec(BaseModel):
    """Block-fading law of the per-slot gain H.

    Rayleigh laws are given by their mean gain Γ, either directly (``gamma``) or as an
    average SNR in dB (``snr_db``); transmit power is one, so Γ is the mean SNR.
    Tabulated laws carry a monotone inverse-CDF table sampled on ``probabilities``.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    family: FadingFamily = FadingFamily.RAYLEIGH
    snr_db: float | None = None
    gamma: float | None = Field(default=None, gt=0.0)
    probabilities: tuple[float, ...] | None = None
    gains: tuple[float, ...] | None = None

    @model_validator(mode="after")
    def _check_family(self) -> ChannelSpec:
        if self.family is FadingFamily.RAYLEIGH:
            if (self.snr_db is None) == (self.gamma is None):
                msg = "rayleigh channel needs exactly one of 'snr_db' or 'gamma'"
                raise ValueError(msg)
            if self.probabilities is not None or self.gains is not None:
                msg = "rayleigh channel does not take a quantile table"
                raise ValueError(msg)
            return self

        if self.probabilities is None or self.gains is None:
            msg = "tabulated channel needs 'probabilities' and 'gains'"
            raise ValueError(msg)
        if len(self.probabilities) != len(self.gains):
            msg = "quantile table columns differ in length"
            raise ValueError(msg)
        if len(self.gains) < MIN_TABLE_KNOTS:
            msg = f"quantile table needs at least {MIN_TABLE_KNOTS} knots, got {len(self.gains)}"
            raise ValueError(msg)
        if self.probabilities[0] != 0.0 or self.probabilities[-1] != 1.0:
            msg = "quantile table probabilities must run from 0 to 1"
            raise ValueError(msg)
        if any(b <= a for a, b in zip(self.probabilities, self.probabilities[1:], strict=False)):
            msg = "quantile table probabilities must be strictly increasing"
            raise ValueError(msg)
        if self.gains[0] < 0.0 or any(
            b < a for a, b in zip(self.gains, self.gains[1:], strict=False)
        ):
            msg = "quantile table gains must be nonnegative and nondecreasing"
            raise ValueError(msg)
        if not all(math.isfinite(g) for g in self.gains):
            msg = "quantile table gains must be finite"
            raise ValueError(msg)
        return self

    @property
    def mean_snr(self) -> float:
        """Mean gain Γ on a linear scale."""
        if self.gamma is not None:
            return self.gamma
        if self.snr_db is not None:
            return float(10.0 ** (self.snr_db / 10.0))
        from emslab.fading import build_law  # noqa: PLC0415

        return build_law(self).mean

    @property
    def mean_snr_db(self) -> float:
        return 10.0 * math.log10(self.mean_snr)

    @property
    def label(self) -> str:
        if self.family is FadingFamily.RAYLEIGH:
            return f"rayleigh({self.mean_snr_db:.4g} dB)"
        return f"tabulated({len(self.gains or ())} knots)"

    def with_snr_db(self, snr_db: float) -> ChannelSpec:
        """Rayleigh channel with the same family at another average SNR."""
        if self.family is not FadingFamily.RAYLEIGH:
            msg = "only rayleigh channels can be re-parameterized by SNR"
            raise ValueError(msg)
        return ChannelSpec(family=FadingFamily.RAYLEIGH, snr_db=snr_db)
