"""Slot-by-slot rate selection, feedback and stopping for each retransmission protocol.

Episodes run at the asymptotic operating point: vanishing back-off terms are zero and
there is no truncation other than the runaway cap.
"""

from __future__ import annotations

import bisect
import logging
import math
from collections.abc import Sequence
from typing import TYPE_CHECKING

from emslab.errors import DecodabilityError, DomainError, RunawayEpisodeError
from emslab.fading.base import LN2
from emslab.models.policy import BrqPolicy, EmsPolicy, HarqInrPolicy, PowerAdaptedHarqPolicy
from emslab.models.results import EpisodeTrace

if TYPE_CHECKING:
    from emslab.engine.streams import GainStream
    from emslab.models.policy import RatePolicy

logger = logging.getLogger(__name__)

DEFAULT_MAX_SLOTS = 1_000_000
DECODABILITY_TOL = 1e-9
IDENTITY_TOL = 1e-12
ACK = -1
NACK = 0


def _cap(h: float) -> float:
    return 0.5 * math.log1p(h) / LN2


# ---------------------------------------------------------------------------
# Unresolved information
# ---------------------------------------------------------------------------


def unresolved(rates: Sequence[float], gains: Sequence[float], k: int, t: int) -> float:
    """u_{k,t}: rate appended over slots k..t minus the capacity they supported.

    Slots are 1-based; an empty range (t < k) gives 0.
    """
    if k < 1:
        msg = f"slot index k must be >= 1, got {k}"
        raise IndexError(msg)
    if t < k:
        return 0.0
    if t > len(rates) or t > len(gains):
        msg = f"slot index t={t} beyond the {min(len(rates), len(gains))} recorded slots"
        raise IndexError(msg)
    return math.fsum(r - _cap(h) for r, h in zip(rates[k - 1 : t], gains[k - 1 : t], strict=True))


def _max_unresolved(increments: Sequence[float]) -> float:
    """max over k of u_{k,tau} = u_{1,tau} - u_{1,k-1}, from per-slot increments."""
    prefix = 0.0
    lowest = 0.0
    for step in increments[:-1]:
        prefix += step
        lowest = min(lowest, prefix)
    total = prefix + increments[-1]
    return total - lowest


# ---------------------------------------------------------------------------
# Rate and feedback rules
# ---------------------------------------------------------------------------


def brq_rate(t: int, v: float, *, threshold: float) -> float:
    """BRQ rate for slot ``t`` given the previous slot's gain ``v``."""
    if t < 1:
        msg = f"slot index must be >= 1, got {t}"
        raise DomainError(msg)
    c_threshold = _cap(threshold)
    if t == 1:
        return c_threshold
    if v < 0.0:
        msg = "gains are nonnegative"
        raise DomainError(msg)
    return min(_cap(v), c_threshold)


def ems_feedback(u: float, *, rate_unit: float, levels: int) -> int:
    """Feedback symbol in {-1, ..., f-1}: ACK (-1) once nothing is unresolved."""
    if u <= 0.0:
        return ACK
    return math.floor(levels - u / rate_unit)


def ems_rate(t: int, v: int | None, *, rate_unit: float, levels: int) -> float:
    """EMS rate: r*f in slot one, then min{r(f-1), r*v} or 0 after an ACK."""
    if t < 1:
        msg = f"slot index must be >= 1, got {t}"
        raise DomainError(msg)
    if t == 1:
        return rate_unit * levels
    if v is None or v != int(v) or not ACK <= v <= levels - 1:
        msg = f"feedback symbol {v!r} outside {{-1, ..., {levels - 1}}}"
        raise DomainError(msg)
    if v == ACK:
        return 0.0
    return min(rate_unit * (levels - 1), rate_unit * v)


def harq_inr_rate(t: int, *, rate: float) -> float:
    """Rate R in the first slot; retransmissions carry redundancy only."""
    if t < 1:
        msg = f"slot index must be >= 1, got {t}"
        raise DomainError(msg)
    return rate if t == 1 else 0.0


def composite_rate_feedback(u: float, *, rate_unit: float, levels: int) -> float:
    """Next-slot rate as a function of the unresolved information u in [0, r*f]."""
    top = rate_unit * levels
    if not -1e-12 * top <= u <= top * (1.0 + 1e-12):
        msg = f"unresolved information {u} outside [0, {top}]"
        raise DomainError(msg)
    return rate_unit * min(levels - 1, math.floor(levels - max(u, 0.0) / rate_unit))


# ---------------------------------------------------------------------------
# Episodes
# ---------------------------------------------------------------------------


def _runaway(label: str, max_slots: int) -> RunawayEpisodeError:
    msg = f"{label} episode exceeded {max_slots} slots; check the policy parameters"
    return RunawayEpisodeError(msg)


def _run_brq(policy: BrqPolicy, stream: GainStream, max_slots: int) -> EpisodeTrace:
    threshold = policy.threshold
    c_threshold = _cap(threshold)
    gains: list[float] = []
    rates: list[float] = []
    increments: list[float] = []
    previous = 0.0
    while True:
        t = len(gains) + 1
        if t > max_slots:
            raise _runaway(policy.label, max_slots)
        rate = c_threshold if t == 1 else min(_cap(previous), c_threshold)
        h = stream.next()
        gains.append(h)
        rates.append(rate)
        increments.append(rate - _cap(h))
        previous = h
        if h > threshold:
            break

    u_stop = math.fsum(increments)
    expected = c_threshold - _cap(gains[-1])
    if abs(u_stop - expected) > IDENTITY_TOL * max(1.0, c_threshold):
        msg = f"BRQ stop identity violated: u={u_stop!r}, C(h_T)-C(H_tau)={expected!r}"
        raise DecodabilityError(msg)
    worst = _max_unresolved(increments)
    if worst > DECODABILITY_TOL:
        msg = f"BRQ episode stopped with unresolved information {worst!r}"
        raise DecodabilityError(msg)
    return EpisodeTrace(
        label=policy.label,
        gains=tuple(gains),
        rates=tuple(rates),
        feedback=tuple(gains),
        powers=(1.0,) * len(gains),
        tau=len(gains),
        cum_rate=math.fsum(rates),
        max_unresolved_at_stop=worst,
    )


def _run_ems(policy: EmsPolicy, stream: GainStream, max_slots: int) -> EpisodeTrace:
    r, f = policy.rate_unit, policy.feedback_levels
    low, high = r * (f - 1) - DECODABILITY_TOL, r * f + DECODABILITY_TOL
    gains: list[float] = []
    rates: list[float] = []
    feedback: list[float] = []
    increments: list[float] = []
    u = 0.0
    symbol: int | None = None
    while True:
        t = len(gains) + 1
        if t > max_slots:
            raise _runaway(policy.label, max_slots)
        rate = ems_rate(t, symbol, rate_unit=r, levels=f)
        if t > 1 and not low < u + rate <= high:
            msg = f"EMS trajectory left the band: u + rate = {u + rate!r} at slot {t}"
            raise DecodabilityError(msg)
        h = stream.next()
        step = rate - _cap(h)
        u += step
        symbol = ems_feedback(u, rate_unit=r, levels=f)
        gains.append(h)
        rates.append(rate)
        increments.append(step)
        feedback.append(symbol)
        if symbol == ACK:
            break

    worst = _max_unresolved(increments)
    if worst > DECODABILITY_TOL:
        msg = f"EMS episode stopped with unresolved information {worst!r}"
        raise DecodabilityError(msg)
    return EpisodeTrace(
        label=policy.label,
        gains=tuple(gains),
        rates=tuple(rates),
        feedback=tuple(feedback),
        powers=(1.0,) * len(gains),
        tau=len(gains),
        cum_rate=math.fsum(rates),
        max_unresolved_at_stop=worst,
    )


def _run_harq(
    policy: HarqInrPolicy | PowerAdaptedHarqPolicy, stream: GainStream, max_slots: int
) -> EpisodeTrace:
    adaptive = isinstance(policy, PowerAdaptedHarqPolicy)
    gains: list[float] = []
    rates: list[float] = []
    feedback: list[float] = []
    powers: list[float] = []
    increments: list[float] = []
    remaining = policy.rate
    while True:
        t = len(gains) + 1
        if t > max_slots:
            raise _runaway(policy.label, max_slots)
        rate = harq_inr_rate(t, rate=policy.rate)
        rho = interpolate_power(policy, remaining) if adaptive else 1.0
        h = stream.next()
        supported = _cap(rho * h)
        remaining -= supported
        gains.append(h)
        rates.append(rate)
        powers.append(rho)
        increments.append(rate - supported)
        done = remaining <= 0.0
        feedback.append(h if adaptive else (ACK if done else NACK))
        if done:
            break

    return EpisodeTrace(
        label=policy.label,
        gains=tuple(gains),
        rates=tuple(rates),
        feedback=tuple(feedback),
        powers=tuple(powers),
        tau=len(gains),
        cum_rate=math.fsum(rates),
        max_unresolved_at_stop=_max_unresolved(increments),
    )


def interpolate_power(policy: PowerAdaptedHarqPolicy, u: float) -> float:
    """rho*(u) by linear interpolation, held constant beyond the table."""
    nodes, powers = policy.nodes, policy.powers
    if u <= nodes[0]:
        return powers[0]
    if u >= nodes[-1]:
        return powers[-1]
    i = bisect.bisect_right(nodes, u)
    w = (u - nodes[i - 1]) / (nodes[i] - nodes[i - 1])
    return powers[i - 1] + w * (powers[i] - powers[i - 1])


def run_episode(
    policy: RatePolicy, stream: GainStream, *, max_slots: int = DEFAULT_MAX_SLOTS
) -> EpisodeTrace:
    """Run one renewal episode of ``policy`` against ``stream``."""
    if isinstance(policy, BrqPolicy):
        return _run_brq(policy, stream, max_slots)
    if isinstance(policy, EmsPolicy):
        return _run_ems(policy, stream, max_slots)
    return _run_harq(policy, stream, max_slots)


def run_ems_from_state(
    policy: EmsPolicy, u0: float, stream: GainStream, *, max_slots: int = DEFAULT_MAX_SLOTS
) -> tuple[float, int]:
    """Future (cumulative rate, slots) of an EMS episode whose unresolved information is u0.

    Rates follow the composite rule r*min{f-1, floor(f - u/r)} until the unresolved
    information reaches zero, the same acknowledgement rule as ``ems_feedback``.
    """
    r, f = policy.rate_unit, policy.feedback_levels
    u = u0
    reward = 0.0
    slots = 0
    while True:
        slots += 1
        if slots > max_slots:
            raise _runaway(policy.label, max_slots)
        rate = composite_rate_feedback(u, rate_unit=r, levels=f)
        reward += rate
        u = u + rate - _cap(stream.next())
        if u <= 0.0:
            return reward, slots
