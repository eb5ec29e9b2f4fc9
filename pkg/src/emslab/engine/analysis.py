"""Closed-form and quadrature evaluation of the BRQ and HARQ-INR trade-offs."""

from __future__ import annotations

import logging
import math
import warnings
from collections.abc import Callable, Iterator
from dataclasses import dataclass

import numpy as np
from scipy import integrate, signal

from emslab.config import OutageSettings, QuadratureSettings
from emslab.engine.search import bisect_increasing, golden_maximize
from emslab.errors import ConvergenceError, DomainError, QuadratureError
from emslab.fading import build_law, capacity, capacity_law
from emslab.fading.base import LN2, FloatArray
from emslab.fading.tabulated import TabulatedLaw
from emslab.models.channel import ChannelSpec
from emslab.models.results import TradeoffPoint

logger = logging.getLogger(__name__)

BRQ_LABEL = "BRQ"
HARQ_LABEL = "HARQ-INR"


# ---------------------------------------------------------------------------
# Quadrature helpers
# ---------------------------------------------------------------------------


def quad(
    fn: Callable[[float], float],
    lower: float,
    upper: float,
    settings: QuadratureSettings | None = None,
) -> float:
    """Adaptive Gauss-Kronrod quadrature; integration warnings become QuadratureError."""
    settings = settings or QuadratureSettings()
    if upper <= lower:
        return 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            value, abserr = integrate.quad(
                fn,
                lower,
                upper,
                epsabs=settings.epsabs,
                epsrel=settings.epsrel,
                limit=settings.limit,
            )
        except integrate.IntegrationWarning as exc:
            msg = f"quadrature on [{lower:g}, {upper:g}] did not converge: {exc}"
            raise QuadratureError(msg) from exc
    if not math.isfinite(value):
        msg = f"quadrature on [{lower:g}, {upper:g}] returned {value}"
        raise QuadratureError(msg)
    logger.debug("quad [%g, %g] = %.15g (abserr %.2e)", lower, upper, value, abserr)
    return float(value)


def capacity_moment(
    channel: ChannelSpec, upper_gain: float, settings: QuadratureSettings | None = None
) -> float:
    """E[C(H) 1{H <= upper_gain}].

    Tabulated laws integrate exactly per quantile cell; smooth laws use quadrature up to
    ``min(upper_gain, quantile(1 - tail_probability))``.
    """
    settings = settings or QuadratureSettings()
    law = build_law(channel)
    if isinstance(law, TabulatedLaw):
        return law.capacity_moment(upper_gain)
    limit = min(upper_gain, float(law.quantile(1.0 - settings.tail_probability)))

    def integrand(h: float) -> float:
        return float(law.pdf(h)) * 0.5 * math.log1p(h) / LN2

    return quad(integrand, 0.0, limit, settings)


# ---------------------------------------------------------------------------
# Ergodic capacity and BRQ
# ---------------------------------------------------------------------------


def ergodic_capacity(channel: ChannelSpec, settings: QuadratureSettings | None = None) -> float:
    """C_erg = E[C(H)]."""
    return capacity_moment(channel, math.inf, settings)


def _check_delay(T: float) -> None:
    if not T > 1.0:
        msg = f"average decoding time must exceed 1 slot, got {T}"
        raise DomainError(msg)


def brq_threshold(T: float, channel: ChannelSpec) -> float:
    """h_T = F_H^{-1}(1 - 1/T); BRQ stops at the first gain above it, so E[tau] = T."""
    _check_delay(T)
    return float(build_law(channel).quantile(1.0 - 1.0 / T))


@dataclass(frozen=True)
class BrqParts:
    """The two terms of the BRQ throughput: ARQ term and threshold term."""

    arq_term: float
    threshold_term: float
    threshold: float

    @property
    def total(self) -> float:
        return self.arq_term + self.threshold_term


def eta_brq_parts(
    T: float, channel: ChannelSpec, settings: QuadratureSettings | None = None
) -> BrqParts:
    h_t = brq_threshold(T, channel)
    return BrqParts(
        arq_term=capacity_moment(channel, h_t, settings),
        threshold_term=capacity(h_t) / T,
        threshold=h_t,
    )


def eta_brq(T: float, channel: ChannelSpec, settings: QuadratureSettings | None = None) -> float:
    """BRQ throughput at average decoding time T."""
    return eta_brq_parts(T, channel, settings).total


def brq_point(
    T: float, channel: ChannelSpec, settings: QuadratureSettings | None = None
) -> TradeoffPoint:
    parts = eta_brq_parts(T, channel, settings)
    return TradeoffPoint(
        label=BRQ_LABEL,
        avg_decoding_time=T,
        throughput=parts.total,
        params={"h_T": parts.threshold},
        metadata={"arq_term": parts.arq_term, "threshold_term": parts.threshold_term},
        ceiling=ergodic_capacity(channel, settings),
    )


def _density_slope(channel: ChannelSpec, h: float, fd_step: float | None) -> float:
    law = build_law(channel)
    if fd_step is None:
        return float(law.pdf_derivative(h))
    if h >= fd_step:
        return (float(law.pdf(h + fd_step)) - float(law.pdf(h - fd_step))) / (2.0 * fd_step)
    return (float(law.pdf(h + fd_step)) - float(law.pdf(h))) / fd_step


def _survival(channel: ChannelSpec, h: float) -> float:
    law = build_law(channel)
    sf = getattr(law, "sf", None)
    if sf is not None:
        return float(sf(h))
    return 1.0 - float(law.cdf(h))


def brq_optimality_lhs(h: float, channel: ChannelSpec, *, fd_step: float | None = None) -> float:
    """P_H/(1-F_H) + 1/(1+h) + P'_H/P_H at gain h; BRQ is optimal where this is >= 0.

    With ``fd_step`` the density slope is taken by central differences instead of the
    law's analytic derivative.
    """
    if h < 0.0:
        msg = f"gain must be nonnegative, got {h}"
        raise DomainError(msg)
    density = float(build_law(channel).pdf(h))
    if density <= 0.0:
        msg = f"fading density vanishes at h={h}"
        raise DomainError(msg)
    survival = _survival(channel, h)
    return density / survival + 1.0 / (1.0 + h) + _density_slope(channel, h, fd_step) / density


@dataclass(frozen=True)
class OptimalityReport:
    gains: tuple[float, ...]
    values: tuple[float, ...]

    @property
    def minimum(self) -> float:
        return min(self.values)

    @property
    def holds(self) -> bool:
        return self.minimum >= 0.0


def brq_optimality_report(
    channel: ChannelSpec, gains: FloatArray, *, fd_step: float | None = None
) -> OptimalityReport:
    """Evaluate the optimality condition on a gain grid.

    Where it fails, the BRQ throughput is only a lower bound on the optimum.
    """
    values = tuple(brq_optimality_lhs(float(h), channel, fd_step=fd_step) for h in gains)
    report = OptimalityReport(tuple(float(h) for h in gains), values)
    if not report.holds:
        logger.warning(
            "BRQ optimality condition fails on %s (min %.3g); eta_BRQ is a lower bound",
            channel.label,
            report.minimum,
        )
    return report


def t_eta_second_derivative(T: float, channel: ChannelSpec) -> float:
    """d^2/dT^2 of T*eta_BRQ(T).

    With h = h_T, p = P_H(h), p' = P'_H(h) and C', C'' the derivatives of C at h:
        -C'/(T^3 p) + C''/(T^4 p^2) - C' p'/(T^4 p^3).
    """
    h = brq_threshold(T, channel)
    law = build_law(channel)
    p = float(law.pdf(h))
    if p <= 0.0:
        msg = f"fading density vanishes at h_T={h}"
        raise DomainError(msg)
    dp = float(law.pdf_derivative(h))
    c1 = 1.0 / (2.0 * LN2 * (1.0 + h))
    c2 = -1.0 / (2.0 * LN2 * (1.0 + h) ** 2)
    return -c1 / (T**3 * p) + c2 / (T**4 * p**2) - c1 * dp / (T**4 * p**3)


def brq_multiplier(
    T: float, channel: ChannelSpec, settings: QuadratureSettings | None = None
) -> float:
    """Multiplier under which the first-slot rate C(h_T) maximises the linear value offset."""
    parts = eta_brq_parts(T, channel, settings)
    density = float(capacity_law(channel).pdf(capacity(parts.threshold)))
    return parts.total + 1.0 / (T**2 * density)


# ---------------------------------------------------------------------------
# HARQ-INR outage
# ---------------------------------------------------------------------------


def _lattice_masses(channel: ChannelSpec, width: float, cells: int) -> FloatArray:
    """Masses of C(H) on cells centred at k*width, exact from the CDF.

    Each cell is evaluated at its centre, so the lattice error is second order in ``width``.
    """
    edges = width * (np.arange(cells + 1, dtype=np.float64) + 0.5)
    cdf = np.asarray(capacity_law(channel).cdf(edges), dtype=np.float64)
    return np.diff(np.concatenate(([0.0], cdf)))


def _convolve(a: FloatArray, b: FloatArray, size: int) -> FloatArray:
    out = signal.convolve(a, b, method="auto")[:size]
    return np.maximum(out, 0.0)


def _outage_terms(
    R: float, channel: ChannelSpec, settings: OutageSettings
) -> Iterator[float]:
    """p_out^m(R) for m = 1, 2, ... on one shared lattice of ``settings.cells`` cells."""
    cap = capacity_law(channel)
    yield float(cap.cdf(R))
    cells = settings.cells
    width = R / cells
    masses = _lattice_masses(channel, width, cells)
    tail = np.asarray(
        cap.cdf(np.maximum(R - width * np.arange(cells + 1, dtype=np.float64), 0.0)),
        dtype=np.float64,
    )
    partial = masses
    while True:
        yield float(np.dot(partial, tail))
        partial = _convolve(partial, masses, cells + 1)


def harq_outage(
    m: int, R: float, channel: ChannelSpec, settings: OutageSettings | None = None
) -> float:
    """p_out^m(R) = Pr{C(H_1) + ... + C(H_m) < R}."""
    if m < 1:
        msg = f"retransmission count must be >= 1, got {m}"
        raise DomainError(msg)
    if R < 0.0:
        msg = f"rate must be nonnegative, got {R}"
        raise DomainError(msg)
    if R == 0.0:
        return 0.0
    settings = settings or OutageSettings()
    for index, value in enumerate(_outage_terms(R, channel, settings), start=1):
        if index == m:
            return value
    raise AssertionError("unreachable")


def harq_outage_drift(
    m: int, R: float, channel: ChannelSpec, settings: OutageSettings | None = None
) -> float:
    """Absolute change of p_out^m(R) when the lattice is refined twofold."""
    settings = settings or OutageSettings()
    fine = settings.model_copy(update={"cells": 2 * settings.cells})
    return abs(harq_outage(m, R, channel, fine) - harq_outage(m, R, channel, settings))


@dataclass(frozen=True)
class SeriesResult:
    """Truncated renewal series 1 + sum_m p_out^m with its certified tail bound."""

    value: float
    terms: int
    tail_bound: float


def harq_expected_tau_series(
    R: float, channel: ChannelSpec, settings: OutageSettings | None = None
) -> SeriesResult:
    if R < 0.0:
        msg = f"rate must be nonnegative, got {R}"
        raise DomainError(msg)
    if R == 0.0:
        return SeriesResult(1.0, 0, 0.0)
    settings = settings or OutageSettings()
    total = 1.0
    previous = 1.0
    for m, term in enumerate(_outage_terms(R, channel, settings), start=1):
        total += term
        if term < settings.series_cutoff:
            ratio = term / previous if previous > 0.0 else 0.0
            if ratio >= 1.0:
                msg = f"outage series for R={R} stopped decaying at term {m}"
                raise ConvergenceError(msg)
            bound = term * ratio / (1.0 - ratio)
            logger.debug("E[tau](R=%g): %d terms, tail bound %.2e", R, m, bound)
            return SeriesResult(total + bound, m, bound)
        if m >= settings.max_terms:
            msg = f"outage series for R={R} did not fall below {settings.series_cutoff}"
            raise ConvergenceError(msg)
        previous = term
    raise AssertionError("unreachable")


def harq_expected_tau(
    R: float, channel: ChannelSpec, settings: OutageSettings | None = None
) -> float:
    """E[tau] of HARQ-INR at first-slot rate R: 1 + sum_m p_out^m(R)."""
    return harq_expected_tau_series(R, channel, settings).value


class HarqRenewalTable:
    """E[tau](R) for every R in [0, upper] from one lattice renewal measure.

    With q the lattice law of C(H) and U = delta_0 + q * U its renewal measure,
    E[tau](R) = 1 + sum_k U_k F_C(R - k h).
    """

    def __init__(
        self, channel: ChannelSpec, upper: float, settings: OutageSettings | None = None
    ) -> None:
        settings = settings or OutageSettings()
        self.channel = channel
        self.upper = upper
        self.cells = int(
            min(max(math.ceil(upper / settings.max_cell_width), settings.cells), settings.max_cells)
        )
        self.width = upper / self.cells
        masses = _lattice_masses(channel, self.width, self.cells)
        stay = 1.0 - masses[0]
        reversed_masses = masses[::-1]
        renewal = np.empty(self.cells + 1, dtype=np.float64)
        renewal[0] = 1.0 / stay
        for k in range(1, self.cells + 1):
            # sum_{j=1..k} q_j U_{k-j}
            renewal[k] = np.dot(reversed_masses[-k - 1 : -1], renewal[:k]) / stay
        self._renewal = renewal
        self._cap = capacity_law(channel)

    def expected_tau(self, R: float) -> float:
        if R <= 0.0:
            return 1.0
        if R > self.upper * (1.0 + 1e-12):
            msg = f"rate {R} beyond the tabulated range {self.upper}"
            raise DomainError(msg)
        k_max = min(int(math.ceil(R / self.width)), self.cells + 1)
        offsets = np.maximum(R - self.width * np.arange(k_max, dtype=np.float64), 0.0)
        cdf = np.asarray(self._cap.cdf(offsets), dtype=np.float64)
        return 1.0 + float(np.dot(self._renewal[:k_max], cdf))


def eta_harq_inr(
    T: float, channel: ChannelSpec, settings: OutageSettings | None = None
) -> TradeoffPoint:
    """Best HARQ-INR throughput R/E[tau](R) subject to E[tau](R) <= T."""
    if T < 1.0:
        msg = f"average decoding time must be >= 1, got {T}"
        raise DomainError(msg)
    if T <= 1.0 + 1e-12:
        return TradeoffPoint(HARQ_LABEL, 1.0, 0.0, {"R": 0.0}, {"note": "T=1 forces R=0"})

    upper = 2.0 * T * capacity(brq_threshold(T, channel))
    table = HarqRenewalTable(channel, upper, settings)
    tol = 1e-9 * upper
    boundary = bisect_increasing(table.expected_tau, T, 0.0, upper, tol=tol)
    floor = min(1e-9 * upper, boundary)

    def objective(R: float) -> float:
        return R / table.expected_tau(R)

    best = golden_maximize(objective, floor, boundary, tol=tol)
    rate = best.argument
    tau = table.expected_tau(rate)
    logger.info("HARQ-INR T=%g: R=%.6g eta=%.6g E[tau]=%.6g", T, rate, best.value, tau)
    return TradeoffPoint(
        HARQ_LABEL,
        avg_decoding_time=max(tau, 1.0),
        throughput=best.value,
        params={"R": rate},
        metadata={"cells": table.cells, "constraint_rate": boundary},
        ceiling=ergodic_capacity(channel),
    )
