"""Monte Carlo renewal-reward estimation of throughput and average decoding time.

Episodes are split into fixed-size chunks keyed by episode index. Every episode draws
from its own counter-based substream and chunk results are reduced in index order, so an
estimate is identical whatever the number of worker processes.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from emslab.config import MonteCarloSettings
from emslab.engine.protocols import run_episode, run_ems_from_state
from emslab.engine.streams import episode_stream
from emslab.errors import ComparisonError, DomainError
from emslab.fading import build_law
from emslab.fading.base import FloatArray
from emslab.models.policy import PowerAdaptedHarqPolicy
from emslab.models.results import RenewalEstimate, Verdict

if TYPE_CHECKING:
    from emslab.models.channel import ChannelSpec
    from emslab.models.policy import EmsPolicy, RatePolicy
    from emslab.models.results import EpisodeTrace, TradeoffPoint

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class _Chunk:
    rewards: FloatArray
    taus: FloatArray
    powers: FloatArray


@dataclass(frozen=True)
class StateEstimate:
    """Future reward and slot count of episodes started from a fixed unresolved state."""

    u0: float
    n_episodes: int
    reward: float
    reward_se: float
    slots: float
    slots_se: float


# ---------------------------------------------------------------------------
# Workers
# ---------------------------------------------------------------------------

def _simulate_chunk(
    policy: RatePolicy,
    channel: ChannelSpec,
    master_seed: int,
    start: int,
    stop: int,
    max_slots: int,
) -> _Chunk:
    law = build_law(channel)
    size = stop - start
    rewards = np.empty(size, dtype=np.float64)
    taus = np.empty(size, dtype=np.float64)
    powers = np.empty(size, dtype=np.float64)
    for offset, index in enumerate(range(start, stop)):
        trace = run_episode(policy, episode_stream(law, master_seed, index), max_slots=max_slots)
        rewards[offset] = trace.cum_rate
        taus[offset] = trace.tau
        powers[offset] = math.fsum(trace.powers)
    return _Chunk(rewards, taus, powers)


def _chunk_bounds(n_episodes: int, chunk_size: int) -> list[tuple[int, int]]:
    return [
        (start, min(start + chunk_size, n_episodes))
        for start in range(0, n_episodes, chunk_size)
    ]


def _run_chunks(
    policy: RatePolicy,
    channel: ChannelSpec,
    n_episodes: int,
    master_seed: int,
    workers: int,
    settings: MonteCarloSettings,
) -> _Chunk:
    bounds = _chunk_bounds(n_episodes, settings.chunk_size)
    if workers <= 1 or len(bounds) == 1:
        chunks = [
            _simulate_chunk(policy, channel, master_seed, a, b, settings.max_slots)
            for a, b in bounds
        ]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [
                pool.submit(
                    _simulate_chunk, policy, channel, master_seed, a, b, settings.max_slots
                )
                for a, b in bounds
            ]
            chunks = [future.result() for future in futures]
    return _Chunk(
        np.concatenate([c.rewards for c in chunks]),
        np.concatenate([c.taus for c in chunks]),
        np.concatenate([c.powers for c in chunks]),
    )


# ---------------------------------------------------------------------------
# Estimators
# ---------------------------------------------------------------------------

def _mean_se(samples: FloatArray) -> tuple[float, float]:
    mean = float(np.mean(samples))
    if samples.size < 2:  # noqa: PLR2004
        return mean, math.nan
    se = float(np.std(samples, ddof=1)) / math.sqrt(samples.size)
    return mean, se


def _ratio_se(rewards: FloatArray, taus: FloatArray) -> float:
    """Delta-method standard error of mean(rewards)/mean(taus)."""
    n = rewards.size
    if n < 2:  # noqa: PLR2004
        return math.nan
    mean_tau = float(np.mean(taus))
    ratio = float(np.mean(rewards)) / mean_tau
    cov = np.cov(np.vstack((rewards, taus)), ddof=1)
    variance = cov[0, 0] - 2.0 * ratio * cov[0, 1] + ratio * ratio * cov[1, 1]
    return math.sqrt(max(float(variance), 0.0) / n) / mean_tau


def estimate(
    policy: RatePolicy,
    channel: ChannelSpec,
    n_episodes: int,
    master_seed: int,
    *,
    workers: int = 1,
    settings: MonteCarloSettings | None = None,
) -> RenewalEstimate:
    """Simulate ``n_episodes`` renewal episodes and summarise throughput and E[tau].

    Parameters
    ----------
    policy:
        Protocol policy to run.
    channel:
        Block-fading channel the gains are drawn from.
    n_episodes:
        Number of episodes, at least one. With a single episode every standard error is
        NaN and any verdict built from it fails.
    master_seed:
        Key of the counter-based generator; episode ``i`` uses counter ``i``.
    workers:
        Worker processes. The result does not depend on this value.
    settings:
        Chunk size and runaway cap.
    """
    if n_episodes < 1:
        msg = f"need at least one episode, got {n_episodes}"
        raise DomainError(msg)
    settings = settings or MonteCarloSettings()
    logger.info(
        "simulating %d %s episodes (seed %d, %d worker(s))",
        n_episodes, policy.label, master_seed, workers,
    )
    data = _run_chunks(policy, channel, n_episodes, master_seed, workers, settings)

    mean_reward, reward_se = _mean_se(data.rewards)
    mean_tau, tau_se = _mean_se(data.taus)
    mean_power: float | None = None
    power_se: float | None = None
    if isinstance(policy, PowerAdaptedHarqPolicy):
        mean_power, power_se = _mean_se(data.powers)

    result = RenewalEstimate(
        label=policy.label,
        n_episodes=n_episodes,
        mean_reward=mean_reward,
        mean_reward_se=reward_se,
        mean_tau=mean_tau,
        mean_tau_se=tau_se,
        throughput=mean_reward / mean_tau,
        throughput_se=_ratio_se(data.rewards, data.taus),
        seed=master_seed,
        mean_power=mean_power,
        mean_power_se=power_se,
        max_tau=int(np.max(data.taus)),
    )
    logger.debug(
        "%s: eta=%.6g (se %.2g), E[tau]=%.6g (se %.2g)",
        result.label, result.throughput, result.throughput_se, result.mean_tau, tau_se,
    )
    return result


def estimate_from_state(
    policy: EmsPolicy,
    channel: ChannelSpec,
    u0: float,
    n_episodes: int,
    master_seed: int,
    *,
    max_slots: int = 1_000_000,
) -> StateEstimate:
    """Simulate the future of EMS episodes started at unresolved information ``u0``."""
    if n_episodes < 1:
        msg = f"need at least one episode, got {n_episodes}"
        raise DomainError(msg)
    law = build_law(channel)
    rewards = np.empty(n_episodes, dtype=np.float64)
    slots = np.empty(n_episodes, dtype=np.float64)
    for index in range(n_episodes):
        stream = episode_stream(law, master_seed, index)
        rewards[index], slots[index] = run_ems_from_state(
            policy, u0, stream, max_slots=max_slots
        )
    reward, reward_se = _mean_se(rewards)
    mean_slots, slots_se = _mean_se(slots)
    return StateEstimate(u0, n_episodes, reward, reward_se, mean_slots, slots_se)


def collect_traces(
    policy: RatePolicy,
    channel: ChannelSpec,
    count: int,
    master_seed: int,
    *,
    max_slots: int = 1_000_000,
) -> list[EpisodeTrace]:
    """The first ``count`` episodes of the run ``estimate`` would make with this seed."""
    law = build_law(channel)
    return [
        run_episode(policy, episode_stream(law, master_seed, index), max_slots=max_slots)
        for index in range(count)
    ]


# ---------------------------------------------------------------------------
# Comparison
# ---------------------------------------------------------------------------

def _z_score(estimated: float, predicted: float, se: float) -> float:
    if math.isnan(se):
        return math.nan
    diff = estimated - predicted
    if se > 0.0:
        return diff / se
    if diff == 0.0:
        return 0.0
    return math.copysign(math.inf, diff)


def compare(
    result: RenewalEstimate, prediction: TradeoffPoint, *, threshold: float = 3.0
) -> Verdict:
    """z-scores of the simulated throughput and E[tau] against an analytic point."""
    if result.label != prediction.label:
        msg = f"cannot compare {result.label} simulation with {prediction.label} prediction"
        raise ComparisonError(msg)
    verdict = Verdict(
        label=result.label,
        predicted_eta=prediction.throughput,
        predicted_tau=prediction.avg_decoding_time,
        estimated_eta=result.throughput,
        estimated_tau=result.mean_tau,
        z_eta=_z_score(result.throughput, prediction.throughput, result.throughput_se),
        z_tau=_z_score(result.mean_tau, prediction.avg_decoding_time, result.mean_tau_se),
        threshold=threshold,
    )
    if not verdict.passed:
        logger.warning(
            "%s: simulation disagrees with analysis (z_eta=%.2f, z_tau=%.2f)",
            verdict.label, verdict.z_eta, verdict.z_tau,
        )
    return verdict
