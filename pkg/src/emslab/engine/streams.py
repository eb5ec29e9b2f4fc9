"""Reproducible gain streams on counter-based per-episode substreams.

Each episode owns a Philox substream: the key is the master seed and the episode index
sits in the second counter word, so draws never depend on which worker runs an episode.
"""

from __future__ import annotations

from typing import TYPE_CHECKING

import numpy as np

from emslab.fading.base import FloatArray

if TYPE_CHECKING:
    from emslab.fading.base import FadingLaw

_BLOCK = 16


def substream(master_seed: int, episode_index: int) -> np.random.Generator:
    """Generator for episode ``episode_index`` under ``master_seed``."""
    bit_generator = np.random.Philox(key=master_seed, counter=episode_index << 64)
    return np.random.Generator(bit_generator)


class GainStream:
    """Stateful sampler yielding i.i.d. gains by inverse-CDF transform of uniforms."""

    def __init__(self, law: FadingLaw, generator: np.random.Generator) -> None:
        self.law = law
        self._generator = generator
        self._buffer: list[float] = []
        self.drawn = 0

    def next(self) -> float:
        if not self._buffer:
            uniforms = self._generator.random(_BLOCK)
            self._buffer = np.asarray(self.law.quantile(uniforms), dtype=np.float64).tolist()
            self._buffer.reverse()
        self.drawn += 1
        return self._buffer.pop()


def episode_stream(law: FadingLaw, master_seed: int, episode_index: int) -> GainStream:
    return GainStream(law, substream(master_seed, episode_index))


def sample_gains(law: FadingLaw, seed: int, count: int) -> FloatArray:
    """``count`` i.i.d. gains, deterministic in ``seed``."""
    if count < 0:
        msg = f"count must be nonnegative, got {count}"
        raise ValueError(msg)
    uniforms = np.random.Generator(np.random.Philox(key=seed)).random(count)
    return np.asarray(law.quantile(uniforms), dtype=np.float64)
