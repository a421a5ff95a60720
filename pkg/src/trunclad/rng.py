"""Reproducible random streams.

Every stream is a Philox4x64 counter-based generator keyed by the pair
``(seed, stream_id)``.  Philox output depends only on key and counter, so a
stream yields the same sequence on any platform and regardless of how many
workers are running alongside it.
"""
from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1


def splitmix64(x: int) -> int:
    """One SplitMix64 output for state ``x`` (used to derive per-replication seeds)."""
    z = (x + 0x9E3779B97F4A7C15) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


class RngStream:
    """Single-owner random stream identified by ``(seed, stream_id)``.

    Do not share an instance between threads; create one stream per worker.
    """

    def __init__(self, seed: int, stream_id: int = 0):
        self.seed = int(seed) & MASK64
        self.stream_id = int(stream_id) & MASK64
        self._gen = np.random.Generator(np.random.Philox(key=[self.seed, self.stream_id]))

    def __repr__(self):
        return f"RngStream(seed={self.seed}, stream_id={self.stream_id})"

    def uniform(self, size=None):
        """Uniform draws on [0, 1) with 53-bit resolution."""
        return self._gen.random(size)

    def integers(self, low, high, size=None):
        """Integers in ``[low, high)``."""
        return self._gen.integers(low, high, size=size)

    def normal(self, size=None):
        return self._gen.standard_normal(size)

    def spawn(self, stream_id: int) -> "RngStream":
        """A sibling stream with the same seed and a different id."""
        return RngStream(self.seed, stream_id)
