"""Deterministic seeded random streams.

Every stochastic component draws from a SeededRng it owns exclusively; streams
are only ever handed off, never shared, so identical seeds plus identical call
sequences reproduce identical values everywhere.
"""

from __future__ import annotations

import math

import numpy as np


class SeededRng:
    """Counting wrapper around numpy's PCG64 generator, checkpointable."""

    def __init__(self, seed: int):
        self.seed = int(seed)
        self._gen = np.random.default_rng(self.seed)
        self.draw_count = 0

    def _bump(self, size) -> None:
        if size is None:
            self.draw_count += 1
        else:
            self.draw_count += int(math.prod(size)) if isinstance(size, tuple) else int(size)

    def random(self, size=None):
        self._bump(size)
        return self._gen.random(size)

    def uniform(self, low=0.0, high=1.0, size=None):
        self._bump(size)
        return self._gen.uniform(low, high, size)

    def normal(self, loc=0.0, scale=1.0, size=None):
        self._bump(size)
        return self._gen.normal(loc, scale, size)

    def integers(self, low, high=None, size=None):
        self._bump(size)
        return self._gen.integers(low, high, size)

    def choice_without_replacement(self, n: int, k: int) -> np.ndarray:
        self._bump(k)
        return self._gen.choice(n, size=k, replace=False)

    def spawn(self) -> "SeededRng":
        """Derive an independent child stream; consumes one draw."""
        return SeededRng(int(self.integers(0, 2**63)))

    def get_state(self) -> dict:
        return {
            "seed": self.seed,
            "draw_count": self.draw_count,
            "bit_generator": self._gen.bit_generator.state,
        }

    @classmethod
    def from_state(cls, state: dict) -> "SeededRng":
        rng = cls(state["seed"])
        rng.draw_count = int(state["draw_count"])
        rng._gen.bit_generator.state = state["bit_generator"]
        return rng
