"""Seeded, platform-stable random number state."""

import copy
from typing import Any, Dict

import numpy as np

SEED_MASK = (1 << 64) - 1


class RngState:
    """
    Deterministic generator wrapper.

    Backed by numpy's PCG64 bit generator, whose stream is fixed across
    platforms for a given seed. The full state can be exported to and
    restored from a JSON-compatible dict for checkpointing.
    """

    def __init__(self, seed: int = 0):
        self.seed = int(seed) & SEED_MASK
        self.generator = np.random.Generator(np.random.PCG64(self.seed))

    def spawn(self, stream: int) -> "RngState":
        """Independent child state, e.g. one per purpose (init, shuffle, dropout)."""
        return RngState((self.seed * 0x9E3779B97F4A7C15 + stream + 1) & SEED_MASK)

    def uniform(self, low: float, high: float, size) -> np.ndarray:
        return self.generator.uniform(low, high, size)

    def normal(self, loc: float = 0.0, scale: float = 1.0, size=None) -> np.ndarray:
        return self.generator.normal(loc, scale, size)

    def random(self, size=None) -> np.ndarray:
        return self.generator.random(size)

    def permutation(self, n: int) -> np.ndarray:
        return self.generator.permutation(n)

    def get_state(self) -> Dict[str, Any]:
        return {"seed": self.seed, "bit_generator": copy.deepcopy(self.generator.bit_generator.state)}

    @classmethod
    def from_state(cls, state: Dict[str, Any]) -> "RngState":
        rng = cls(state["seed"])
        rng.generator.bit_generator.state = copy.deepcopy(state["bit_generator"])
        return rng

    def __repr__(self):
        return f"RngState(seed={self.seed})"
