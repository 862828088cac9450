"""Seeded random streams for reproducible emulation."""
from typing import Tuple

import numpy as np


class SeedTree:
    """
    Root seed from which independent child generators are derived by key.

    A child keyed by, say, (receiver_id, stream_index) is the same no matter
    which thread asks for it or in which order, so parallel runs stay
    bit-identical to serial ones.
    """

    def __init__(self, seed: int = 0):
        self._seed = int(seed)

    @property
    def seed(self) -> int:
        return self._seed

    def sequence(self, *key: int) -> np.random.SeedSequence:
        spawn_key: Tuple[int, ...] = tuple(int(k) for k in key)
        return np.random.SeedSequence(self._seed, spawn_key=spawn_key)

    def child(self, *key: int) -> np.random.Generator:
        return np.random.default_rng(self.sequence(*key))

    def fork(self, *key: int) -> "SeedTree":
        """A sub-tree whose root is derived from this seed and `key`."""
        state = self.sequence(*key).generate_state(1, dtype=np.uint32)[0]
        return SeedTree(int(state))

    def __repr__(self) -> str:
        return f"<SeedTree(seed={self._seed})>"


def complex_gaussian(rng: np.random.Generator, n: int, power: float = 1.0) -> np.ndarray:
    """Circularly-symmetric complex Gaussian samples with E|x|^2 = power."""
    scale = np.sqrt(power / 2.0)
    return scale * (rng.standard_normal(n) + 1j * rng.standard_normal(n))
