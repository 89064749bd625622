# app/core/rng.py - Seedable random streams shared by init, sampling and dropout
"""
Every stochastic operation takes an explicit Rng. The generator family is numpy's PCG64,
which produces identical streams on every platform for the same seed and call sequence.
Child streams derived with spawn() are independent of the parent's position.
"""

from typing import Sequence, Union

import numpy as np

ALGORITHM = "PCG64"


class Rng:
    def __init__(self, seed: int):
        if seed < 0 or seed >= 2 ** 64:
            raise ValueError(f"seed must fit in 64 unsigned bits, got {seed}")
        self.seed = int(seed)
        self.algorithm = ALGORITHM
        self._gen = np.random.Generator(np.random.PCG64(self.seed))

    def spawn(self, *key: Union[int, str]) -> "Rng":
        """Independent child stream determined only by (seed, key)"""
        words = [self.seed & 0xFFFFFFFF, self.seed >> 32]
        for part in key:
            if isinstance(part, str):
                words.extend(part.encode("utf-8"))
            else:
                words.append(int(part))
        child_seed = int(np.random.SeedSequence(words).generate_state(1, dtype=np.uint64)[0])
        return Rng(child_seed)

    def random(self, shape=None) -> np.ndarray:
        return self._gen.random(shape)

    def uniform(self, low: float, high: float, shape=None) -> np.ndarray:
        return self._gen.uniform(low, high, shape)

    def normal(self, shape=None, scale: float = 1.0) -> np.ndarray:
        return self._gen.normal(0.0, scale, shape)

    def integers(self, low: int, high: int, size=None) -> np.ndarray:
        return self._gen.integers(low, high, size=size)

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)

    def choice(self, options: Sequence, size=None, replace: bool = True):
        return self._gen.choice(options, size=size, replace=replace)

    def __repr__(self):
        return f"Rng(seed={self.seed}, algorithm={self.algorithm})"
