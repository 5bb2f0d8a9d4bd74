"""Deterministic random number generation.

Every stochastic component (initialization, dropout, shuffling, sampling)
draws from an ``Rng`` so that a run is fully determined by its seed. Streams
for independent purposes are derived with :meth:`Rng.child` so that adding a
consumer never shifts the draws of another.
"""

from __future__ import annotations

import hashlib

import numpy as np


class Rng:
    """Seeded PCG64 stream with a draw counter.

    The same (seed, call sequence) yields the same outputs on every platform
    supported by numpy's Generator bit-stream compatibility guarantee.
    """

    algorithm = "pcg64"

    def __init__(self, seed: int):
        self.seed = int(seed)
        self.position = 0
        self._gen = np.random.Generator(np.random.PCG64(self.seed))

    def __repr__(self) -> str:
        return f"Rng(algorithm={self.algorithm!r}, seed={self.seed}, position={self.position})"

    def child(self, tag: str) -> "Rng":
        """Derive an independent stream named by ``tag``.

        Derivation hashes (seed, tag) and does not consume from this stream.
        """
        digest = hashlib.sha256(f"{self.seed}:{tag}".encode("utf-8")).digest()
        return Rng(int.from_bytes(digest[:8], "little"))

    def uniform(self, low: float = 0.0, high: float = 1.0, size=None) -> np.ndarray:
        self.position += 1
        return self._gen.uniform(low, high, size)

    def normal(self, mean: float = 0.0, std: float = 1.0, size=None) -> np.ndarray:
        self.position += 1
        return self._gen.normal(mean, std, size)

    def integers(self, low: int, high: int, size=None) -> np.ndarray:
        """Integers drawn uniformly from [low, high)."""
        self.position += 1
        return self._gen.integers(low, high, size)

    def permutation(self, n: int) -> np.ndarray:
        self.position += 1
        return self._gen.permutation(n)

    def shuffle(self, seq: list) -> None:
        """In-place Fisher-Yates shuffle of a Python list."""
        self.position += 1
        self._gen.shuffle(seq)

    def sample_indices(self, n: int, k: int) -> list[int]:
        """k distinct indices from range(n), order randomized."""
        if k > n:
            raise ValueError(f"cannot sample {k} items from a population of {n}")
        return [int(i) for i in self.permutation(n)[:k]]
