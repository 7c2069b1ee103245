"""Deterministic random number generation.

One generator algorithm (PCG64) is used everywhere in the repo and its name
is recorded in checkpoints next to the seed. The contract: identical seed +
identical call sequence => bit-identical output stream within one build.
"""
from __future__ import annotations

import numpy as np

ALGORITHM = "pcg64"


class Rng:
    """Seeded wrapper around numpy's PCG64 generator.

    ``fork()`` derives independent child streams deterministically (via
    SeedSequence spawning), so components like teacher init can get their
    own stream without perturbing the parent's call sequence.
    """

    def __init__(self, seed: int, _ss: np.random.SeedSequence | None = None):
        self.seed = int(seed)
        self.algorithm = ALGORITHM
        self._ss = _ss if _ss is not None else np.random.SeedSequence(self.seed)
        self._gen = np.random.Generator(np.random.PCG64(self._ss))

    def fork(self) -> "Rng":
        (child,) = self._ss.spawn(1)
        return Rng(self.seed, _ss=child)

    def normal(self, shape, std: float = 1.0, dtype=np.float32) -> np.ndarray:
        out = self._gen.standard_normal(size=shape, dtype=np.dtype(dtype))
        if std != 1.0:
            out = out * np.dtype(dtype).type(std)
        return out

    def uniform(self, shape=None, low: float = 0.0, high: float = 1.0, dtype=np.float64):
        out = self._gen.random(size=shape, dtype=np.dtype(dtype))
        return low + (high - low) * out

    def integers(self, low: int, high: int, size=None):
        return self._gen.integers(low, high, size=size)

    def choice_no_replace(self, n: int, k: int) -> np.ndarray:
        """k distinct indices drawn uniformly from range(n)."""
        return self._gen.choice(n, size=k, replace=False)

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)
