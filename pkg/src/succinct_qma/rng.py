"""Counter-based random source with a replayable draw log."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Sequence, Tuple

import numpy as np


def derive_seed(seed: int, *path: int) -> np.random.SeedSequence:
    """Per-trial seed material derived from a global seed and a counter path."""
    return np.random.SeedSequence([seed & ((1 << 64) - 1), *path])


@dataclass
class TracedRng:
    """Philox generator that records every draw as ``(index, label, value)``.

    Replaying with the same seed and the same call order reproduces the trace.
    """

    seed: int
    path: Tuple[int, ...] = ()
    trace: List[tuple] = field(default_factory=list)

    def __post_init__(self):
        self._gen = np.random.Generator(np.random.Philox(derive_seed(self.seed, *self.path)))

    def _log(self, label: str, value):
        self.trace.append((len(self.trace), label, value))
        return value

    def bit(self, label: str = "bit") -> int:
        return self._log(label, int(self._gen.integers(0, 2)))

    def below(self, bound: int, label: str = "int") -> int:
        """Uniform integer in ``[0, bound)``; bounds wider than 63 bits are supported."""
        if bound <= 0:
            raise ValueError("bound must be positive")
        if bound <= 1 << 62:
            return self._log(label, int(self._gen.integers(0, bound)))
        nbits = (bound - 1).bit_length()
        while True:
            words = self._gen.integers(0, 1 << 32, size=(nbits + 31) // 32, dtype=np.uint64)
            v = 0
            for w in words:
                v = (v << 32) | int(w)
            v >>= 32 * len(words) - nbits
            if v < bound:
                return self._log(label, v)

    def bits(self, nbits: int, label: str = "bits") -> int:
        return self.below(1 << nbits, label) if nbits > 0 else self._log(label, 0)

    def choice_index(self, probs: Sequence[float], label: str = "choice") -> int:
        p = np.asarray(probs, dtype=float)
        total = p.sum()
        if total <= 0:
            raise ValueError("no probability mass")
        r = self._gen.random() * total
        idx = int(np.searchsorted(np.cumsum(p), r, side="right"))
        return self._log(label, min(idx, len(p) - 1))

    def random(self, label: str = "u01") -> float:
        return self._log(label, float(self._gen.random()))

    def spawn(self, *path: int) -> "TracedRng":
        return TracedRng(self.seed, self.path + tuple(path))

    @property
    def generator(self) -> np.random.Generator:
        return self._gen
