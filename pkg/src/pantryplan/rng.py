"""Seeded pseudo-randomness shared by sampling and the solver.

splitmix64 is fixed as the generator so that sampled subsets and candidate
schedules are identical for a given seed no matter where the code runs.
"""

from __future__ import annotations

_MASK64 = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


class SplitMix64:
    """splitmix64 stream; state advances by the golden-gamma each draw."""

    def __init__(self, seed: int):
        self._state = seed & _MASK64

    def next_u64(self) -> int:
        self._state = (self._state + _GAMMA) & _MASK64
        z = self._state
        z = ((z ^ (z >> 30)) * _MIX1) & _MASK64
        z = ((z ^ (z >> 27)) * _MIX2) & _MASK64
        return z ^ (z >> 31)

    def below(self, bound: int) -> int:
        """Uniform-ish integer in [0, bound) by modulo reduction.

        Modulo bias is negligible for bounds far below 2**64 and keeps the
        reduction trivially portable, which matters more here than the last
        ~1e-15 of uniformity.
        """
        if bound <= 0:
            raise ValueError("bound must be positive")
        return self.next_u64() % bound

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates shuffle driven by this stream."""
        for i in range(len(items) - 1, 0, -1):
            j = self.below(i + 1)
            items[i], items[j] = items[j], items[i]


def sample_indices(n: int, k: int, seed: int) -> list[int]:
    """First k slots of a seeded partial Fisher-Yates over range(n).

    Returns indices in selection order. k may equal n (full shuffle order).
    """
    if not 0 <= k <= n:
        raise ValueError(f"cannot take {k} of {n}")
    rng = SplitMix64(seed)
    idx = list(range(n))
    for i in range(k):
        j = i + rng.below(n - i)
        idx[i], idx[j] = idx[j], idx[i]
    return idx[:k]
