"""Seedable, portable random primitives for instance generation.

Generated benchmark instances must reproduce bit-for-bit from a seed,
including across language ports, so nothing here depends on a platform
RNG.  The stream is SplitMix64 (the mix function of Steele, Lea & Flood,
as in java.util.SplittableRandom): the state advances by the 64-bit
golden ratio and is scrambled by two xor-multiply rounds.  Derived
draws (floats, bounded ints, subsets) are defined exactly below so a
port only needs 64-bit unsigned arithmetic.
"""

from __future__ import annotations

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
MIX_A = 0xBF58476D1CE4E5B9
MIX_B = 0x94D049BB133111EB


def _finalize(z: int) -> int:
    z = ((z ^ (z >> 30)) * MIX_A) & MASK64
    z = ((z ^ (z >> 27)) * MIX_B) & MASK64
    return z ^ (z >> 31)


class SplitMix64:
    """SplitMix64 stream over 64-bit unsigned state."""

    def __init__(self, seed: int):
        self._state = seed & MASK64

    def next_u64(self) -> int:
        self._state = (self._state + GOLDEN) & MASK64
        return _finalize(self._state)

    def next_float(self) -> float:
        """Uniform in (0, 1]: top 53 bits of a draw, plus one, times 2**-53."""
        return ((self.next_u64() >> 11) + 1) * 2.0**-53

    def next_below(self, bound: int) -> int:
        """Uniform in [0, bound): 64x64 fixed-point multiply, no rejection."""
        return (self.next_u64() * bound) >> 64

    def next_in(self, lo: int, hi: int) -> int:
        """Uniform integer in [lo, hi] inclusive."""
        return lo + self.next_below(hi - lo + 1)

    def sample(self, size: int, k: int) -> list[int]:
        """k distinct indices from range(size): partial Fisher-Yates, result sorted."""
        if not 0 <= k <= size:
            raise ValueError(f"cannot sample {k} from {size}")
        idx = list(range(size))
        for j in range(k):
            r = j + self.next_below(size - j)
            idx[j], idx[r] = idx[r], idx[j]
        return sorted(idx[:k])


def mix(*parts: int) -> int:
    """Fold integers into one 64-bit seed (order-sensitive).

    Used to derive per-instance seeds from (base, sweep value, trial).
    """
    acc = GOLDEN
    for p in parts:
        acc = _finalize(((acc ^ (p & MASK64)) + GOLDEN) & MASK64)
    return acc
