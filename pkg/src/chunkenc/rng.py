"""Explicit-state 64-bit RNG used for every random draw in the package.

xorshift64* with a splitmix64-scrambled seed. The generator is small enough
to re-implement bit-for-bit anywhere, which keeps sampled chunk policies and
generated weight files reproducible across platforms and runs.
"""

MASK64 = (1 << 64) - 1

_SPLITMIX_GAMMA = 0x9E3779B97F4A7C15
_XORSHIFT_MULT = 0x2545F4914F6CDD1D


def _splitmix64(x: int) -> int:
    x = (x + _SPLITMIX_GAMMA) & MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK64
    return x ^ (x >> 31)


class Xorshift64(object):
    """xorshift64* stream seeded via splitmix64.

    Draw primitives, in the order the rest of the package documents them:
    ``next_u64`` advances the state once; ``uniform`` maps one draw to
    [0, 1) with 53-bit resolution; ``randint(lo, hi)`` maps one draw to an
    inclusive integer range by modulo reduction.
    """

    def __init__(self, seed: int):
        state = _splitmix64(seed & MASK64)
        # xorshift64* has a single fixed point at zero
        self._state = state if state != 0 else _SPLITMIX_GAMMA

    def next_u64(self) -> int:
        x = self._state
        x ^= (x >> 12)
        x = (x ^ (x << 25)) & MASK64
        x ^= (x >> 27)
        self._state = x
        return (x * _XORSHIFT_MULT) & MASK64

    def uniform(self) -> float:
        """One draw mapped to a float64 in [0, 1)."""
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def randint(self, lo: int, hi: int) -> int:
        """One draw mapped to an integer in [lo, hi], both ends inclusive."""
        if hi < lo:
            raise ValueError(f"empty integer range [{lo}, {hi}]")
        return lo + self.next_u64() % (hi - lo + 1)
