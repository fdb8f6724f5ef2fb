"""Portable fixture generator built on the splitmix64 mixer.

Element ``i`` of a stream seeded with ``seed`` depends only on ``(seed, i)``,
so fixtures are reproducible across platforms and implementations and can
be generated in one vectorized pass.
"""
import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)


def splitmix64(seed, count, offset=0):
    """Return ``count`` consecutive 64-bit outputs as a uint64 array."""
    idx = np.arange(offset + 1, offset + count + 1, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = np.uint64(seed & 0xFFFFFFFFFFFFFFFF) + idx * _GOLDEN
        z = (z ^ (z >> np.uint64(30))) * _M1
        z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


class FixtureRNG:
    """Sequential stream over :func:`splitmix64`."""

    def __init__(self, seed=0):
        self.seed = int(seed)
        self._pos = 0

    def _next(self, count):
        out = splitmix64(self.seed, count, self._pos)
        self._pos += count
        return out

    def uniform(self, shape, low=-1.0, high=1.0):
        n = int(np.prod(shape, dtype=np.int64))
        unit = (self._next(n) >> np.uint64(11)).astype(np.float64) * 2.0**-53
        return (low + (high - low) * unit).reshape(shape)

    def integers(self, shape, low, high):
        """Integers in ``[low, high)``; the modulo bias is below 2**-40 for small ranges."""
        n = int(np.prod(shape, dtype=np.int64))
        span = np.uint64(high - low)
        return ((self._next(n) % span).astype(np.int64) + low).reshape(shape)

    def int8(self, shape):
        return self.integers(shape, -128, 128).astype(np.int8)

    def normal(self, shape, sigma=1.0):
        u1 = self.uniform(shape, 0.0, 1.0)
        u2 = self.uniform(shape, 0.0, 1.0)
        return sigma * np.sqrt(-2.0 * np.log1p(-u1)) * np.cos(2.0 * np.pi * u2)
