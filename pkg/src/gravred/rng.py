"""Deterministic per-run random streams (splitmix64).

All stochastic engines draw from splitmix64 streams so that a run is
reproducible from (seed, run index) alone and the numba and numpy
kernel backends consume bit-identical uniforms. The generator state is
a single uint64; `derive_stream` gives independent streams for Monte
Carlo shards.
"""

import numpy as np

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


def mix64(z):
    """Finalizer of splitmix64 (integer in, integer out)."""
    z &= _MASK
    z = ((z ^ (z >> 30)) * _MIX1) & _MASK
    z = ((z ^ (z >> 27)) * _MIX2) & _MASK
    return z ^ (z >> 31)


def next_uint64(state):
    """Advance one splitmix64 step. Returns (new_state, value)."""
    state = (state + _GOLDEN) & _MASK
    return state, mix64(state)


def uint64_to_unit(value):
    """Map a uint64 to a double in [0, 1) with 53 random bits."""
    return (value >> 11) * 2.0 ** -53


def derive_stream(seed, index):
    """Derive an independent stream seed for shard/run `index`."""
    return mix64((seed & _MASK) ^ mix64((index + 1) * _GOLDEN))


def derive_streams(seed, n):
    """Vector of `n` derived stream seeds as uint64 ndarray."""
    idx = np.arange(1, n + 1, dtype=np.uint64)
    golden = np.uint64(_GOLDEN)
    z = idx * golden
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
    z = z ^ (z >> np.uint64(31))
    z = np.uint64(seed & _MASK) ^ z
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
    return z ^ (z >> np.uint64(31))


class Stream:
    """Tiny stateful wrapper around a splitmix64 stream."""

    def __init__(self, seed):
        self.state = seed & _MASK

    def uint64(self):
        self.state, v = next_uint64(self.state)
        return v

    def uniform(self):
        return uint64_to_unit(self.uint64())

    def exponential(self, rate):
        u = self.uniform()
        return -np.log1p(-u) / rate
