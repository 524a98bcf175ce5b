"""SplitMix64 pseudorandom generator.

All synthetic data in this package is drawn from this generator so that any
implementation following the same recipe reproduces it bit for bit.

One step::

    state = (state + 0x9E3779B97F4A7C15) mod 2**64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) mod 2**64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) mod 2**64
    return z ^ (z >> 31)

Uniform doubles in [0, 1) take the top 53 bits: ``(z >> 11) * 2**-53``.
Because the state advances by a constant, the k-th output only depends on
``seed + k * GAMMA``, which lets :meth:`SplitMix64.uniform_block` produce a
run of draws with numpy in one shot.
"""

from __future__ import annotations

import numpy as np

GAMMA = 0x9E3779B97F4A7C15
MASK64 = (1 << 64) - 1
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


def _mix(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
    return z ^ (z >> np.uint64(31))


class SplitMix64:
    """Stateful SplitMix64 stream."""

    def __init__(self, seed: int):
        self.state = int(seed) & MASK64

    def next_u64(self) -> int:
        return int(self.u64_block(1)[0])

    def uniform(self) -> float:
        return float(self.uniform_block(1)[0])

    def u64_block(self, n: int) -> np.ndarray:
        """Next ``n`` raw outputs as a uint64 array; advances the stream by ``n``."""
        if n < 0:
            raise ValueError(f"block size must be non-negative, got {n}")
        k = np.arange(1, n + 1, dtype=np.uint64)
        with np.errstate(over="ignore"):
            states = np.uint64(self.state) + k * np.uint64(GAMMA)
            out = _mix(states)
        self.state = (self.state + n * GAMMA) & MASK64
        return out

    def uniform_block(self, n: int) -> np.ndarray:
        return (self.u64_block(n) >> np.uint64(11)).astype(np.float64) * 2.0**-53
