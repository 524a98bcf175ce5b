"""Equal-width histograms, their prefix sums, and mass normalization.

Bin ``i`` (0-based) covers ``[min_D + i*w, min_D + (i+1)*w)``; the last bin is
also closed on the right. Samples outside ``[min_D, max_D]`` are clamped into
the first or last bin, so every sample is counted exactly once.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class BinSpec:
    min_D: float
    max_D: float
    t: int

    def __post_init__(self):
        if not (math.isfinite(self.min_D) and math.isfinite(self.max_D)):
            raise ValueError("bin range must be finite")
        if self.min_D > self.max_D:
            raise ValueError(f"min_D {self.min_D} exceeds max_D {self.max_D}")
        if int(self.t) != self.t or self.t < 1:
            raise ValueError(f"bin count must be a positive integer, got {self.t}")
        object.__setattr__(self, "t", int(self.t))

    @property
    def w(self) -> float:
        return (self.max_D - self.min_D) / self.t

    @classmethod
    def from_width(cls, min_D: float, max_D: float, w: float) -> "BinSpec":
        return cls(min_D, max_D, bin_count(min_D, max_D, w))

    def edges(self) -> np.ndarray:
        return np.linspace(self.min_D, self.max_D, self.t + 1)


def bin_count(min_D: float, max_D: float, w: float) -> int:
    """Number of bins of width ``w`` needed to cover ``[min_D, max_D]``."""
    if not w > 0:
        raise ValueError(f"bin width must be positive, got {w}")
    if max_D < min_D:
        raise ValueError(f"max_D {max_D} is below min_D {min_D}")
    if max_D == min_D:
        return 1
    return max(1, math.ceil((max_D - min_D) / w))


def bin_indices(samples, spec: BinSpec) -> np.ndarray:
    """0-based bin of each sample, with out-of-range values clamped."""
    x = np.asarray(samples, dtype=np.float64).reshape(-1)
    span = spec.max_D - spec.min_D
    if span == 0:
        return np.zeros(x.size, dtype=np.intp)
    idx = np.floor((x - spec.min_D) * spec.t / span)
    return np.clip(idx, 0, spec.t - 1).astype(np.intp)


@dataclass(frozen=True, eq=False)
class Histogram:
    spec: BinSpec
    counts: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.counts, dtype=np.int64).reshape(-1)
        if c.size != self.spec.t:
            raise ValueError(f"expected {self.spec.t} counts, got {c.size}")
        if np.any(c < 0):
            raise ValueError("counts must be non-negative")
        object.__setattr__(self, "counts", c)

    @property
    def n(self) -> int:
        return int(self.counts.sum())

    def __eq__(self, other):
        if not isinstance(other, Histogram):
            return NotImplemented
        return self.spec == other.spec and np.array_equal(self.counts, other.counts)

    __hash__ = None


@dataclass(frozen=True, eq=False)
class CumulativeHistogram:
    spec: BinSpec
    cumcounts: np.ndarray

    @property
    def n(self) -> int:
        return int(self.cumcounts[-1])


@dataclass(frozen=True, eq=False)
class NormalizedHistogram:
    spec: BinSpec
    mass: np.ndarray


def build_histogram(samples, spec: BinSpec) -> Histogram:
    idx = bin_indices(samples, spec)
    return Histogram(spec, np.bincount(idx, minlength=spec.t))


def cumulative(h: Histogram) -> CumulativeHistogram:
    return CumulativeHistogram(h.spec, np.cumsum(h.counts))


def normalize(h: Histogram) -> NormalizedHistogram:
    n = h.n
    if n == 0:
        raise ValueError("cannot normalize an empty histogram")
    return NormalizedHistogram(h.spec, h.counts / n)
