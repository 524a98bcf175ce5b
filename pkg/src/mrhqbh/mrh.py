"""Multiresolution histogram trees and the corpus index built from them."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .histogram import BinSpec, Histogram, NormalizedHistogram, bin_indices
from .signal import Corpus, MusicSignal, split_bounds

MAX_LEVELS = 12


class SignalTooShortError(ValueError):
    def __init__(self, signal_id: str, length: int, levels: int):
        self.signal_id = signal_id
        self.length = length
        self.levels = levels
        super().__init__(
            f"signal {signal_id!r} has {length} samples; {levels} levels need at least {2**levels}"
        )


@dataclass(frozen=True, eq=False)
class MultiResHistogram:
    """Histograms of every dyadic segment of one signal, level by level.

    ``counts[j]`` is an int64 array of shape ``(2**j, t)`` in segment
    position order; ``masses[j]`` is the same divided by each segment's
    sample count.
    """

    song_id: str
    spec: BinSpec
    counts: tuple[np.ndarray, ...]
    masses: tuple[np.ndarray, ...] = field(init=False, repr=False)

    def __post_init__(self):
        counts = tuple(np.asarray(c, dtype=np.int64) for c in self.counts)
        for j, c in enumerate(counts):
            if c.shape != (2**j, self.spec.t):
                raise ValueError(f"level {j} counts have shape {c.shape}, expected {(2**j, self.spec.t)}")
            c.flags.writeable = False
        masses = []
        for c in counts:
            m = c / c.sum(axis=1, keepdims=True)
            m.flags.writeable = False
            masses.append(m)
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "masses", tuple(masses))

    @property
    def levels(self) -> int:
        return len(self.counts) - 1

    @property
    def n(self) -> int:
        return int(self.counts[0].sum())

    @property
    def node_count(self) -> int:
        return sum(c.shape[0] for c in self.counts)

    def histogram(self, level: int, position: int) -> Histogram:
        return Histogram(self.spec, self.counts[level][position])

    def normalized(self, level: int) -> list[NormalizedHistogram]:
        return [NormalizedHistogram(self.spec, m) for m in self.masses[level]]

    def __eq__(self, other):
        if not isinstance(other, MultiResHistogram):
            return NotImplemented
        return (
            self.song_id == other.song_id
            and self.spec == other.spec
            and len(self.counts) == len(other.counts)
            and all(np.array_equal(a, b) for a, b in zip(self.counts, other.counts))
        )

    __hash__ = None


def _check_levels(levels: int) -> None:
    if not 0 <= levels <= MAX_LEVELS:
        raise ValueError(f"levels must be in [0, {MAX_LEVELS}], got {levels}")


def build_mrh(signal: MusicSignal, spec: BinSpec, levels: int) -> MultiResHistogram:
    """Histogram each dyadic segment of ``signal`` at every level up to ``levels``.

    Every level is binned directly from the samples; nothing is summed up
    from children.
    """
    _check_levels(levels)
    x = signal.samples
    if x.size < 2**levels:
        raise SignalTooShortError(signal.id, x.size, levels)
    idx = bin_indices(x, spec)
    t = spec.t
    counts = []
    for bounds in split_bounds(x.size, levels):
        lengths = [b - a for a, b in bounds]
        seg = np.repeat(np.arange(len(bounds)), lengths)
        flat = np.bincount(seg * t + idx, minlength=len(bounds) * t)
        counts.append(flat.reshape(len(bounds), t))
    return MultiResHistogram(signal.id, spec, tuple(counts))


@dataclass(frozen=True)
class IndexParams:
    t: int
    levels: int
    min_D: float
    max_D: float
    amplitude_normalized: bool = True

    @property
    def spec(self) -> BinSpec:
        return BinSpec(self.min_D, self.max_D, self.t)

    def to_dict(self) -> dict:
        return {
            "amplitude_normalized": self.amplitude_normalized,
            "levels": self.levels,
            "max_D": self.max_D,
            "min_D": self.min_D,
            "t": self.t,
        }


@dataclass(frozen=True)
class Index:
    params: IndexParams
    entries: dict[str, MultiResHistogram]
    song_lengths: dict[str, int]

    def __post_init__(self):
        if set(self.entries) != set(self.song_lengths):
            raise ValueError("entries and song_lengths disagree on song ids")
        for sid, mrh in self.entries.items():
            if mrh.spec != self.params.spec or mrh.levels != self.params.levels:
                raise ValueError(f"entry {sid!r} was built with different parameters")
            if mrh.n != self.song_lengths[sid]:
                raise ValueError(f"entry {sid!r} counts {mrh.n} samples, expected {self.song_lengths[sid]}")

    @property
    def spec(self) -> BinSpec:
        return self.params.spec

    @property
    def M(self) -> int:
        return len(self.entries)

    @property
    def ids(self) -> list[str]:
        return list(self.entries)

    def __len__(self) -> int:
        return len(self.entries)


def build_index(corpus: Corpus, t: int, levels: int, workers: int = 1) -> Index:
    """Build the MRH of every song over the corpus-wide amplitude range.

    Entries are keyed in ascending id order, so the result does not depend
    on corpus order or on ``workers``.
    """
    _check_levels(levels)
    if len(corpus) == 0:
        raise ValueError("cannot index an empty corpus")
    for s in corpus:
        if len(s) < 2**levels:
            raise SignalTooShortError(s.id, len(s), levels)
    lo = min(float(s.samples.min()) for s in corpus)
    hi = max(float(s.samples.max()) for s in corpus)
    params = IndexParams(t=int(t), levels=levels, min_D=lo, max_D=hi)
    spec = params.spec
    signals = sorted(corpus, key=lambda s: s.id)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            trees = list(pool.map(lambda s: build_mrh(s, spec, levels), signals))
    else:
        trees = [build_mrh(s, spec, levels) for s in signals]
    entries = {tr.song_id: tr for tr in trees}
    lengths = {s.id: len(s) for s in signals}
    return Index(params, entries, lengths)
