"""One-dimensional music signals: containers, dyadic splitting, synthesis, WAV I/O."""

from __future__ import annotations

import json
import math
import os
import wave
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .rng import SplitMix64

_FULL_SCALE = {1: 128, 2: 1 << 15, 3: 1 << 23, 4: 1 << 31}


class WavError(ValueError):
    """Base class for WAV decoding failures."""


class MalformedWavError(WavError):
    pass


class NonPcmWavError(WavError):
    pass


class EmptyWavError(WavError):
    pass


def _frozen_array(samples) -> np.ndarray:
    arr = np.array(samples, dtype=np.float64).reshape(-1)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class MusicSignal:
    """A mono signal with amplitudes in [-1, 1]."""

    id: str
    samples: np.ndarray
    sample_rate: int = 8000

    def __post_init__(self):
        arr = _frozen_array(self.samples)
        object.__setattr__(self, "samples", arr)
        if not self.id:
            raise ValueError("signal id must be non-empty")
        if arr.size < 1:
            raise ValueError(f"signal {self.id!r} has no samples")
        if not np.all(np.isfinite(arr)):
            raise ValueError(f"signal {self.id!r} contains non-finite samples")
        if arr.min() < -1.0 or arr.max() > 1.0:
            raise ValueError(f"signal {self.id!r} has samples outside [-1, 1]")
        if int(self.sample_rate) <= 0:
            raise ValueError(f"sample_rate must be positive, got {self.sample_rate}")

    def __len__(self) -> int:
        return self.samples.size

    def __eq__(self, other):
        if not isinstance(other, MusicSignal):
            return NotImplemented
        return (
            self.id == other.id
            and self.sample_rate == other.sample_rate
            and np.array_equal(self.samples, other.samples)
        )

    __hash__ = None


@dataclass(frozen=True)
class Corpus:
    """Ordered collection of signals with distinct ids."""

    signals: tuple[MusicSignal, ...]

    def __post_init__(self):
        sigs = tuple(self.signals)
        object.__setattr__(self, "signals", sigs)
        if not sigs:
            raise ValueError("corpus must contain at least one signal")
        seen = set()
        for s in sigs:
            if s.id in seen:
                raise ValueError(f"duplicate signal id {s.id!r}")
            seen.add(s.id)

    def __len__(self) -> int:
        return len(self.signals)

    def __iter__(self):
        return iter(self.signals)

    def __getitem__(self, key: int | str) -> MusicSignal:
        if isinstance(key, str):
            for s in self.signals:
                if s.id == key:
                    return s
            raise KeyError(key)
        return self.signals[key]

    @property
    def ids(self) -> list[str]:
        return [s.id for s in self.signals]


@dataclass(frozen=True, eq=False)
class Segment:
    parent_id: str
    level: int
    position: int
    start: int
    samples: np.ndarray = field(repr=False)

    def __len__(self) -> int:
        return self.samples.size


def split_bounds(n: int, levels: int) -> list[list[tuple[int, int]]]:
    """(start, stop) offsets of every dyadic segment, level by level.

    Each halving gives the left child ``ceil(n / 2)`` samples.
    """
    if levels < 0:
        raise ValueError(f"levels must be non-negative, got {levels}")
    if n < 1:
        raise ValueError("cannot split an empty sequence")
    if n < 2**levels:
        raise ValueError(
            f"length {n} is too short for {levels} levels (need at least {2**levels} samples)"
        )
    out = [[(0, n)]]
    for _ in range(levels):
        nxt = []
        for a, b in out[-1]:
            mid = a + (b - a + 1) // 2
            nxt.append((a, mid))
            nxt.append((mid, b))
        out.append(nxt)
    return out


def split_dyadic(samples: Sequence[float] | np.ndarray, levels: int, parent_id: str = "") -> list[list[Segment]]:
    arr = np.asarray(samples, dtype=np.float64).reshape(-1)
    bounds = split_bounds(arr.size, levels)
    return [
        [Segment(parent_id, j, p, a, arr[a:b]) for p, (a, b) in enumerate(level)]
        for j, level in enumerate(bounds)
    ]


def synth_corpus(
    seed: int,
    count: int,
    length: int,
    sample_rate: int = 8000,
    noise: float = 0.05,
) -> Corpus:
    """Deterministic corpus of sinusoid mixtures plus uniform noise.

    Per song, drawn in this order from one SplitMix64 stream seeded with
    ``seed``:

    1. ``k = 1 + next_u64() % 3`` sinusoids;
    2. ``gain = 0.2 + 0.7 * u``;
    3. for each sinusoid: ``freq = 40 + 960 * u`` Hz, ``amp = 0.2 + 0.8 * u``,
       ``phase = 2 * pi * u``;
    4. ``length`` noise draws ``u_n``.

    Sample ``n`` is ``gain * (1 - noise) * sum_k amp_k sin(2 pi f_k n / rate + phase_k) / sum_k amp_k
    + noise * (2 u_n - 1)``, which stays inside [-1, 1].
    """
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    if length < 2:
        raise ValueError(f"length must be >= 2, got {length}")
    if sample_rate < 1:
        raise ValueError(f"sample_rate must be positive, got {sample_rate}")
    if not 0.0 <= noise < 1.0:
        raise ValueError(f"noise must be in [0, 1), got {noise}")

    rng = SplitMix64(seed)
    t = np.arange(length, dtype=np.float64) / sample_rate
    signals = []
    for i in range(count):
        k = 1 + rng.next_u64() % 3
        gain = 0.2 + 0.7 * rng.uniform()
        tone = np.zeros(length)
        amp_total = 0.0
        for _ in range(k):
            freq = 40.0 + 960.0 * rng.uniform()
            amp = 0.2 + 0.8 * rng.uniform()
            phase = 2.0 * math.pi * rng.uniform()
            tone += amp * np.sin(2.0 * math.pi * freq * t + phase)
            amp_total += amp
        u = rng.uniform_block(length)
        x = gain * (1.0 - noise) * tone / amp_total + noise * (2.0 * u - 1.0)
        signals.append(MusicSignal(f"song{i:04d}", np.clip(x, -1.0, 1.0), sample_rate))
    return Corpus(tuple(signals))


def _decode_pcm(raw: bytes, width: int, channels: int) -> np.ndarray:
    if width == 1:
        ints = np.frombuffer(raw, dtype=np.uint8).astype(np.int64) - 128
    elif width == 2:
        ints = np.frombuffer(raw, dtype="<i2").astype(np.int64)
    elif width == 3:
        b = np.frombuffer(raw, dtype=np.uint8).reshape(-1, 3).astype(np.int64)
        ints = b[:, 0] | (b[:, 1] << 8) | (b[:, 2] << 16)
        ints = np.where(ints >= 1 << 23, ints - (1 << 24), ints)
    elif width == 4:
        ints = np.frombuffer(raw, dtype="<i4").astype(np.int64)
    else:
        raise NonPcmWavError(f"unsupported sample width: {width} bytes")
    frames = ints.reshape(-1, channels)
    mono = frames.mean(axis=1) if channels > 1 else frames[:, 0].astype(np.float64)
    return mono / _FULL_SCALE[width]


def load_wav(path: str | os.PathLike, id: str | None = None) -> MusicSignal:
    """Decode a PCM WAV file to a mono signal scaled to [-1, 1].

    Channels are averaged per frame; the integer full scale (2**(bits-1))
    maps to 1.0.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such WAV file: {path}")
    try:
        with wave.open(str(path), "rb") as w:
            channels = w.getnchannels()
            width = w.getsampwidth()
            rate = w.getframerate()
            nframes = w.getnframes()
            raw = w.readframes(nframes)
    except wave.Error as exc:
        msg = str(exc)
        if msg.startswith("unknown format"):
            raise NonPcmWavError(f"{path}: not integer PCM ({msg})") from exc
        raise MalformedWavError(f"{path}: malformed header ({msg})") from exc
    except EOFError as exc:
        raise MalformedWavError(f"{path}: malformed header (truncated)") from exc
    if channels < 1 or rate < 1:
        raise MalformedWavError(f"{path}: malformed header (channels={channels}, rate={rate})")
    if nframes == 0 or not raw:
        raise EmptyWavError(f"{path}: zero-length data chunk")
    frame_size = channels * width
    if len(raw) != nframes * frame_size:
        raise MalformedWavError(
            f"{path}: malformed header (data chunk declares {nframes * frame_size} bytes, found {len(raw)})"
        )
    samples = _decode_pcm(raw, width, channels)
    return MusicSignal(id or path.stem, samples, rate)


def save_wav(signal: MusicSignal, path: str | os.PathLike, bits: int = 16) -> None:
    """Write a mono PCM WAV, rounding to the nearest integer code."""
    if bits not in (8, 16, 24, 32):
        raise ValueError(f"unsupported bit depth {bits}")
    width = bits // 8
    fs = _FULL_SCALE[width]
    ints = np.clip(np.rint(signal.samples * fs), -fs, fs - 1).astype(np.int64)
    if width == 1:
        raw = (ints + 128).astype(np.uint8).tobytes()
    elif width == 2:
        raw = ints.astype("<i2").tobytes()
    elif width == 3:
        u = ints & 0xFFFFFF
        raw = np.stack([u & 0xFF, (u >> 8) & 0xFF, (u >> 16) & 0xFF], axis=1).astype(np.uint8).tobytes()
    else:
        raw = ints.astype("<i4").tobytes()
    with wave.open(str(path), "wb") as w:
        w.setnchannels(1)
        w.setsampwidth(width)
        w.setframerate(int(signal.sample_rate))
        w.writeframes(raw)


def read_manifest(path: str | os.PathLike) -> list[tuple[str, Path]]:
    """Parse a JSON-lines manifest of ``{"id", "path"}`` records.

    Relative paths resolve against the manifest's directory.
    """
    path = Path(path)
    base = path.parent
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
                sid, p = str(rec["id"]), Path(rec["path"])
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise ValueError(f"{path}:{lineno}: bad manifest record ({exc})") from exc
            out.append((sid, p if p.is_absolute() else base / p))
    return out


def write_manifest(path: str | os.PathLike, entries: Iterable[tuple[str, str | os.PathLike]]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for sid, p in entries:
            fh.write(json.dumps({"id": sid, "path": str(p)}, sort_keys=True) + "\n")


def load_corpus(manifest: str | os.PathLike) -> Corpus:
    return Corpus(tuple(load_wav(p, id=sid) for sid, p in read_manifest(manifest)))
