"""Histogram similarity: MRHD, its Euclidean term, an L1 baseline, and tree matching.

MRHD is a similarity in [0, 1] on mass-normalized histograms: the histogram
intersection scaled by ``(sqrt(2) - d) / sqrt(2)``, where ``d`` is the
Euclidean distance over all bins. Identical histograms score 1, disjoint
supports score 0.

Bin sums run strictly left to right (``cumsum`` rather than ``sum``) so the
scalar and batched paths produce the same bits.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .mrh import MultiResHistogram

SQRT2 = math.sqrt(2.0)


class MatchMode(str, enum.Enum):
    ALIGNED = "aligned"
    BEST_MATCH = "best_match"

    @classmethod
    def parse(cls, value: "str | MatchMode") -> "MatchMode":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).strip().lower().replace("-", "_"))
        except ValueError:
            raise ValueError(f"unknown match mode {value!r}; expected aligned or best_match") from None


@dataclass(frozen=True)
class LevelScore:
    level: int
    score: float
    best_offset: int = -1
    query_level: int = -1


def _vec(h) -> np.ndarray:
    if hasattr(h, "mass"):
        return np.asarray(h.mass, dtype=np.float64)
    if hasattr(h, "counts"):
        return np.asarray(h.counts)
    return np.asarray(h)


def _check_same(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape[-1] != b.shape[-1]:
        raise ValueError(f"bin counts differ: {a.shape[-1]} vs {b.shape[-1]}")


def _rowsum(x: np.ndarray) -> np.ndarray:
    return np.cumsum(x, axis=-1)[..., -1]


def euclidean(h1, h2) -> float:
    a, b = _vec(h1), _vec(h2)
    _check_same(a, b)
    return float(np.sqrt(_rowsum((a - b) ** 2)))


def l1_distance(h1, h2) -> int | float:
    a, b = _vec(h1), _vec(h2)
    _check_same(a, b)
    out = np.abs(a - b).sum()
    return int(out) if np.issubdtype(out.dtype, np.integer) else float(out)


def mrhd_matrix(Q: np.ndarray, S: np.ndarray) -> np.ndarray:
    """MRHD of every row of ``Q`` (P x t) against every row of ``S`` (K x t)."""
    Q = np.atleast_2d(Q)
    S = np.atleast_2d(S)
    _check_same(Q, S)
    a, b = Q[:, None, :], S[None, :, :]
    inter = _rowsum(np.minimum(a, b))
    d = np.sqrt(_rowsum((a - b) ** 2))
    return np.clip(inter * (SQRT2 - d) / SQRT2, 0.0, 1.0)


def mrhd(h_s, h_q) -> float:
    return float(mrhd_matrix(_vec(h_s), _vec(h_q))[0, 0])


def query_level_for(q: MultiResHistogram, s: MultiResHistogram, level: int) -> int:
    """Query tree level whose segments are closest in length to ``s``'s at ``level``.

    Equal-length trees compare level to level. A query holding half as many
    samples as the song steps up one level, so its whole-signal histogram
    faces the song's half-length segments.
    """
    shift = round(math.log2(s.n / q.n))
    return min(max(level - shift, 0), q.levels)


def match_level(q: MultiResHistogram, s: MultiResHistogram, level: int, mode="best_match") -> LevelScore:
    """Score query tree ``q`` against song tree ``s`` at song level ``level``.

    aligned
        mean over positions p of MRHD(q[p], s[p]); both sides need the same
        number of segments.
    best_match
        mean over query positions p of the best MRHD over all song
        positions; ``best_offset`` is the argmax for p = 0 (lowest index on
        ties).
    """
    mode = MatchMode.parse(mode)
    if q.spec.t != s.spec.t:
        raise ValueError(f"bin counts differ: {q.spec.t} vs {s.spec.t}")
    if not 0 <= level <= s.levels:
        raise ValueError(f"level {level} not present in song tree {s.song_id!r} (levels 0..{s.levels})")
    jq = query_level_for(q, s, level)
    Q, S = q.masses[jq], s.masses[level]
    if mode is MatchMode.ALIGNED:
        if Q.shape[0] != S.shape[0]:
            raise ValueError(
                f"aligned mode needs equal segment counts; query has {Q.shape[0]}, song has {S.shape[0]}"
            )
        scores = np.array([mrhd_matrix(Q[p], S[p])[0, 0] for p in range(Q.shape[0])])
        return LevelScore(level, float(np.mean(scores)), -1, jq)
    m = mrhd_matrix(Q, S)
    best = m.max(axis=1)
    return LevelScore(level, float(np.mean(best)), int(np.argmax(m[0])), jq)
