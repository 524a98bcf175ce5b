"""Progressive filtering: score the pool, prune at the mean, move one level finer."""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .mrh import Index, MultiResHistogram, SignalTooShortError, build_mrh
from .signal import MusicSignal
from .similarity import MatchMode, match_level

# Scores within this relative distance of the mean count as equal to it, so
# rounding in the mean never flips a song whose score *is* the mean.
THRESHOLD_RTOL = 1e-12

PRUNE_KINDS = ("paper_literal", "keep_high", "quantile")


@dataclass(frozen=True)
class PrunePolicy:
    kind: str = "keep_high"
    survival: float = 1.0

    def __post_init__(self):
        if self.kind not in PRUNE_KINDS:
            raise ValueError(f"unknown prune policy {self.kind!r}; expected one of {PRUNE_KINDS}")
        if self.kind == "quantile" and not 0.0 < self.survival <= 1.0:
            raise ValueError(f"quantile survival rate must be in (0, 1], got {self.survival}")

    @classmethod
    def parse(cls, text: "str | PrunePolicy") -> "PrunePolicy":
        """Parse ``paper_literal``, ``keep_high`` or ``quantile:S`` (dashes allowed)."""
        if isinstance(text, cls):
            return text
        kind, _, arg = str(text).strip().lower().replace("-", "_").partition(":")
        if kind == "quantile":
            try:
                return cls("quantile", float(arg))
            except ValueError:
                raise ValueError(f"bad quantile survival rate in {text!r}") from None
        if arg:
            raise ValueError(f"prune policy {kind!r} takes no argument")
        return cls(kind)

    def __str__(self) -> str:
        return f"quantile:{self.survival:g}" if self.kind == "quantile" else self.kind


@dataclass(frozen=True)
class Stage:
    level: int
    mode: MatchMode = MatchMode.BEST_MATCH
    policy: PrunePolicy = field(default_factory=PrunePolicy)

    def __post_init__(self):
        object.__setattr__(self, "mode", MatchMode.parse(self.mode))
        object.__setattr__(self, "policy", PrunePolicy.parse(self.policy))
        if self.level < 0:
            raise ValueError(f"stage level must be non-negative, got {self.level}")


@dataclass(frozen=True)
class CascadeConfig:
    stages: tuple[Stage, ...]
    final_rank_level: int | None = None

    def __post_init__(self):
        stages = tuple(self.stages)
        object.__setattr__(self, "stages", stages)
        if not stages:
            raise ValueError("a cascade needs at least one stage")
        levels = [s.level for s in stages]
        if any(b < a for a, b in zip(levels, levels[1:])):
            raise ValueError(f"stage levels must be non-decreasing, got {levels}")
        if self.final_rank_level is None:
            object.__setattr__(self, "final_rank_level", levels[-1])
        elif self.final_rank_level < 0:
            raise ValueError("final_rank_level must be non-negative")

    @classmethod
    def coarse_to_fine(cls, levels: int, mode="best_match", policy="keep_high") -> "CascadeConfig":
        """One stage per level 1..levels (a single level-0 stage when levels is 0)."""
        lvls = range(1, levels + 1) if levels > 0 else [0]
        return cls(tuple(Stage(j, mode, policy) for j in lvls))

    @classmethod
    def from_levels(cls, levels: Sequence[int], mode="best_match", policy="keep_high", final_rank_level=None):
        return cls(tuple(Stage(j, mode, policy) for j in levels), final_rank_level)

    @property
    def depth(self) -> int:
        return max(self.final_rank_level, *(s.level for s in self.stages))

    @property
    def final_mode(self) -> MatchMode:
        return self.stages[-1].mode


@dataclass(frozen=True)
class StageReport:
    stage_index: int
    level: int
    pool_in: int
    pool_out: int
    threshold_lower: float
    threshold_upper: float
    wall_time: float

    @property
    def achieved_survival(self) -> float:
        return self.pool_out / self.pool_in if self.pool_in else 0.0

    @property
    def pruning_rate(self) -> float:
        return 1.0 - self.achieved_survival


@dataclass(frozen=True)
class CascadeResult:
    query_id: str
    ranking: list[tuple[str, float]]
    reports: list[StageReport]

    @property
    def survivors(self) -> list[str]:
        return [sid for sid, _ in self.ranking]

    def rank_of(self, song_id: str) -> int | None:
        for i, (sid, _) in enumerate(self.ranking, 1):
            if sid == song_id:
                return i
        return None

    def to_dict(self) -> dict:
        return {
            "query_id": self.query_id,
            "ranking": [{"id": sid, "score": score} for sid, score in self.ranking],
            "stages": [
                {
                    "stage": r.stage_index,
                    "level": r.level,
                    "pool_in": r.pool_in,
                    "pool_out": r.pool_out,
                    "t_lower": r.threshold_lower,
                    "t_upper": r.threshold_upper,
                    "survival": r.achieved_survival,
                    "ms": r.wall_time * 1000.0,
                }
                for r in self.reports
            ],
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "CascadeResult":
        reports = [
            StageReport(
                stage_index=int(s.get("stage", i)),
                level=int(s.get("level", -1)),
                pool_in=int(s["pool_in"]),
                pool_out=int(s["pool_out"]),
                threshold_lower=float(s.get("t_lower", 0.0)),
                threshold_upper=float(s["t_upper"]),
                wall_time=float(s["ms"]) / 1000.0,
            )
            for i, s in enumerate(d["stages"], 1)
        ]
        ranking = [(str(r["id"]), float(r["score"])) for r in d["ranking"]]
        return cls(str(d["query_id"]), ranking, reports)


def thresholds(scores: Sequence[float]) -> tuple[float, float]:
    """Retention interval ``(0, mean)`` for one stage's scores."""
    scores = list(scores)
    if not scores:
        raise ValueError("cannot compute thresholds of an empty score list")
    return 0.0, math.fsum(scores) / len(scores)


def _rank(ids, scores: Mapping[str, float]) -> list[str]:
    return sorted(ids, key=lambda sid: (-scores[sid], sid))


def prune(pool: Sequence[str], scores: Mapping[str, float], policy="keep_high") -> list[str]:
    """Survivors of ``pool`` in pool order.

    paper_literal keeps ``0 <= score <= mean``; keep_high keeps
    ``score >= mean``; quantile:s keeps the ``ceil(s * n)`` best. If a rule
    would empty the pool the single best-scoring song is kept instead.
    """
    policy = PrunePolicy.parse(policy)
    missing = [sid for sid in pool if sid not in scores]
    if missing:
        raise KeyError(f"no score for pool members {missing[:5]}")
    if not pool:
        return []
    lo, hi = thresholds([scores[sid] for sid in pool])
    tol = THRESHOLD_RTOL * max(1.0, abs(hi))
    if policy.kind == "paper_literal":
        keep = [sid for sid in pool if lo - tol <= scores[sid] <= hi + tol]
    elif policy.kind == "keep_high":
        keep = [sid for sid in pool if scores[sid] >= hi - tol]
    else:
        k = min(len(pool), max(1, math.ceil(round(policy.survival * len(pool), 9))))
        chosen = set(_rank(pool, scores)[:k])
        keep = [sid for sid in pool if sid in chosen]
    if not keep:
        keep = _rank(pool, scores)[:1]
    return keep


def _query_tree(query, index: Index, depth: int) -> MultiResHistogram:
    if isinstance(query, MultiResHistogram):
        if query.spec != index.spec:
            raise ValueError("query tree was built with a different bin spec than the index")
        if query.levels < depth:
            raise ValueError(f"query tree has {query.levels} levels; cascade needs {depth}")
        return query
    try:
        return build_mrh(query, index.spec, depth)
    except SignalTooShortError as exc:
        raise SignalTooShortError(query.id, exc.length, depth) from None


def _score_pool(qm, index, pool, level, mode, workers):
    def one(sid):
        return match_level(qm, index.entries[sid], level, mode).score

    if workers > 1 and len(pool) > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            vals = list(ex.map(one, pool))
    else:
        vals = [one(sid) for sid in pool]
    return dict(zip(pool, vals))


def _check_config(config: CascadeConfig, index: Index) -> None:
    if config.depth > index.params.levels:
        raise ValueError(f"cascade uses level {config.depth} but the index only has levels 0..{index.params.levels}")


def run_cascade(query: MusicSignal | MultiResHistogram, index: Index, config: CascadeConfig, workers: int = 1) -> CascadeResult:
    _check_config(config, index)
    qm = _query_tree(query, index, config.depth)
    pool = sorted(index.entries)
    reports = []
    scores: dict[str, float] = {}
    for i, stage in enumerate(config.stages, 1):
        t0 = time.perf_counter()
        scores = _score_pool(qm, index, pool, stage.level, stage.mode, workers)
        lo, hi = thresholds([scores[sid] for sid in pool])
        survivors = prune(pool, scores, stage.policy)
        reports.append(StageReport(i, stage.level, len(pool), len(survivors), lo, hi, time.perf_counter() - t0))
        pool = survivors
    last = config.stages[-1]
    if (config.final_rank_level, config.final_mode) != (last.level, last.mode):
        scores = _score_pool(qm, index, pool, config.final_rank_level, config.final_mode, workers)
    ranking = [(sid, scores[sid]) for sid in _rank(pool, scores)]
    return CascadeResult(qm.song_id, ranking, reports)


def full_scan(query: MusicSignal | MultiResHistogram, index: Index, level: int, mode="best_match") -> CascadeResult:
    """Score every indexed song at one level without pruning."""
    if level > index.params.levels:
        raise ValueError(f"level {level} exceeds index levels {index.params.levels}")
    qm = _query_tree(query, index, level)
    pool = sorted(index.entries)
    scores = _score_pool(qm, index, pool, level, MatchMode.parse(mode), 1)
    return CascadeResult(qm.song_id, [(sid, scores[sid]) for sid in _rank(pool, scores)], [])
