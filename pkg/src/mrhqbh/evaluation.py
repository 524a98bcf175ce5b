"""Retrieval metrics (MRR, MoA, Top-X) and synthetic query sets.

A rank of ``None`` means the target was pruned before the final ranking. It
counts as reciprocal rank 0, MoA 0 and a Top-X miss.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .cascade import CascadeConfig, run_cascade
from .mrh import Index
from .rng import SplitMix64
from .signal import Corpus, MusicSignal

DEFAULT_XS = (1, 5, 10, 20)

Rank = Optional[int]


def _check_ranks(ranks: Sequence[Rank]) -> list[Rank]:
    ranks = list(ranks)
    if not ranks:
        raise ValueError("need at least one rank")
    for r in ranks:
        if r is not None and (int(r) != r or r < 1):
            raise ValueError(f"ranks must be positive integers or None, got {r!r}")
    return ranks


def mrr(ranks: Sequence[Rank]) -> float:
    ranks = _check_ranks(ranks)
    return math.fsum(0.0 if r is None else 1.0 / r for r in ranks) / len(ranks)


def moa(ranks: Sequence[Rank], corpus_size: int) -> float:
    """Mean of ``(N - rank) / (N - 1)`` with ``N = corpus_size``."""
    ranks = _check_ranks(ranks)
    if corpus_size < 2:
        raise ValueError(f"corpus_size must be >= 2, got {corpus_size}")
    for r in ranks:
        if r is not None and r > corpus_size:
            raise ValueError(f"rank {r} exceeds corpus size {corpus_size}")
    return math.fsum(0.0 if r is None else (corpus_size - r) / (corpus_size - 1) for r in ranks) / len(ranks)


def top_x(ranks: Sequence[Rank], x: int) -> float:
    ranks = _check_ranks(ranks)
    if x < 1:
        raise ValueError(f"X must be a positive integer, got {x}")
    return sum(1 for r in ranks if r is not None and r <= x) / len(ranks)


@dataclass(frozen=True)
class GroundTruth:
    pairs: dict[str, str]

    def __len__(self) -> int:
        return len(self.pairs)

    @classmethod
    def read(cls, path: str | os.PathLike) -> "GroundTruth":
        pairs = {}
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                if not line.strip():
                    continue
                try:
                    rec = json.loads(line)
                    qid, tid = str(rec["query_id"]), str(rec["target_id"])
                except (json.JSONDecodeError, KeyError, TypeError) as exc:
                    raise ValueError(f"{path}:{lineno}: bad truth record ({exc})") from exc
                if qid in pairs:
                    raise ValueError(f"{path}:{lineno}: duplicate query id {qid!r}")
                pairs[qid] = tid
        return cls(pairs)

    def write(self, path: str | os.PathLike) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for qid in sorted(self.pairs):
                fh.write(json.dumps({"query_id": qid, "target_id": self.pairs[qid]}, sort_keys=True) + "\n")


def synth_queries(
    corpus: Corpus,
    seed: int,
    per_song: int = 1,
    fraction: float = 0.5,
    noise_db: float = math.inf,
    levels: int = 0,
) -> tuple[Corpus, GroundTruth]:
    """Noisy leading excerpts of every song, ``per_song`` times each.

    A query keeps the first ``floor(fraction * N)`` samples of its target.
    Noise is uniform, scaled to the requested SNR in dB against the excerpt's
    mean power, drawn from one SplitMix64 stream in corpus order, and the
    result is clipped to [-1, 1]. ``noise_db = inf`` adds nothing.
    """
    if per_song < 1:
        raise ValueError(f"per_song must be >= 1, got {per_song}")
    if not 0.0 < fraction <= 1.0:
        raise ValueError(f"fraction must be in (0, 1], got {fraction}")
    if math.isnan(noise_db) or noise_db == -math.inf:
        raise ValueError(f"noise_db must be a finite SNR or +inf, got {noise_db}")
    rng = SplitMix64(seed)
    queries, pairs = [], {}
    for song in corpus:
        n = math.floor(fraction * len(song))
        if n < max(1, 2**levels):
            raise ValueError(
                f"fraction {fraction} of {song.id!r} gives {n} samples; {levels} levels need {2**levels}"
            )
        head = song.samples[:n]
        for k in range(per_song):
            if math.isinf(noise_db) and noise_db > 0:
                x = head.copy()
            else:
                power = float(np.mean(head**2))
                amp = math.sqrt(3.0 * power / 10.0 ** (noise_db / 10.0))
                x = np.clip(head + amp * (2.0 * rng.uniform_block(n) - 1.0), -1.0, 1.0)
            qid = f"{song.id}_q{k}"
            queries.append(MusicSignal(qid, x, song.sample_rate))
            pairs[qid] = song.id
    return Corpus(tuple(queries)), GroundTruth(pairs)


@dataclass
class EvalReport:
    per_query_ranks: dict[str, Optional[int]]
    mrr: float
    moa: float
    top_x: dict[int, float]
    corpus_size: int
    params: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "corpus_size": self.corpus_size,
            "moa": self.moa,
            "mrr": self.mrr,
            "params": self.params,
            "per_query_ranks": dict(sorted(self.per_query_ranks.items())),
            "top_x": {str(x): v for x, v in sorted(self.top_x.items())},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, d: Mapping) -> "EvalReport":
        return cls(
            per_query_ranks={k: (None if v is None else int(v)) for k, v in d["per_query_ranks"].items()},
            mrr=float(d["mrr"]),
            moa=float(d["moa"]),
            top_x={int(k): float(v) for k, v in d["top_x"].items()},
            corpus_size=int(d["corpus_size"]),
            params=dict(d.get("params", {})),
        )

    def table(self) -> str:
        rows = [("queries", str(len(self.per_query_ranks))), ("songs", str(self.corpus_size))]
        rows.append(("pruned targets", str(sum(r is None for r in self.per_query_ranks.values()))))
        rows.append(("MRR", f"{self.mrr:.4f}"))
        rows.append(("MoA", f"{self.moa:.4f}"))
        rows += [(f"Top-{x}", f"{v:.4f}") for x, v in sorted(self.top_x.items())]
        width = max(len(k) for k, _ in rows)
        vwidth = max(len(v) for _, v in rows)
        return "\n".join(f"{k:<{width}}  {v:>{vwidth}}" for k, v in rows)


def evaluate(
    index: Index,
    queries: Corpus,
    truth: GroundTruth,
    config: CascadeConfig,
    xs: Iterable[int] = DEFAULT_XS,
    workers: int = 1,
) -> EvalReport:
    """Run the cascade for every query in ``truth`` and score where its target landed."""
    xs = sorted(set(int(x) for x in xs))
    if not truth.pairs:
        raise ValueError("ground truth is empty")
    dangling = sorted(t for t in set(truth.pairs.values()) if t not in index.entries)
    if dangling:
        raise KeyError(f"ground truth references songs missing from the index: {', '.join(dangling)}")
    by_id = {q.id: q for q in queries}
    missing = sorted(q for q in truth.pairs if q not in by_id)
    if missing:
        raise KeyError(f"ground truth references unknown queries: {', '.join(missing)}")
    ranks = {}
    for qid in sorted(truth.pairs):
        result = run_cascade(by_id[qid], index, config, workers=workers)
        ranks[qid] = result.rank_of(truth.pairs[qid])
    values = list(ranks.values())
    p = index.params
    params = {
        "t": p.t,
        "levels": p.levels,
        "min_D": p.min_D,
        "max_D": p.max_D,
        "stages": [{"level": s.level, "mode": s.mode.value, "prune": str(s.policy)} for s in config.stages],
        "final_rank_level": config.final_rank_level,
        "xs": xs,
    }
    return EvalReport(
        per_query_ranks=ranks,
        mrr=mrr(values),
        moa=moa(values, index.M),
        top_x={x: top_x(values, x) for x in xs},
        corpus_size=index.M,
        params=params,
    )
