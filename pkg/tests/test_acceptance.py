"""Exit criteria for the build, one test per criterion.

Run ``pytest tests/test_acceptance.py`` (or the whole suite) to get a
PASS/FAIL line per criterion in the terminal summary. Criterion 10, the
runtime of the whole suite, is only judged on full runs.
"""

import json
import time

import numpy as np
import pytest

from mrhqbh.cascade import CascadeConfig, run_cascade
from mrhqbh.evaluation import evaluate, moa, mrr, synth_queries, top_x
from mrhqbh.histogram import BinSpec, NormalizedHistogram, build_histogram, cumulative
from mrhqbh.index_file import BadMagicError, IndexFormatError, load_index, save_index
from mrhqbh.mrh import build_index, build_mrh
from mrhqbh.signal import Corpus, synth_corpus
from mrhqbh.similarity import l1_distance, mrhd

import oracles

criterion = pytest.mark.criterion


@pytest.fixture(scope="module")
def retrieval_setup():
    """100 songs of 8192 samples at 8 kHz, 200 bins, 3 levels, 20 clean half-length prefix queries."""
    corpus = synth_corpus(2024, 100, 8192, 8000)
    index = build_index(corpus, 200, 3)
    targets = Corpus(tuple(corpus[i] for i in range(0, 100, 5)))
    queries, truth = synth_queries(targets, 99, per_song=1, fraction=0.5, levels=3)
    return corpus, index, queries, truth


@criterion(1, "count conservation over 10,000 fuzzed histograms, < 5 s")
def test_c1_conservation():
    rng = np.random.default_rng(1)
    t0 = time.perf_counter()
    for _ in range(10_000):
        lo = rng.uniform(-2.0, 1.0)
        hi = lo + (0.0 if rng.random() < 0.02 else rng.uniform(0.0, 3.0))
        t = 1 if hi == lo else int(rng.integers(1, 300))
        n = int(rng.integers(0, 200))
        x = rng.uniform(lo - 1.0, hi + 1.0, size=n)
        h = build_histogram(x, BinSpec(lo, hi, t))
        assert int(h.counts.sum()) == n
        c = cumulative(h).cumcounts
        assert np.all(np.diff(c) >= 0)
        assert c[-1] == n
    assert time.perf_counter() - t0 < 5.0


@criterion(2, "parent = sum of children on 200 seeded signals, levels <= 5, < 10 s")
def test_c2_tree_identity():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2)
    for i in range(200):
        levels = i % 6
        length = int(rng.integers(2**levels, 3000))
        s = synth_corpus(10_000 + i, 1, max(length, 2))[0]
        t = int(rng.integers(1, 256))
        m = build_mrh(s, BinSpec(-1.0, 1.0, t), levels)
        assert m.node_count == 2 ** (levels + 1) - 1
        for j in range(levels):
            for p in range(2**j):
                assert np.array_equal(m.counts[j][p], m.counts[j + 1][2 * p] + m.counts[j + 1][2 * p + 1])
    assert time.perf_counter() - t0 < 10.0


@criterion(3, "L1 lower-bound chain on 1000 random pairs, levels <= 4, zero violations, < 10 s")
def test_c3_lower_bound_chain():
    t0 = time.perf_counter()
    corpus = synth_corpus(3, 2000, 512)
    spec = BinSpec(-1.0, 1.0, 64)
    trees = [build_mrh(s, spec, 4) for s in corpus]
    violations = 0
    for k in range(1000):
        a, b = trees[2 * k], trees[2 * k + 1]
        for j in range(4):
            for p in range(2**j):
                parent = l1_distance(a.counts[j][p], b.counts[j][p])
                kids = l1_distance(a.counts[j + 1][2 * p], b.counts[j + 1][2 * p]) + l1_distance(
                    a.counts[j + 1][2 * p + 1], b.counts[j + 1][2 * p + 1]
                )
                violations += parent > kids
    assert violations == 0
    assert time.perf_counter() - t0 < 10.0


@criterion(4, "MRHD scalar checks: identity 1, disjoint 0, hand case 0.25")
def test_c4_mrhd_scalars():
    def nh(v):
        return NormalizedHistogram(BinSpec(0, 1, len(v)), np.asarray(v, dtype=float))

    rng = np.random.default_rng(4)
    for _ in range(100):
        h = rng.random(int(rng.integers(1, 300)))
        h /= h.sum()
        assert abs(mrhd(nh(h), nh(h)) - 1.0) <= 1e-12
    assert mrhd(nh([0.6, 0.4, 0, 0]), nh([0, 0, 0.1, 0.9])) == 0.0
    assert mrhd(nh([1, 0]), nh([0, 1])) == 0.0
    hand = 0.5 * (np.sqrt(2) - np.sqrt(0.5)) / np.sqrt(2)
    assert abs(hand - 0.25) <= 1e-15
    assert abs(mrhd(nh([0.5, 0.5, 0]), nh([0.5, 0, 0.5])) - 0.25) <= 1e-12


@criterion(5, "quantile(1.0) cascade equals brute-force scan on 50 songs x 25 queries")
def test_c5_oracle_equivalence():
    corpus = synth_corpus(5, 50, 4096, 8000)
    index = build_index(corpus, 100, 3)
    targets = Corpus(tuple(corpus[i] for i in range(0, 50, 2)))
    queries, _ = synth_queries(targets, 55, fraction=0.5, noise_db=15.0, levels=3)
    assert len(queries) == 25
    config = CascadeConfig.from_levels([1, 2, 3], "best_match", "quantile:1.0")
    songs = {sid: [oracles.normalized(row) for row in m.counts[3].tolist()] for sid, m in index.entries.items()}
    for q in queries:
        got = run_cascade(q, index, config).survivors
        qm = build_mrh(q, index.spec, 3)
        # query segments half the song's length line up one level up
        query_rows = [oracles.normalized(row) for row in qm.counts[2].tolist()]
        assert got == oracles.brute_force_ranking(query_rows, songs, "best_match")


@criterion(6, "100 songs, 20 clean prefix queries, keep_high + best_match: MRR = Top-10 = 1, < 30 s")
def test_c6_retrieval_sanity(retrieval_setup):
    t0 = time.perf_counter()
    _, index, queries, truth = retrieval_setup
    config = CascadeConfig.coarse_to_fine(3, "best_match", "keep_high")
    report = evaluate(index, queries, truth, config, xs=[1, 10])
    assert list(report.per_query_ranks.values()) == [1] * 20
    assert report.mrr == 1.0
    assert report.top_x[10] == 1.0
    for q in queries:
        top_id, top_score = run_cascade(q, index, config).ranking[0]
        assert top_id == truth.pairs[q.id]
        assert abs(top_score - 1.0) <= 1e-12
    assert time.perf_counter() - t0 < 30.0


@criterion(7, "paper_literal stage-1 pruning rate in [0.35, 0.65] for each of 20 queries")
def test_c7_pruning_rate(retrieval_setup):
    _, index, queries, _ = retrieval_setup
    config = CascadeConfig.coarse_to_fine(3, "best_match", "paper_literal")
    rates = [run_cascade(q, index, config).reports[0].pruning_rate for q in queries]
    print(f"stage-1 pruning rates: min {min(rates):.2f} mean {np.mean(rates):.3f} max {max(rates):.2f}")
    assert len(rates) == 20
    assert all(0.35 <= r <= 0.65 for r in rates), rates


@criterion(8, "metrics re-scored from the rank dump by an independent oracle to 1e-12; hand cases")
def test_c8_metric_oracle(small_corpus, small_index):
    assert abs(mrr([1, 2, 4]) - 7 / 12) <= 1e-12
    assert abs(moa([1, 5], 9) - 0.75) <= 1e-12
    assert abs(top_x([1, 5, 12], 10) - 2 / 3) <= 1e-12
    queries, truth = synth_queries(small_corpus, 8, per_song=2, fraction=0.5, noise_db=0.0, levels=3)
    config = CascadeConfig.coarse_to_fine(3, "best_match", "quantile:0.7")
    dump = json.loads(evaluate(small_index, queries, truth, config, xs=[1, 5, 10, 20]).to_json())
    ranks = list(dump["per_query_ranks"].values())
    assert len(set(ranks)) > 2  # a spread of ranks, not a trivial all-ones run
    ref = oracles.metrics(ranks, dump["corpus_size"], [1, 5, 10, 20])
    assert abs(dump["mrr"] - float(ref["mrr"])) <= 1e-12
    assert abs(dump["moa"] - float(ref["moa"])) <= 1e-12
    for x, v in ref["top_x"].items():
        assert abs(dump["top_x"][str(x)] - float(v)) <= 1e-12


@criterion(9, "100 randomized save/load roundtrips; bad magic and truncation rejected")
def test_c9_persistence(tmp_path):
    rng = np.random.default_rng(9)
    path = tmp_path / "index.mrhx"
    for i in range(100):
        levels = int(rng.integers(0, 5))
        count = int(rng.integers(1, 6))
        length = int(rng.integers(max(2, 2**levels), 400))
        index = build_index(synth_corpus(int(rng.integers(0, 2**62)), count, length), int(rng.integers(1, 80)), levels)
        save_index(index, path)
        back = load_index(path)
        assert back == index

        data = path.read_bytes()
        broken = tmp_path / "broken.mrhx"
        broken.write_bytes(bytes([data[0] ^ 0x20]) + data[1:])
        with pytest.raises(BadMagicError):
            load_index(broken)
        broken.write_bytes(data[: int(rng.integers(0, len(data)))])
        with pytest.raises(IndexFormatError):
            load_index(broken)
