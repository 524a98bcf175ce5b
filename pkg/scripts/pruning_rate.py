"""Measure per-stage pruning rates of mean-threshold pruning on synthetic corpora.

Example:
    python3 scripts/pruning_rate.py --seeds 0 1 2 --songs 100 --queries 20
"""

import argparse

import numpy as np

from mrhqbh import CascadeConfig, Corpus, build_index, run_cascade, synth_corpus, synth_queries


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, nargs="+", default=[2024])
    ap.add_argument("--songs", type=int, default=100)
    ap.add_argument("--length", type=int, default=8192)
    ap.add_argument("--queries", type=int, default=20)
    ap.add_argument("--bins", type=int, default=200)
    ap.add_argument("--levels", type=int, default=3)
    ap.add_argument("--policy", default="paper_literal")
    ap.add_argument("--noise-db", type=float, default=float("inf"))
    args = ap.parse_args()

    config = CascadeConfig.coarse_to_fine(args.levels, "best_match", args.policy)
    print(f"policy={args.policy} bins={args.bins} levels={args.levels} songs={args.songs}")
    print(f"{'seed':>6}  " + "  ".join(f"stage{k + 1:<2} min/mean/max" for k in range(args.levels)))
    for seed in args.seeds:
        corpus = synth_corpus(seed, args.songs, args.length)
        index = build_index(corpus, args.bins, args.levels)
        step = max(1, args.songs // args.queries)
        targets = Corpus(tuple(corpus[i] for i in range(0, args.songs, step))[: args.queries])
        queries, _ = synth_queries(targets, seed + 1, fraction=0.5, noise_db=args.noise_db, levels=args.levels)
        rates = np.full((len(queries), args.levels), np.nan)
        for i, q in enumerate(queries):
            for k, rep in enumerate(run_cascade(q, index, config).reports):
                rates[i, k] = rep.pruning_rate
        cells = [f"{np.nanmin(c):.2f}/{np.nanmean(c):.2f}/{np.nanmax(c):.2f}    " for c in rates.T]
        print(f"{seed:>6}  " + "  ".join(cells))


if __name__ == "__main__":
    main()
