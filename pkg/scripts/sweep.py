"""Sweep bin count and tree depth on a seeded synthetic corpus with noisy queries.

Prints MRR, MoA and Top-X for each (bins, levels) pair so the effect of the
two index parameters can be compared at a glance.

Example:
    python3 scripts/sweep.py --bins 50 100 200 400 --levels 1 2 3 4 --noise-db 5
"""

import argparse

from mrhqbh import CascadeConfig, build_index, evaluate, synth_corpus, synth_queries


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--songs", type=int, default=100)
    ap.add_argument("--length", type=int, default=8192)
    ap.add_argument("--bins", type=int, nargs="+", default=[50, 100, 200, 400])
    ap.add_argument("--levels", type=int, nargs="+", default=[1, 2, 3, 4])
    ap.add_argument("--noise-db", type=float, default=5.0)
    ap.add_argument("--policy", default="keep_high")
    ap.add_argument("--mode", default="best_match")
    args = ap.parse_args()

    corpus = synth_corpus(args.seed, args.songs, args.length)
    queries, truth = synth_queries(corpus, args.seed + 1, fraction=0.5, noise_db=args.noise_db,
                                   levels=max(args.levels))
    print(f"songs={args.songs} queries={len(queries)} snr={args.noise_db} dB policy={args.policy} mode={args.mode}")
    print(f"{'bins':>5} {'levels':>6} {'MRR':>7} {'MoA':>7} {'Top-1':>7} {'Top-10':>7}")
    for t in args.bins:
        for levels in args.levels:
            index = build_index(corpus, t, levels)
            config = CascadeConfig.coarse_to_fine(levels, args.mode, args.policy)
            rep = evaluate(index, queries, truth, config, xs=[1, 10])
            print(f"{t:>5} {levels:>6} {rep.mrr:>7.4f} {rep.moa:>7.4f} {rep.top_x[1]:>7.4f} {rep.top_x[10]:>7.4f}")


if __name__ == "__main__":
    main()
