"""``mrh`` command line: synth, queries, index, query, eval.

Exit codes: 0 success, 1 runtime or data error, 2 usage error.

Every subcommand accepts ``--config FILE``, a flat ``key = value`` file whose
keys are flag names (``bin-width`` or ``bin_width``). Flags given on the
command line win over the file.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .cascade import CascadeConfig, PrunePolicy, full_scan, run_cascade
from .evaluation import DEFAULT_XS, GroundTruth, evaluate, synth_queries
from .histogram import bin_count
from .index_file import IndexFormatError, load_index, save_index
from .mrh import MAX_LEVELS, SignalTooShortError, build_index
from .signal import WavError, load_corpus, load_wav, save_wav, synth_corpus, write_manifest
from .similarity import MatchMode


class UsageError(Exception):
    pass


def _workers() -> int:
    raw = os.environ.get("MRH_THREADS", "1").strip() or "1"
    try:
        n = int(raw)
    except ValueError:
        raise UsageError(f"MRH_THREADS must be an integer, got {raw!r}") from None
    if n < 0:
        raise UsageError("MRH_THREADS must be >= 0")
    return n or (os.cpu_count() or 1)


def _int_list(text: str) -> list[int]:
    try:
        vals = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not vals:
        raise argparse.ArgumentTypeError("expected at least one integer")
    return vals


def _prune(text: str) -> PrunePolicy:
    try:
        return PrunePolicy.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _mode(text: str) -> MatchMode:
    try:
        return MatchMode.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _positive(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return v


def _levels(text: str) -> int:
    v = int(text)
    if not 0 <= v <= MAX_LEVELS:
        raise argparse.ArgumentTypeError(f"levels must be in [0, {MAX_LEVELS}]")
    return v


def _add_cascade_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--prune-mode", type=_prune, default=PrunePolicy("keep_high"),
                   help="paper-literal, keep-high or quantile:S (default keep-high)")
    p.add_argument("--match-mode", type=_mode, default=MatchMode.BEST_MATCH,
                   help="aligned or best-match (default best-match)")
    p.add_argument("--stages", type=_int_list, default=None,
                   help="comma-separated stage levels (default 1..index levels)")
    p.add_argument("--final-level", type=int, default=None,
                   help="level used for the final ranking (default: last stage level)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mrh", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="write a synthetic WAV corpus and manifest")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--count", type=_positive, default=10)
    p.add_argument("--length", type=int, default=8192)
    p.add_argument("--rate", type=_positive, default=8000)
    p.add_argument("--noise", type=float, default=0.05)
    p.add_argument("--bits", type=int, choices=(8, 16, 24), default=16)
    p.add_argument("--out-dir", type=Path)

    p = sub.add_parser("queries", help="cut noisy prefix queries from a corpus")
    p.add_argument("--manifest", type=Path)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--per-song", type=_positive, default=1)
    p.add_argument("--fraction", type=float, default=0.5)
    p.add_argument("--noise-db", type=float, default=float("inf"), help="SNR in dB (default inf: clean)")
    p.add_argument("--levels", type=_levels, default=0, help="refuse queries too short for this many levels")
    p.add_argument("--bits", type=int, choices=(8, 16, 24), default=16)
    p.add_argument("--out-dir", type=Path)

    p = sub.add_parser("index", help="build a multiresolution histogram index")
    p.add_argument("--manifest", type=Path)
    g = p.add_mutually_exclusive_group()
    g.add_argument("--bins", type=_positive, default=None, help="bin count (default 200)")
    g.add_argument("--bin-width", type=float, default=None, help="bin width; count = ceil(range / width)")
    p.add_argument("--levels", type=_levels, default=3)
    p.add_argument("--out", type=Path)

    p = sub.add_parser("query", help="rank indexed songs against one query WAV")
    p.add_argument("--index", type=Path)
    p.add_argument("--query", type=Path)
    _add_cascade_flags(p)
    p.add_argument("--top", type=_positive, default=10)
    p.add_argument("--json", action="store_true", help="print the cascade result as JSON")
    p.add_argument("--brute-force", action="store_true", help=argparse.SUPPRESS)

    p = sub.add_parser("eval", help="score a query set against ground truth")
    p.add_argument("--index", type=Path)
    p.add_argument("--queries", type=Path, help="query manifest")
    p.add_argument("--truth", type=Path)
    _add_cascade_flags(p)
    p.add_argument("--xs", type=_int_list, default=list(DEFAULT_XS))
    p.add_argument("--report", type=Path, default=None, help="write the JSON report here")

    for sp in sub.choices.values():
        sp.add_argument("--config", type=Path, default=None, help="flat key = value file of flag defaults")
    return parser


def read_config(path: Path) -> dict[str, str]:
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise UsageError(f"{path}:{lineno}: expected key = value")
            out[key.strip().lstrip("-").replace("-", "_")] = value.strip().strip('"')
    return out


REQUIRED = {
    "synth": ("--out-dir",),
    "queries": ("--manifest", "--out-dir"),
    "index": ("--manifest", "--out"),
    "query": ("--index", "--query"),
    "eval": ("--index", "--queries", "--truth"),
}


def _subparser(parser: argparse.ArgumentParser, name: str) -> argparse.ArgumentParser:
    for action in parser._actions:
        if isinstance(action, argparse._SubParsersAction):
            return action.choices[name]
    raise KeyError(name)


def _on_cli(argv: list[str], flag: str) -> bool:
    return any(a == flag or a.startswith(flag + "=") for a in argv)


def parse_args(parser: argparse.ArgumentParser, argv: list[str]) -> argparse.Namespace:
    """Parse ``argv``, fill gaps from ``--config``, then check required flags."""
    args = parser.parse_args(argv)
    sp = _subparser(parser, args.command)
    if args.config is not None:
        try:
            values = read_config(args.config)
        except OSError as exc:
            sp.error(f"cannot read config: {exc}")
        except UsageError as exc:
            sp.error(str(exc))
        actions = {a.dest: a for a in sp._actions}
        defaults = {}
        for key, value in values.items():
            action = actions.get(key)
            if action is None or key in ("help", "config"):
                sp.error(f"unknown config key {key!r}")
            if isinstance(action, argparse._StoreTrueAction):
                defaults[key] = value.lower() in ("1", "true", "yes", "on")
            else:
                defaults[key] = value
        sp.set_defaults(**defaults)
        args = parser.parse_args(argv)
        if args.command == "index" and args.bins is not None and args.bin_width is not None:
            # a flag on the command line overrides the other one from the file
            if _on_cli(argv, "--bins") and not _on_cli(argv, "--bin-width"):
                args.bin_width = None
            elif _on_cli(argv, "--bin-width") and not _on_cli(argv, "--bins"):
                args.bins = None
            else:
                sp.error("argument --bin-width: not allowed with argument --bins")
    missing = [f for f in REQUIRED[args.command] if getattr(args, f[2:].replace("-", "_")) is None]
    if missing:
        sp.error(f"the following arguments are required: {', '.join(missing)}")
    return args


def _cascade_config(args, index_levels: int) -> CascadeConfig:
    levels = args.stages if args.stages is not None else (list(range(1, index_levels + 1)) or [0])
    return CascadeConfig.from_levels(levels, args.match_mode, args.prune_mode, args.final_level)


def cmd_synth(args) -> int:
    corpus = synth_corpus(args.seed, args.count, args.length, args.rate, noise=args.noise)
    args.out_dir.mkdir(parents=True, exist_ok=True)
    entries = []
    for s in corpus:
        name = f"{s.id}.wav"
        save_wav(s, args.out_dir / name, bits=args.bits)
        entries.append((s.id, name))
    write_manifest(args.out_dir / "manifest.jsonl", entries)
    print(f"wrote {len(corpus)} songs to {args.out_dir}")
    return 0


def cmd_queries(args) -> int:
    corpus = load_corpus(args.manifest)
    queries, truth = synth_queries(corpus, args.seed, args.per_song, args.fraction, args.noise_db, args.levels)
    args.out_dir.mkdir(parents=True, exist_ok=True)
    entries = []
    for q in queries:
        name = f"{q.id}.wav"
        save_wav(q, args.out_dir / name, bits=args.bits)
        entries.append((q.id, name))
    write_manifest(args.out_dir / "manifest.jsonl", entries)
    truth.write(args.out_dir / "truth.jsonl")
    print(f"wrote {len(queries)} queries and truth.jsonl to {args.out_dir}")
    return 0


def cmd_index(args) -> int:
    corpus = load_corpus(args.manifest)
    if args.bin_width is not None:
        lo = min(float(s.samples.min()) for s in corpus)
        hi = max(float(s.samples.max()) for s in corpus)
        t = bin_count(lo, hi, args.bin_width)
    else:
        t = args.bins if args.bins is not None else 200
    index = build_index(corpus, t, args.levels, workers=_workers())
    save_index(index, args.out)
    p = index.params
    print(f"M={index.M} t={p.t} levels={p.levels} min_D={p.min_D!r} max_D={p.max_D!r}")
    return 0


def _ranking_table(result, top: int) -> str:
    lines = [f"{'rank':>4}  {'song':<24} {'score':>10}"]
    for i, (sid, score) in enumerate(result.ranking[:top], 1):
        lines.append(f"{i:>4}  {sid:<24} {score:>10.6f}")
    return "\n".join(lines)


def _stage_table(result) -> str:
    lines = [f"{'stage':>5} {'level':>5} {'pool_in':>8} {'pool_out':>8} {'t_upper':>10} {'survival':>8} {'ms':>8}"]
    for r in result.reports:
        lines.append(
            f"{r.stage_index:>5} {r.level:>5} {r.pool_in:>8} {r.pool_out:>8} "
            f"{r.threshold_upper:>10.6f} {r.achieved_survival:>8.3f} {r.wall_time * 1000:>8.2f}"
        )
    return "\n".join(lines)


def cmd_query(args) -> int:
    index = load_index(args.index)
    query = load_wav(args.query)
    config = _cascade_config(args, index.params.levels)
    if args.brute_force:
        result = full_scan(query, index, config.final_rank_level, config.final_mode)
    else:
        result = run_cascade(query, index, config, workers=_workers())
    if args.json:
        print(json.dumps(result.to_dict(), sort_keys=True))
    else:
        print(_ranking_table(result, args.top))
        if result.reports:
            print()
            print(_stage_table(result))
    return 0


def cmd_eval(args) -> int:
    truth = GroundTruth.read(args.truth)
    if not truth.pairs:
        raise UsageError(f"ground truth file {args.truth} is empty")
    index = load_index(args.index)
    queries = load_corpus(args.queries)
    config = _cascade_config(args, index.params.levels)
    report = evaluate(index, queries, truth, config, args.xs, workers=_workers())
    if args.report is not None:
        args.report.write_text(report.to_json(), encoding="utf-8")
    print(report.table())
    return 0


COMMANDS = {"synth": cmd_synth, "queries": cmd_queries, "index": cmd_index, "query": cmd_query, "eval": cmd_eval}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    args = parse_args(parser, argv)
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"mrh {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except (IndexFormatError, WavError, SignalTooShortError, ValueError, KeyError, OSError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"mrh {args.command}: error: {msg}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
