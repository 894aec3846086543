"""Command-line entry points: run, bench, sweep, compare.

Exit codes: 0 success, 2 usage error (argparse), 3 deck parse error,
4 runtime/solver failure.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from .deck import parse_deck
from .diagnostics import grid_error_norm
from .dump import read_field_dump
from .errors import (BreakdownError, ConfigurationError, DeckParseError,
                     IntegrityError, SolverFailure)
from .run import run_simulation

EXIT_OK = 0
EXIT_PARSE = 3
EXIT_RUNTIME = 4


def _add_set_flag(p):
    p.add_argument("--set", action="append", default=[], metavar="SEC.KEY=VAL",
                   help="override any deck key, e.g. --set pipeline.batches=4")


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="batchpic",
        description="implicit particle-in-cell engine and benchmark harness")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a full simulation with output")
    p_run.add_argument("deck")
    p_run.add_argument("--out", default=None, help="output directory override")
    p_run.add_argument("--verbose", action="store_true")
    _add_set_flag(p_run)

    p_bench = sub.add_parser(
        "bench", help="time the fused particle phase, report MPA/s mean+std")
    p_bench.add_argument("deck")
    p_bench.add_argument("--cycles", type=int, default=None)
    p_bench.add_argument("--workers", type=int, default=None)
    _add_set_flag(p_bench)

    p_sweep = sub.add_parser(
        "sweep", help="benchmark a list of batch counts on one deck")
    p_sweep.add_argument("deck")
    p_sweep.add_argument("--batches", default="1,2,4,8,16,32",
                         help="comma-separated batch counts")
    p_sweep.add_argument("--cycles", type=int, default=None)
    _add_set_flag(p_sweep)

    p_cmp = sub.add_parser(
        "compare", help="pointwise error norms between two field dumps")
    p_cmp.add_argument("dump_a")
    p_cmp.add_argument("dump_b")
    p_cmp.add_argument("--field", default=None,
                       help="compare only this named block")
    return parser


def _bench_deck(deck):
    state, result = run_simulation(deck, bench_only=True)
    state.close()
    return result


def cmd_run(args):
    deck = parse_deck(args.deck, overrides=args.set)
    state, result = run_simulation(deck, deck_path=args.deck,
                                   out_dir=args.out, quiet=not args.verbose)
    state.close()
    print(f"completed {len(result.reports)} cycles: "
          f"{result.mpa_mean:.3f} +- {result.mpa_std:.3f} MPA/s")
    return EXIT_OK


def cmd_bench(args):
    overrides = list(args.set)
    if args.cycles is not None:
        overrides.append(f"time.cycles={args.cycles}")
    if args.workers is not None:
        overrides.append(f"pipeline.workers={args.workers}")
    deck = parse_deck(args.deck, overrides=overrides)
    result = _bench_deck(deck)
    n = len(result.reports)
    print(f"particles: {deck.total_particles()}")
    print(f"cycles:    {n}")
    print(f"mpa_s:     {result.mpa_mean:.3f} +- {result.mpa_std:.3f}  "
          f"(mean +- stddev over {n} samples)")
    return EXIT_OK


def cmd_sweep(args):
    batch_list = [int(v) for v in args.batches.split(",") if v.strip()]
    rows = []
    for m in batch_list:
        overrides = list(args.set) + [f"pipeline.batches={m}"]
        if args.cycles is not None:
            overrides.append(f"time.cycles={args.cycles}")
        deck = parse_deck(args.deck, overrides=overrides)
        result = _bench_deck(deck)
        rows.append((m, result.mpa_mean, result.mpa_std))
    base = rows[0][1] if rows and rows[0][1] > 0 else None
    print(f"{'batches':>8} {'mpa_s':>12} {'stddev':>10} {'rel':>8}")
    for m, mean, std in rows:
        rel = f"{mean / base:8.3f}" if base else f"{'n/a':>8}"
        print(f"{m:>8} {mean:>12.3f} {std:>10.3f} {rel}")
    return EXIT_OK


def cmd_compare(args):
    _, fields_a = read_field_dump(args.dump_a)
    _, fields_b = read_field_dump(args.dump_b)
    names = sorted(set(fields_a) & set(fields_b))
    if args.field is not None:
        if args.field not in names:
            print(f"field {args.field!r} not present in both dumps",
                  file=sys.stderr)
            return EXIT_RUNTIME
        names = [args.field]
    if not names:
        print("dumps share no field blocks", file=sys.stderr)
        return EXIT_RUNTIME
    print(f"{'field':<24} {'l2_norm':>14} {'max_abs':>14}")
    for name in names:
        l2, diff = grid_error_norm(fields_a[name], fields_b[name])
        print(f"{name:<24} {l2:>14.6e} {float(diff.max()):>14.6e}")
    return EXIT_OK


def main(argv=None):
    parser = _build_parser()
    args = parser.parse_args(argv)
    handlers = {"run": cmd_run, "bench": cmd_bench, "sweep": cmd_sweep,
                "compare": cmd_compare}
    try:
        return handlers[args.command](args)
    except DeckParseError as exc:
        print(f"deck error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except (ConfigurationError, SolverFailure, IntegrityError,
            BreakdownError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
