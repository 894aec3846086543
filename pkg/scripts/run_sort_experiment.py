"""Sorted-vs-unsorted throughput trend on the reduced reconnection deck.

Runs the desk deck twice (periodic sorting on, sorting off), records the
fused-phase seconds per cycle, and writes a CSV plus a PNG trend plot.

Usage:
    python scripts/run_sort_experiment.py [--cycles 200] [--out DIR]
"""

import argparse
import csv
from pathlib import Path

import batchpic
from batchpic.deck import parse_deck
from batchpic.pipeline import make_state, run_cycles


def timed_run(deck, cycles):
    deck = deck.with_overrides(n_cycles=cycles)
    with make_state(deck) as state:
        result = run_cycles(state, cycles)
    return [r.mover_interp_seconds for r in result.reports]


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--deck", default=batchpic.bundled_deck("gem_desk"))
    ap.add_argument("--cycles", type=int, default=200)
    ap.add_argument("--out", default="sort_experiment")
    args = ap.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    base = parse_deck(args.deck)

    print(f"running {args.cycles} cycles with sorting every "
          f"{base.sort_period} cycles ...")
    sorted_times = timed_run(base, args.cycles)
    print(f"running {args.cycles} cycles without sorting ...")
    unsorted_times = timed_run(base.with_overrides(sort_period=0), args.cycles)

    csv_path = out / "sorting_trend.csv"
    with open(csv_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["cycle", "sorted_seconds", "unsorted_seconds"])
        for c, (s, u) in enumerate(zip(sorted_times, unsorted_times)):
            w.writerow([c, f"{s:.6f}", f"{u:.6f}"])
    print(f"wrote {csv_path}")

    tail = max(1, args.cycles // 20)
    s_tail = sum(sorted_times[-tail:]) / tail
    u_tail = sum(unsorted_times[-tail:]) / tail
    print(f"fused-phase seconds over the last {tail} cycles: "
          f"sorted {s_tail:.4f}  unsorted {u_tail:.4f}")

    try:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        print("matplotlib unavailable; skipping the plot")
        return
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.plot(sorted_times, lw=0.8, label=f"sorting every {base.sort_period} cycles")
    ax.plot(unsorted_times, lw=0.8, label="no sorting")
    ax.set_xlabel("cycle")
    ax.set_ylabel("fused mover+interpolation seconds")
    ax.set_title("particle-sorting throughput trend")
    ax.legend()
    fig.tight_layout()
    png = out / "sorting_trend.png"
    fig.savefig(png, dpi=130)
    print(f"wrote {png}")


if __name__ == "__main__":
    main()
