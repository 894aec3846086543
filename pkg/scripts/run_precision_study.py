"""Storage-precision comparison on the reduced reconnection deck.

Runs the same deck in double, single, and mixed precision, then reports
the L2 and max-abs pointwise errors of the electron charge density
against the double run, and dumps the error maps for grid viewers.

Usage:
    python scripts/run_precision_study.py [--cycles 100] [--out DIR]
"""

import argparse
from pathlib import Path

import numpy as np

import batchpic
from batchpic.config import PrecisionMode
from batchpic.deck import parse_deck
from batchpic.diagnostics import grid_error_norm
from batchpic.dump import write_field_dump
from batchpic.pipeline import make_state, run_cycles

MODES = {
    "double": PrecisionMode("double", "double"),
    "single": PrecisionMode("single", "single"),
    "mixed": PrecisionMode("single", "double"),
}


def electron_density(deck):
    with make_state(deck) as state:
        run_cycles(state, deck.n_cycles)
        rho = sum(state.moments[s].rho.astype(np.float64)
                  for s, sp in enumerate(deck.species) if sp.charge < 0)
    return rho


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--deck", default=batchpic.bundled_deck("gem_desk"))
    ap.add_argument("--cycles", type=int, default=100)
    ap.add_argument("--out", default="precision_study")
    args = ap.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    base = parse_deck(args.deck).with_overrides(n_cycles=args.cycles)

    rho = {}
    for label, mode in MODES.items():
        print(f"running {args.cycles} cycles in {label} precision ...")
        rho[label] = electron_density(base.with_overrides(precision=mode))

    print(f"\nelectron-density error vs the double run after {args.cycles} cycles")
    print(f"{'mode':<8} {'l2_norm':>14} {'max_abs':>14}")
    maps = {}
    for label in ("single", "mixed"):
        l2, diff = grid_error_norm(rho[label], rho["double"])
        maps[f"abs_error_{label}"] = diff
        print(f"{label:<8} {l2:>14.6e} {float(diff.max()):>14.6e}")

    write_field_dump(out / "rho_e_error_maps.vtk", base.geom, scalars=maps,
                     title="electron density pointwise |error| vs double")
    print(f"wrote {out / 'rho_e_error_maps.vtk'}")


if __name__ == "__main__":
    main()
