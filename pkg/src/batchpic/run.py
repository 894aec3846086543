"""Full simulation driver: init, cycle loop, diagnostics, dumps, manifest."""

from __future__ import annotations

import time
from pathlib import Path

import numpy as np

from .diagnostics import energy_ledger, reconnected_flux
from .dump import DiagWriter, write_field_dump, write_manifest
from .pipeline import RunResult, make_state, run_cycle


def dump_state(state, out_dir, tag):
    """Write E, B, and per-species charge density dumps for one barrier."""
    deck = state.deck
    geom = state.geom
    out = Path(out_dir)
    if deck.output.dump_fields:
        write_field_dump(out / f"fields_{tag}.vtk", geom,
                         vectors={"E": state.fields.E, "B": state.fields.B},
                         title=f"fields at {tag}",
                         precision=deck.precision.fields)
    if deck.output.dump_moments and state.moments:
        scalars = {f"rho_{deck.species[s].name}": state.moments[s].rho
                   for s in sorted(state.moments)}
        write_field_dump(out / f"moments_{tag}.vtk", geom, scalars=scalars,
                         title=f"moments at {tag}",
                         precision=deck.precision.fields)


def run_simulation(deck, deck_path=None, out_dir=None, quiet=True,
                   bench_only=False):
    """Initialize and advance ``deck.n_cycles`` cycles with full output.

    Returns ``(state, RunResult)``; the caller owns ``state.close()``.
    ``bench_only`` skips file output (timing-oriented invocations).
    """
    state = make_state(deck)
    out = Path(out_dir if out_dir is not None else deck.output.directory)
    diag = None
    if not bench_only:
        out.mkdir(parents=True, exist_ok=True)
        write_manifest(out / "manifest.json", deck, deck_path)
        diag = DiagWriter(out / deck.output.diag_name, deck.n_species)

    reports = []
    t0 = time.perf_counter()
    for c in range(deck.n_cycles):
        report = run_cycle(state, c)
        reports.append(report)
        if diag is not None:
            ledger = energy_ledger(c, state.fields, state.buffers,
                                   deck.species, state.geom)
            diag.write_row(report, ledger, deck.dt,
                           recon_flux=reconnected_flux(state.fields, state.geom))
            cadence = deck.output.cadence
            if cadence > 0 and (c + 1) % cadence == 0:
                dump_state(state, out, f"{c + 1:06d}")
        if not quiet:
            print(f"cycle {c}: {report.mpa_s:.3f} MPA/s, "
                  f"gmres {report.gmres_iters}, cg {report.cg_iters}")
    elapsed = time.perf_counter() - t0

    if diag is not None and deck.n_cycles > 0:
        dump_state(state, out, "final")

    if reports:
        mpa = np.array([r.mpa_s for r in reports])
        result = RunResult(reports, float(mpa.mean()), float(mpa.std()))
    else:
        result = RunResult([], 0.0, 0.0)
    result.elapsed_seconds = elapsed
    return state, result
