import json

import numpy as np

from batchpic.dump import read_field_dump
from batchpic.run import run_simulation
from conftest import small_gem_deck


def test_run_simulation_outputs(tmp_path):
    deck = small_gem_deck(ppc=2, cells=(4, 4, 4), box=(3.2, 3.2, 3.2),
                          cycles=4)
    deck = deck.with_overrides(
        output=deck.output.__class__(directory=str(tmp_path), cadence=2))
    state, result = run_simulation(deck, out_dir=tmp_path)
    state.close()
    assert len(result.reports) == 4

    # manifest
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["total_particles"] == deck.total_particles()

    # diagnostics CSV: header plus one row per cycle
    lines = (tmp_path / "diag.csv").read_text().strip().splitlines()
    assert len(lines) == 5
    header = lines[0].split(",")
    for col in ("cycle", "t", "mpa_s", "mover_interp_seconds",
                "field_solve_seconds", "gmres_iters", "cg_iters",
                "field_energy", "kinetic_energy_0", "kinetic_energy_3",
                "div_residual"):
        assert col in header

    # cadence dumps at cycles 2 and 4, plus the final dump
    assert (tmp_path / "fields_000002.vtk").exists()
    assert (tmp_path / "fields_000004.vtk").exists()
    assert (tmp_path / "fields_final.vtk").exists()
    assert (tmp_path / "moments_final.vtk").exists()

    # the moment dump parses back with one scalar block per species
    _, fields = read_field_dump(tmp_path / "moments_final.vtk")
    assert len(fields) == deck.n_species


def test_bench_only_writes_nothing(tmp_path):
    deck = small_gem_deck(ppc=2, cells=(4, 4, 4), box=(3.2, 3.2, 3.2),
                          cycles=2)
    deck = deck.with_overrides(
        output=deck.output.__class__(directory=str(tmp_path / "never")))
    state, result = run_simulation(deck, bench_only=True)
    state.close()
    assert len(result.reports) == 2
    assert not (tmp_path / "never").exists()


def test_run_zero_cycles(tmp_path):
    deck = small_gem_deck(ppc=1, cells=(4, 4, 4), box=(3.2, 3.2, 3.2),
                          cycles=0)
    state, result = run_simulation(deck, out_dir=tmp_path)
    state.close()
    assert result.reports == []
    assert (tmp_path / "manifest.json").exists()
