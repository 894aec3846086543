"""One computational cycle and the full simulation driver.

Species are assigned round-robin to worker groups; each group keeps a
private copy of the global field box and one private moment accumulator
per assigned species.  Batches are staged into task-local buffers (the
hand-off that stands in for a device transfer), pushed through the fused
kernel by the group's worker pool, and merged in fixed (species, group,
batch) order.  Because moment accumulation is exact integer arithmetic,
results are bit-identical for every choice of batch count, group count,
and worker count; the fixed merge order is kept anyway for clarity.

The host field phase then advances E and B implicitly and runs the
divergence cleaning, and the cycle closes with optional particle sorting.
"""

from __future__ import annotations

import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .config import SimulationDeck
from .errors import ConfigurationError
from .fields import (MOMENT_SCALE, FieldGrid, MomentGrid,
                     total_moments)
from .gem import init_gem
from .krylov import SolverReport
from .geometry import GridGeometry
from .maxwell import (div_residual, divergence_clean, maxwell_advance,
                      plasma_susceptibility)
from .particles import init_maxwellian, partition_batches, sort_by_cell


def assign_species(n_species, n_groups):
    """Round-robin species -> group map."""
    if n_groups < 1:
        raise ConfigurationError("group count must be >= 1")
    if n_species < 1:
        raise ConfigurationError("species count must be >= 1")
    return {s: s % n_groups for s in range(n_species)}


class ByteBudget:
    """Blocking byte accountant for resident staged-batch data.

    Limits how many staged batch bytes exist at once, emulating a device
    memory cap.  Changes scheduling and timing only; results are exact
    either way.
    """

    def __init__(self, limit_bytes):
        self.limit = int(limit_bytes)
        self._used = 0
        self._cv = threading.Condition()

    def acquire(self, nbytes):
        if self.limit <= 0:
            return
        if nbytes > self.limit:
            raise ConfigurationError(
                f"one staged batch needs {nbytes} bytes, over the "
                f"{self.limit}-byte budget; raise the budget or the batch count")
        with self._cv:
            while self._used + nbytes > self.limit:
                self._cv.wait()
            self._used += nbytes

    def release(self, nbytes):
        if self.limit <= 0:
            return
        with self._cv:
            self._used -= nbytes
            self._cv.notify_all()


@dataclass
class WorkerGroup:
    """One worker group: its species, private field copy, accumulators."""

    gid: int
    species_ids: list[int]
    fields: FieldGrid
    moments: dict[int, MomentGrid]
    workers: int
    executor: ThreadPoolExecutor
    budget: ByteBudget

    def close(self):
        self.executor.shutdown(wait=True)


@dataclass
class CycleReport:
    cycle: int
    mover_interp_seconds: float
    field_solve_seconds: float
    mpa_s: float
    gmres_iters: int
    gmres_residual: float
    cg_iters: int
    cg_residual: float
    particle_counts: tuple[int, ...]
    handoff_seconds: float = 0.0
    kernel_seconds: float = 0.0
    div_residual: float = 0.0
    sorted_this_cycle: bool = False


@dataclass
class SimulationState:
    deck: SimulationDeck
    geom: GridGeometry
    fields: FieldGrid
    buffers: list
    groups: list[WorkerGroup]
    group_of: dict[int, int]
    moments: dict[int, MomentGrid] = field(default_factory=dict)
    cycle: int = 0

    def close(self):
        for g in self.groups:
            g.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def make_state(deck):
    """Initialize particles, fields, and worker groups from a deck."""
    geom = deck.geom
    if deck.init.kind == "gem":
        buffers, fields = init_gem(deck)
    else:
        n0 = deck.init.n0

        def uniform(x, y, z):
            return np.full_like(np.asarray(y, dtype=np.float64), n0)

        buffers = [
            init_maxwellian(s, geom, density_fn=uniform, seed=deck.init.seed,
                            precision=deck.precision)
            for s in deck.species
        ]
        fields = FieldGrid.zeros(geom, deck.precision)

    group_of = assign_species(deck.n_species, deck.groups)
    workers = deck.resolved_workers()
    groups = []
    for gid in range(deck.groups):
        sids = [s for s, g in group_of.items() if g == gid]
        groups.append(WorkerGroup(
            gid=gid,
            species_ids=sids,
            fields=FieldGrid.zeros(geom, deck.precision),
            moments={s: MomentGrid.zeros(geom, s, deck.precision) for s in sids},
            workers=workers,
            executor=ThreadPoolExecutor(
                max_workers=workers, thread_name_prefix=f"grp{gid}"),
            budget=ByteBudget(deck.memory_budget),
        ))
    return SimulationState(deck=deck, geom=geom, fields=fields,
                           buffers=buffers, groups=groups, group_of=group_of)


def _solver_tols(deck):
    if deck.precision.fields == "single":
        return 1e-5, 1e-5
    return 1e-7, 1e-7


def _batch_task(buf, span, group, species, deck, invvol, node_shape):
    """Stage one batch, run the fused kernel on it, copy results back.

    Returns the batch's private integer moment grid plus timing of the
    staging hand-off and of the kernel itself.
    """
    start, count = span
    pd = buf.dtype.type
    nbytes = count * buf.dtype.itemsize * 7
    group.budget.acquire(nbytes)
    try:
        t0 = time.perf_counter()
        sl = slice(start, start + count)
        sx = buf.x[sl].copy()
        sy = buf.y[sl].copy()
        sz = buf.z[sl].copy()
        su = buf.u[sl].copy()
        sv = buf.v[sl].copy()
        sw = buf.w[sl].copy()
        sq = buf.q_p[sl].copy()
        t1 = time.perf_counter()
        acc = np.zeros((10,) + node_shape, np.int64)
        fd = group.fields.dtype.type
        geo_f, geo_i = kernels.make_geo_arrays(deck.geom, pd)
        geo_g, _ = kernels.make_geo_arrays(deck.geom, fd)
        sc = kernels.kernel_scalars(species, deck.dt, deck.c, pd)
        scratch = np.empty(6, dtype=pd)
        mixed = 1 if buf.dtype != group.fields.dtype else 0
        status = kernels.fused_span(
            sx, sy, sz, su, sv, sw, sq, 0, count,
            group.fields.E, group.fields.B, acc, invvol, geo_f, geo_g, geo_i,
            sc["dt"], sc["dth"], sc["qdt2m"], sc["beta"], sc["one"],
            species.mover_iters, fd(MOMENT_SCALE), mixed, scratch)
        t2 = time.perf_counter()
        if status != kernels.OK:
            raise RuntimeError(
                f"species {species.species_id} batch at {start}: kernel "
                f"status {status}")
        buf.x[sl] = sx
        buf.y[sl] = sy
        buf.z[sl] = sz
        buf.u[sl] = su
        buf.v[sl] = sv
        buf.w[sl] = sw
        t3 = time.perf_counter()
        return acc, (t1 - t0) + (t3 - t2), t2 - t1
    finally:
        group.budget.release(nbytes)


def run_cycle(state, cycle_index):
    """Advance the whole system by one step and report on it."""
    deck = state.deck
    geom = state.geom
    node_shape = geom.node_shape
    pd = deck.precision.particle_dtype
    invvol = geom.inv_node_volume(deck.precision.field_dtype)

    # phase 1: broadcast fields into each group's private copy
    for group in state.groups:
        group.fields.copy_from(state.fields)
    # phase 2: reset private accumulators
    for group in state.groups:
        for m in group.moments.values():
            m.zero()

    # phase 3: batched fused passes, overlapped within each group's pool
    t_start = time.perf_counter()
    tagged = []
    for group in state.groups:
        for sid in group.species_ids:
            buf = state.buffers[sid]
            plan = partition_batches(buf.n, deck.batches)
            plan.group_of = tuple(group.gid for _ in plan.spans)
            for b, span in enumerate(plan.spans):
                if span[1] == 0:
                    continue
                fut = group.executor.submit(
                    _batch_task, buf, span, group, deck.species[sid],
                    deck, invvol, node_shape)
                tagged.append((sid, group.gid, b, fut))
    handoff = 0.0
    kernel_time = 0.0
    # fixed (species, group, batch) merge order; integer adds make the
    # result independent of completion order anyway
    for sid, gid, b, fut in sorted(tagged, key=lambda t: (t[0], t[1], t[2])):
        acc, h, k = fut.result()
        state.groups[gid].moments[sid].acc += acc
        handoff += h
        kernel_time += k
    mover_seconds = time.perf_counter() - t_start

    # phase 4: consolidate species grids (fold wrapped planes exactly)
    state.moments = {}
    for group in state.groups:
        for sid, m in group.moments.items():
            state.moments[sid] = m.fold(geom)
    total = total_moments([state.moments[s] for s in sorted(state.moments)],
                          geom, deck.precision)

    # phase 5: host field solve on the consolidated moments
    t_field = time.perf_counter()
    gmres_tol, cg_tol = _solver_tols(deck)
    chi = None
    if deck.susceptibility:
        chi = plasma_susceptibility(
            [state.moments[s] for s in sorted(state.moments)],
            deck.species, deck.dt, deck.theta, geom)
    fields1, gm_report = maxwell_advance(
        state.fields, total, deck.dt, deck.theta, deck.c, geom, tol=gmres_tol,
        susceptibility=chi)
    rho_total = total.rho
    if deck.clean_period > 0 and (cycle_index + 1) % deck.clean_period == 0:
        fields2, cg_report = divergence_clean(fields1, rho_total, geom,
                                              tol=cg_tol)
    else:
        fields2 = fields1
        cg_report = SolverReport(0, 0.0, True)
    state.fields = fields2
    field_seconds = time.perf_counter() - t_field

    # phase 6: periodic cache-locality sort (cycle numbers are 1-based here)
    sorted_now = False
    if deck.sort_period > 0 and (cycle_index + 1) % deck.sort_period == 0:
        for buf in state.buffers:
            sort_by_cell(buf, geom)
        sorted_now = True

    state.cycle = cycle_index + 1
    counts = tuple(buf.n for buf in state.buffers)
    total_particles = sum(counts)
    mpa = (total_particles / mover_seconds / 1e6) if mover_seconds > 0 else 0.0
    return CycleReport(
        cycle=cycle_index,
        mover_interp_seconds=mover_seconds,
        field_solve_seconds=field_seconds,
        mpa_s=mpa,
        gmres_iters=gm_report.iterations,
        gmres_residual=gm_report.residual,
        cg_iters=cg_report.iterations,
        cg_residual=cg_report.residual,
        particle_counts=counts,
        handoff_seconds=handoff,
        kernel_seconds=kernel_time,
        div_residual=div_residual(state.fields, rho_total, geom),
        sorted_this_cycle=sorted_now,
    )


@dataclass
class RunResult:
    reports: list[CycleReport]
    mpa_mean: float
    mpa_std: float
    elapsed_seconds: float = 0.0

    @property
    def mpa_samples(self):
        return [r.mpa_s for r in self.reports]


def run_cycles(state, n_cycles, on_cycle=None):
    """Drive ``n_cycles`` cycles; ``on_cycle(state, report)`` runs at each
    cycle barrier (diagnostics, dumps)."""
    reports = []
    for c in range(state.cycle, state.cycle + n_cycles):
        report = run_cycle(state, c)
        reports.append(report)
        if on_cycle is not None:
            on_cycle(state, report)
    if reports:
        mpa = np.array([r.mpa_s for r in reports])
        return RunResult(reports, float(mpa.mean()), float(mpa.std()))
    return RunResult(reports, 0.0, 0.0)
