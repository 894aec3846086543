import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from batchpic.config import PrecisionMode, SpeciesParams
from batchpic.errors import ConfigurationError, IntegrityError
from batchpic.fields import MomentGrid
from batchpic.geometry import GridGeometry
from batchpic.mover import deposit_buffer
from batchpic.particles import (ParticleBuffer, apply_boundaries,
                                cell_sequence, init_maxwellian,
                                partition_batches, read_particles,
                                sort_by_cell, write_particles)


# ---------------------------------------------------------------- batching

def test_partition_1000_by_16():
    plan = partition_batches(1000, 16)
    lengths = [n for _, n in plan.spans]
    assert lengths == [63] * 8 + [62] * 8


def test_partition_single_batch():
    plan = partition_batches(100, 1)
    assert plan.spans == ((0, 100),)


def test_partition_more_batches_than_particles():
    plan = partition_batches(3, 5)
    assert [n for _, n in plan.spans] == [1, 1, 1, 0, 0]


def test_partition_zero_batches_rejected():
    with pytest.raises(ConfigurationError):
        partition_batches(10, 0)


@given(st.integers(0, 10_000), st.integers(1, 64))
def test_partition_tiles_exactly(n_p, m):
    plan = partition_batches(n_p, m)
    assert len(plan.spans) == m
    cursor = 0
    for start, length in plan.spans:
        assert start == cursor
        assert length >= 0
        cursor += length
    assert cursor == n_p
    lengths = [n for _, n in plan.spans]
    assert max(lengths) - min(lengths) <= 1


# -------------------------------------------------------------- boundaries

def _one_particle(x, y, z, u=0.0, v=0.0, w=0.0):
    buf = ParticleBuffer.empty(1)
    buf.x[0], buf.y[0], buf.z[0] = x, y, z
    buf.u[0], buf.v[0], buf.w[0] = u, v, w
    return buf


def test_periodic_wrap(unit_geom):
    buf = _one_particle(4.1, 1.0, 1.0)
    apply_boundaries(buf, unit_geom)
    assert buf.x[0] == pytest.approx(0.1, abs=1e-12)


def test_reflecting_mirror(mixed_bc_geom):
    buf = _one_particle(1.0, -0.2, 1.0, v=-3.0)
    apply_boundaries(buf, mixed_bc_geom)
    assert buf.y[0] == pytest.approx(0.2)
    assert buf.v[0] == 3.0


def test_in_domain_unchanged(unit_geom):
    buf = _one_particle(1.25, 2.5, 3.75, u=1.0, v=-1.0, w=0.5)
    before = {n: getattr(buf, n).copy() for n in ("x", "y", "z", "u", "v", "w")}
    apply_boundaries(buf, unit_geom)
    for n, arr in before.items():
        assert (getattr(buf, n) == arr).all()


def test_runaway_rejected(unit_geom):
    buf = _one_particle(9.5, 1.0, 1.0)  # more than one box length out
    with pytest.raises(IntegrityError):
        apply_boundaries(buf, unit_geom)


@given(st.floats(-3.9, 7.9), st.floats(-3.9, 7.9), st.floats(-3.9, 7.9))
def test_boundaries_idempotent(x, y, z):
    g = GridGeometry.from_box((4, 4, 4), (4.0, 4.0, 4.0),
                              bc=("periodic", "reflecting", "periodic"))
    buf = _one_particle(x, y, z, u=1.0, v=1.0, w=1.0)
    apply_boundaries(buf, g)
    once = {n: getattr(buf, n).copy() for n in ("x", "y", "z", "u", "v", "w")}
    apply_boundaries(buf, g)
    for n, arr in once.items():
        assert (getattr(buf, n) == arr).all()


# ----------------------------------------------------------------- sorting

def _random_buffer(geom, n, seed=0):
    rng = np.random.default_rng(seed)
    buf = ParticleBuffer.empty(n)
    buf.x[:] = rng.random(n) * geom.Lx
    buf.y[:] = rng.random(n) * geom.Ly
    buf.z[:] = rng.random(n) * geom.Lz
    buf.u[:] = rng.standard_normal(n)
    buf.v[:] = rng.standard_normal(n)
    buf.w[:] = rng.standard_normal(n)
    buf.q_p[:] = rng.random(n) + 0.5
    return buf


def test_sort_already_sorted_identity(unit_geom):
    buf = _random_buffer(unit_geom, 500, seed=1)
    sort_by_cell(buf, unit_geom)
    snapshot = buf.copy()
    sort_by_cell(buf, unit_geom)
    for n in ("x", "y", "z", "u", "v", "w", "q_p", "ids"):
        assert (getattr(buf, n) == getattr(snapshot, n)).all()


def test_sort_two_particles_swap(unit_geom):
    buf = ParticleBuffer.empty(2)
    # cells 5 then 2 (linear index = i + nx j + nx ny k)
    buf.x[:] = [1.5, 2.5]
    buf.y[:] = [1.5, 0.5]
    buf.z[:] = [0.5, 0.5]
    seq = cell_sequence(buf, unit_geom)
    assert list(seq) == [5, 2]
    sort_by_cell(buf, unit_geom)
    assert list(cell_sequence(buf, unit_geom)) == [2, 5]
    assert list(buf.ids) == [1, 0]


def test_sort_multiset_and_deposit_invariance(unit_geom):
    # oracle 1: brute-force multiset comparison of particle tuples
    # oracle 2: sequential deposition must produce bit-identical moments
    buf = _random_buffer(unit_geom, 10_000, seed=7)
    unsorted = buf.copy()
    sort_by_cell(buf, unit_geom)

    seq = cell_sequence(buf, unit_geom)
    assert (np.diff(seq) >= 0).all()

    def tuple_set(b):
        return sorted(zip(b.x.tolist(), b.y.tolist(), b.z.tolist(),
                          b.u.tolist(), b.v.tolist(), b.w.tolist(),
                          b.q_p.tolist()))
    assert tuple_set(buf) == tuple_set(unsorted)

    m_sorted = MomentGrid.zeros(unit_geom)
    m_unsorted = MomentGrid.zeros(unit_geom)
    deposit_buffer(buf, m_sorted, unit_geom)
    deposit_buffer(unsorted, m_unsorted, unit_geom)
    assert (m_sorted.acc == m_unsorted.acc).all()


def test_sort_stable_within_equal_cells(unit_geom):
    buf = ParticleBuffer.empty(3)
    buf.x[:] = [0.2, 0.3, 0.1]   # all in cell 0
    buf.y[:] = 0.1
    buf.z[:] = 0.1
    sort_by_cell(buf, unit_geom)
    assert list(buf.ids) == [0, 1, 2]


# ------------------------------------------------------------ maxwellian

def _species(ppc=1, drift=(0.0, 0.0, 0.0), vth=(0.0, 0.0, 0.0)):
    return SpeciesParams(0, -1.0, 1.0, ppc, drift=drift, vth=vth)


def test_init_count_ppc1():
    g = GridGeometry.from_box((2, 2, 2), (2.0, 2.0, 2.0))
    buf = init_maxwellian(_species(ppc=1), g, seed=3)
    assert buf.n == 8


def test_init_degenerate_maxwellian_is_pure_drift(unit_geom):
    buf = init_maxwellian(_species(ppc=2, drift=(0.1, 0.0, 0.0)), unit_geom,
                          seed=3)
    assert (buf.u == 0.1).all()
    assert (buf.v == 0.0).all()
    assert (buf.w == 0.0).all()


def test_init_moments_match_law_of_large_numbers():
    # oracle: sample mean within 5 sigma/sqrt(N) of drift, per-axis sample
    # variance within 1% of the thermal speed squared, at 1e6 samples
    g = GridGeometry.from_box((10, 10, 10), (10.0, 10.0, 10.0))
    sp = _species(ppc=1000, drift=(0.3, -0.2, 0.05), vth=(1.0, 1.0, 1.0))
    buf = init_maxwellian(sp, g, seed=42)
    n = buf.n
    assert n == 1_000_000
    for arr, mu in ((buf.u, 0.3), (buf.v, -0.2), (buf.w, 0.05)):
        assert abs(arr.mean() - mu) < 5.0 / np.sqrt(n)
        assert abs(arr.var() - 1.0) < 0.01


def test_init_positions_inside_cells(unit_geom):
    buf = init_maxwellian(_species(ppc=3), unit_geom, seed=9)
    assert buf.x.min() >= 0.0 and buf.x.max() <= unit_geom.Lx
    # cell-major loading: each cell gets exactly ppc particles
    counts = np.bincount(cell_sequence(buf, unit_geom),
                         minlength=unit_geom.n_cells)
    assert (counts == 3).all()


def test_init_bit_reproducible(unit_geom):
    sp = _species(ppc=4, vth=(0.5, 0.5, 0.5))
    a = init_maxwellian(sp, unit_geom, seed=1234)
    b = init_maxwellian(sp, unit_geom, seed=1234)
    for name in ("x", "y", "z", "u", "v", "w", "q_p"):
        assert (getattr(a, name) == getattr(b, name)).all()
    c = init_maxwellian(sp, unit_geom, seed=1235)
    assert not (a.x == c.x).all()


def test_init_charge_matches_density_integral(unit_geom):
    sp = _species(ppc=5)
    n0 = 0.25
    buf = init_maxwellian(sp, unit_geom, seed=2,
                          density_fn=lambda x, y, z: np.full_like(y, n0))
    expected = sp.charge * n0 * unit_geom.Lx * unit_geom.Ly * unit_geom.Lz
    assert buf.q_p.sum() == pytest.approx(expected, rel=1e-12)


def test_init_single_precision_storage(unit_geom):
    mode = PrecisionMode(particles="single", fields="double")
    buf = init_maxwellian(_species(ppc=2, vth=(1.0, 1.0, 1.0)), unit_geom,
                          seed=5, precision=mode)
    assert buf.dtype == np.float32


# ------------------------------------------------------------- checkpoint

def test_particle_checkpoint_roundtrip(tmp_path, unit_geom):
    buf = _random_buffer(unit_geom, 257, seed=11)
    path = tmp_path / "particles.bin"
    write_particles(buf, path)
    back = read_particles(path)
    assert back.n == buf.n
    for name in ("x", "y", "z", "u", "v", "w"):
        assert (getattr(back, name) == getattr(buf, name)).all()


def test_particle_checkpoint_single_precision(tmp_path, unit_geom):
    buf = _random_buffer(unit_geom, 64, seed=12)
    buf32 = ParticleBuffer(
        x=buf.x.astype(np.float32), y=buf.y.astype(np.float32),
        z=buf.z.astype(np.float32), u=buf.u.astype(np.float32),
        v=buf.v.astype(np.float32), w=buf.w.astype(np.float32),
        q_p=buf.q_p.astype(np.float32), ids=buf.ids, species_id=0)
    path = tmp_path / "p32.bin"
    write_particles(buf32, path)
    back = read_particles(path)
    assert back.dtype == np.float32
    assert (back.x == buf32.x).all()
