import numpy as np
import pytest

from batchpic.config import (PrecisionMode, SimulationDeck, SpeciesParams,
                             WORKERS_ENV)
from batchpic.errors import ConfigurationError
from batchpic.particles import ParticleBuffer, init_maxwellian
from conftest import small_gem_deck


def test_precision_labels():
    assert PrecisionMode("double", "double").label == "double"
    assert PrecisionMode("single", "single").label == "single"
    assert PrecisionMode("single", "double").label == "mixed"


def test_precision_invalid_combo():
    with pytest.raises(ConfigurationError):
        PrecisionMode("double", "single")
    with pytest.raises(ConfigurationError):
        PrecisionMode("half", "double")


def test_qom_matches_ratio():
    s = SpeciesParams(0, -1.0, 0.015625, 1)
    assert s.qom == -1.0 / 0.015625 == -64.0


def test_species_validation():
    with pytest.raises(ConfigurationError):
        SpeciesParams(0, -1.0, 0.0, 1)
    with pytest.raises(ConfigurationError):
        SpeciesParams(0, -1.0, 1.0, 0)
    with pytest.raises(ConfigurationError):
        SpeciesParams(0, -1.0, 1.0, 1, mover_iters=0)


def test_deck_invariants():
    deck = small_gem_deck()
    with pytest.raises(ConfigurationError):
        deck.with_overrides(batches=0)
    with pytest.raises(ConfigurationError):
        deck.with_overrides(groups=0)
    with pytest.raises(ConfigurationError):
        deck.with_overrides(theta=0.3)
    with pytest.raises(ConfigurationError):
        deck.with_overrides(species=())


def test_workers_env_override(monkeypatch):
    deck = small_gem_deck(workers=0)
    monkeypatch.delenv(WORKERS_ENV, raising=False)
    assert deck.resolved_workers() == 1
    monkeypatch.setenv(WORKERS_ENV, "3")
    assert deck.resolved_workers() == 3
    # explicit deck value beats the environment
    assert deck.with_overrides(workers=2).resolved_workers() == 2
    monkeypatch.setenv(WORKERS_ENV, "junk")
    with pytest.raises(ConfigurationError):
        deck.resolved_workers()


def test_particle_buffer_is_soa(unit_geom):
    sp = SpeciesParams(0, -1.0, 1.0, 2, vth=(0.1, 0.1, 0.1))
    buf = init_maxwellian(sp, unit_geom, seed=1)
    for arr in (*buf.components(), buf.q_p):
        assert isinstance(arr, np.ndarray)
        assert arr.flags["C_CONTIGUOUS"]
        assert arr.ndim == 1


def test_weight_stencil_bounds(unit_geom):
    from batchpic.mover import weights
    rng = np.random.default_rng(0)
    for _ in range(500):
        st = weights(rng.random(3) * 4.0, unit_geom)
        assert (st.w >= 0.0).all() and (st.w <= 1.0).all()
