import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from batchpic.config import (InitConfig, PrecisionMode, SimulationDeck,
                             SpeciesParams)
from batchpic.geometry import GridGeometry

settings.register_profile(
    "ci", deadline=None, max_examples=60,
    suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("ci")

B0 = 0.0097
MASS_RATIO = 64.0
VTH_E = B0 * np.sqrt(MASS_RATIO / 12.0)
VTH_I = B0 * np.sqrt(5.0 / 12.0)
N0 = 1.0 / (4.0 * np.pi)


@pytest.fixture
def unit_geom():
    """4^3 cells on a unit-spacing periodic box."""
    return GridGeometry.from_box((4, 4, 4), (4.0, 4.0, 4.0))


@pytest.fixture
def mixed_bc_geom():
    return GridGeometry.from_box((8, 8, 8), (6.4, 6.4, 6.4),
                                 bc=("periodic", "reflecting", "periodic"))


def gem_species(ppc):
    return (
        SpeciesParams(0, -1.0, 1.0 / MASS_RATIO, ppc, vth=(VTH_E,) * 3,
                      name="sheet_electrons"),
        SpeciesParams(1, +1.0, 1.0, ppc, vth=(VTH_I,) * 3, name="sheet_ions"),
        SpeciesParams(2, -1.0, 1.0 / MASS_RATIO, ppc, vth=(VTH_E,) * 3,
                      name="background_electrons"),
        SpeciesParams(3, +1.0, 1.0, ppc, vth=(VTH_I,) * 3,
                      name="background_ions"),
    )


def small_gem_deck(ppc=4, cells=(8, 8, 8), box=(6.4, 6.4, 6.4), cycles=4,
                   **overrides):
    """A fast reconnection deck for structural tests (not the desk deck)."""
    geom = GridGeometry.from_box(cells, box,
                                 bc=("periodic", "reflecting", "periodic"))
    base = dict(
        geom=geom, species=gem_species(ppc), dt=0.25, n_cycles=cycles,
        init=InitConfig(kind="gem", seed=11, n0=N0, b0=B0),
        batches=4, groups=1, workers=1, sort_period=0, clean_period=0,
    )
    base.update(overrides)
    return SimulationDeck(**base)


def desk_gem_deck(cycles, **overrides):
    """The bundled desk deck, loaded and optionally overridden."""
    import batchpic
    from batchpic.deck import parse_deck

    deck = parse_deck(batchpic.bundled_deck("gem_desk"))
    return deck.with_overrides(n_cycles=cycles, **overrides)


def buffer_sorted_by_id(buf):
    """Copy of a buffer permuted into ascending-id order (comparisons)."""
    out = buf.copy()
    out.permute(np.argsort(out.ids, kind="stable"))
    return out


def buffers_bitwise_equal(a, b):
    """Bitwise state comparison independent of array ordering."""
    sa, sb = buffer_sorted_by_id(a), buffer_sorted_by_id(b)
    return all(
        np.array_equal(getattr(sa, n), getattr(sb, n))
        for n in ("x", "y", "z", "u", "v", "w", "q_p", "ids"))
