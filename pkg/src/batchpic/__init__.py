"""batchpic: implicit particle-in-cell plasma engine with batched workers,
multi-precision particle storage, and a throughput benchmark harness."""

from .config import (InitConfig, OutputConfig, PrecisionMode, SimulationDeck,
                     SpeciesParams)
from .deck import parse_deck, write_deck
from .dump import __version__
from .fields import FieldGrid, MomentGrid
from .geometry import GridGeometry
from .particles import BatchPlan, ParticleBuffer, partition_batches
from .pipeline import CycleReport, RunResult, make_state, run_cycle, run_cycles
from .run import run_simulation

__all__ = [
    "BatchPlan", "CycleReport", "FieldGrid", "GridGeometry", "InitConfig",
    "MomentGrid", "OutputConfig", "ParticleBuffer", "PrecisionMode",
    "RunResult", "SimulationDeck", "SpeciesParams", "__version__",
    "make_state", "parse_deck", "partition_batches", "run_cycle",
    "run_cycles", "run_simulation", "write_deck",
]


def bundled_deck(name):
    """Path to a deck shipped with the package (``gem_desk``, ``gem_full``)."""
    from importlib.resources import files

    path = files(__name__) / "decks" / f"{name}.deck"
    if not path.is_file():
        raise FileNotFoundError(f"no bundled deck named {name!r}")
    return str(path)
