"""Run configuration: precision modes, species parameters, simulation deck."""

from __future__ import annotations

import os
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigurationError
from .geometry import GridGeometry

SINGLE = "single"
DOUBLE = "double"

WORKERS_ENV = "BATCHPIC_WORKERS"


@dataclass(frozen=True)
class PrecisionMode:
    """Storage/compute precision for particles and for grid fields.

    The derived label is ``mixed`` exactly when particles are single and
    fields are double; the remaining supported combinations are the two
    homogeneous ones.
    """

    particles: str = DOUBLE
    fields: str = DOUBLE

    def __post_init__(self):
        for v in (self.particles, self.fields):
            if v not in (SINGLE, DOUBLE):
                raise ConfigurationError(f"precision must be single or double, got {v!r}")
        if self.particles == DOUBLE and self.fields == SINGLE:
            raise ConfigurationError(
                "double particles with single fields is not a supported mode"
            )

    @property
    def label(self):
        if self.particles == SINGLE and self.fields == DOUBLE:
            return "mixed"
        return self.particles

    @property
    def particle_dtype(self):
        return np.float32 if self.particles == SINGLE else np.float64

    @property
    def field_dtype(self):
        return np.float32 if self.fields == SINGLE else np.float64


@dataclass(frozen=True)
class SpeciesParams:
    """One particle species: charge, mass, loading and sampling parameters."""

    species_id: int
    charge: float
    mass: float
    ppc: int
    drift: tuple[float, float, float] = (0.0, 0.0, 0.0)
    vth: tuple[float, float, float] = (0.0, 0.0, 0.0)
    mover_iters: int = 3
    name: str = ""

    def __post_init__(self):
        if self.mass <= 0.0:
            raise ConfigurationError(f"species {self.species_id}: mass must be positive")
        if self.charge == 0.0:
            raise ConfigurationError(f"species {self.species_id}: charge must be nonzero")
        if self.ppc < 1:
            raise ConfigurationError(f"species {self.species_id}: ppc must be >= 1")
        if self.mover_iters < 1:
            raise ConfigurationError(f"species {self.species_id}: mover_iters must be >= 1")

    @property
    def qom(self):
        """Charge-to-mass ratio, exactly charge / mass."""
        return self.charge / self.mass


@dataclass(frozen=True)
class OutputConfig:
    directory: str = "out"
    cadence: int = 100
    dump_fields: bool = True
    dump_moments: bool = True
    diag_name: str = "diag.csv"


@dataclass(frozen=True)
class InitConfig:
    """Initial condition selector.

    ``gem`` loads a Harris current sheet with the standard flux perturbation
    (requires exactly four species: sheet electrons, sheet ions, background
    electrons, background ions, in that order).  ``uniform`` loads every
    species spatially uniform at density ``n0`` with its own drift/thermal
    velocities.
    """

    kind: str = "uniform"
    seed: int = 1
    n0: float = 1.0
    b0: float = 0.0097
    sheet_thickness: float = 0.5
    perturbation: float = 0.1
    background_fraction: float = 0.2

    def __post_init__(self):
        if self.kind not in ("gem", "uniform"):
            raise ConfigurationError(f"unknown init kind {self.kind!r}")
        if self.n0 <= 0.0:
            raise ConfigurationError("init density n0 must be positive")


@dataclass(frozen=True)
class SimulationDeck:
    """Fully validated run configuration."""

    geom: GridGeometry
    species: tuple[SpeciesParams, ...]
    dt: float
    n_cycles: int
    c: float = 1.0
    theta: float = 0.5
    # fold the scalar implicit plasma response into the field solve; without
    # it the bare curl-curl operator limits stability to omega_pe dt < 2 and
    # resolved Debye lengths, which production-style decks do not satisfy
    susceptibility: bool = True
    # cycles between divergence-cleaning solves (0 disables).  Enforcing the
    # raw Gauss law every cycle stamps the particle-noise charge onto E; at
    # coarse grid-to-Debye ratios that field overwhelms the thermal spread
    # and heats catastrophically, so reduced decks run with this off
    clean_period: int = 1
    batches: int = 16
    groups: int = 1
    workers: int = 0  # 0 -> resolve from BATCHPIC_WORKERS, else 1
    sort_period: int = 10
    memory_budget: int = 0  # bytes of resident staged batch data, 0 = unlimited
    precision: PrecisionMode = field(default_factory=PrecisionMode)
    output: OutputConfig = field(default_factory=OutputConfig)
    init: InitConfig = field(default_factory=InitConfig)

    def __post_init__(self):
        if len(self.species) < 1:
            raise ConfigurationError("at least one species is required")
        if self.batches < 1:
            raise ConfigurationError("batches must be >= 1")
        if self.groups < 1:
            raise ConfigurationError("groups must be >= 1")
        if self.n_cycles < 0:
            raise ConfigurationError("cycles must be >= 0")
        if self.dt <= 0.0:
            raise ConfigurationError("dt must be positive")
        if self.c <= 0.0:
            raise ConfigurationError("c must be positive")
        if not (0.5 <= self.theta <= 1.0):
            raise ConfigurationError("theta must lie in [0.5, 1]")
        if self.sort_period < 0:
            raise ConfigurationError("sort_period must be >= 0 (0 disables sorting)")
        if self.workers < 0:
            raise ConfigurationError("workers must be >= 0")
        if self.memory_budget < 0:
            raise ConfigurationError("memory_budget must be >= 0")
        ids = [s.species_id for s in self.species]
        if ids != list(range(len(self.species))):
            raise ConfigurationError(f"species ids must be 0..{len(self.species) - 1}, got {ids}")

    @property
    def n_species(self):
        return len(self.species)

    def resolved_workers(self):
        """Worker threads per group; deck value, else env override, else 1."""
        if self.workers > 0:
            return self.workers
        env = os.environ.get(WORKERS_ENV, "")
        if env.strip():
            try:
                val = int(env)
            except ValueError as exc:
                raise ConfigurationError(f"{WORKERS_ENV}={env!r} is not an integer") from exc
            if val < 1:
                raise ConfigurationError(f"{WORKERS_ENV} must be >= 1")
            return val
        return 1

    def total_particles(self):
        return self.geom.n_cells * sum(s.ppc for s in self.species)

    def with_overrides(self, **kwargs):
        return replace(self, **kwargs)
