"""Node-centered field and moment containers.

Moments accumulate in a shared fixed-point integer representation
(``MOMENT_SCALE``) so that deposition is an exact, order-independent
reduction: any batching, worker schedule, or particle ordering produces
bit-identical grids.  Float views are materialized on demand in the grid's
storage precision.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .config import PrecisionMode
from .errors import IntegrityError
from .geometry import PERIODIC, GridGeometry

# Fixed-point quantum for moment deposition: 2**-43 ~ 1.1e-13 absolute.
# Accumulated node values must stay below 2**63 / MOMENT_SCALE ~ 1.05e6,
# comfortably true for normalized decks where densities are O(1).
MOMENT_SCALE = 2.0 ** 43

N_MOMENTS = 10  # rho, Jx, Jy, Jz, Pxx, Pxy, Pxz, Pyy, Pyz, Pzz


def fold_periodic(arr, geom):
    """Merge duplicated periodic planes in place (last plane -> first).

    Works for any array whose trailing three axes are the node box.  The
    duplicate plane is re-synced afterwards so gathers keep working.
    Integer arrays fold exactly.
    """
    nd = arr.ndim
    for axis, kind in enumerate(geom.bc):
        if kind != PERIODIC:
            continue
        ax = nd - 3 + axis
        n = geom.counts[axis]
        first = [slice(None)] * nd
        last = [slice(None)] * nd
        first[ax] = 0
        last[ax] = n
        arr[tuple(first)] += arr[tuple(last)]
        arr[tuple(last)] = arr[tuple(first)]
    return arr


def sync_periodic(arr, geom):
    """Copy owning periodic planes onto their duplicates (no summation)."""
    nd = arr.ndim
    for axis, kind in enumerate(geom.bc):
        if kind != PERIODIC:
            continue
        ax = nd - 3 + axis
        n = geom.counts[axis]
        first = [slice(None)] * nd
        last = [slice(None)] * nd
        first[ax] = 0
        last[ax] = n
        arr[tuple(last)] = arr[tuple(first)]
    return arr


def unique_view(arr, geom):
    """View without duplicated periodic planes (trailing three axes)."""
    nd = arr.ndim
    sl = [slice(None)] * nd
    for axis, kind in enumerate(geom.bc):
        stop = geom.counts[axis] if kind == PERIODIC else geom.counts[axis] + 1
        sl[nd - 3 + axis] = slice(0, stop)
    return arr[tuple(sl)]


@dataclass
class FieldGrid:
    """Electric and magnetic field, three node-centered components each."""

    E: np.ndarray  # (3, nx+1, ny+1, nz+1)
    B: np.ndarray
    precision: str

    @classmethod
    def zeros(cls, geom, precision_mode=None):
        mode = precision_mode or PrecisionMode()
        dt = mode.field_dtype
        shape = (3,) + geom.node_shape
        return cls(E=np.zeros(shape, dt), B=np.zeros(shape, dt), precision=mode.fields)

    @property
    def dtype(self):
        return self.E.dtype

    def copy(self):
        return FieldGrid(E=self.E.copy(), B=self.B.copy(), precision=self.precision)

    def copy_from(self, other):
        """Overwrite in place (per-group private copies of the global box)."""
        np.copyto(self.E, other.E, casting="same_kind")
        np.copyto(self.B, other.B, casting="same_kind")

    def check_finite(self):
        if not (np.isfinite(self.E).all() and np.isfinite(self.B).all()):
            raise IntegrityError("non-finite field values")


@dataclass
class MomentGrid:
    """Per-species charge, current, and pressure-tensor densities.

    Storage is the fixed-point accumulator ``acc``; ``rho``/``J``/``P``
    expose float views in the configured precision.
    """

    acc: np.ndarray  # (10, nx+1, ny+1, nz+1) int64 fixed point
    species_id: int
    precision: str = "double"

    @classmethod
    def zeros(cls, geom, species_id=0, precision_mode=None):
        mode = precision_mode or PrecisionMode()
        shape = (N_MOMENTS,) + geom.node_shape
        return cls(acc=np.zeros(shape, np.int64), species_id=species_id,
                   precision=mode.fields)

    @property
    def _float_dtype(self):
        return np.float32 if self.precision == "single" else np.float64

    def to_float(self):
        """All ten components as one float block in storage precision."""
        out = self.acc * (1.0 / MOMENT_SCALE)
        if self._float_dtype is np.float32:
            out = out.astype(np.float32)
        return out

    @property
    def rho(self):
        return self.to_float()[0]

    @property
    def J(self):
        return self.to_float()[1:4]

    @property
    def P(self):
        return self.to_float()[4:10]

    def zero(self):
        self.acc[:] = 0
        return self

    def add(self, other):
        """Exact merge of another accumulator (order-independent)."""
        self.acc += other if isinstance(other, np.ndarray) else other.acc
        return self

    def fold(self, geom):
        """Merge wrapped periodic contributions exactly, in integer space."""
        fold_periodic(self.acc, geom)
        return self


def zero_moments(moments):
    """Reset every component of a moment grid to exactly zero."""
    return moments.zero()


def total_moments(per_species, geom, precision_mode=None):
    """Sum per-species moment grids into one grid (exact integer merge)."""
    mode = precision_mode or PrecisionMode()
    if not per_species:
        raise ValueError("need at least one species moment grid")
    out = MomentGrid(acc=np.zeros_like(per_species[0].acc), species_id=-1,
                     precision=mode.fields)
    for m in per_species:
        out.acc += m.acc
    return out
