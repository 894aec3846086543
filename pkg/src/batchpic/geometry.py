"""Uniform Cartesian node grid: geometry, index maps, and control volumes.

Fields and moments live on grid nodes, (nx+1, ny+1, nz+1) per box of
nx*ny*nz cells.  On a periodic axis the last node plane duplicates the
first; the duplicate is kept in every array so particle interpolation can
index cells without wrapping, and grid-level code is responsible for
keeping it in sync (see ``fold_axis_pairs`` users in :mod:`batchpic.fields`).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import ConfigurationError, DomainError

PERIODIC = "periodic"
REFLECTING = "reflecting"
_BOUNDARY_KINDS = (PERIODIC, REFLECTING)


@dataclass(frozen=True)
class GridGeometry:
    """Immutable description of the simulation box and its discretization.

    ``Lx = nx * dx`` must hold exactly in floating point (use cell counts
    that divide the box length without rounding, e.g. powers of two).
    """

    nx: int
    ny: int
    nz: int
    dx: float
    dy: float
    dz: float
    Lx: float
    Ly: float
    Lz: float
    origin: tuple[float, float, float] = (0.0, 0.0, 0.0)
    bc: tuple[str, str, str] = (PERIODIC, PERIODIC, PERIODIC)

    def __post_init__(self):
        for n in (self.nx, self.ny, self.nz):
            if not isinstance(n, int) or n < 1:
                raise ConfigurationError(f"cell counts must be positive integers, got {n}")
        for kind in self.bc:
            if kind not in _BOUNDARY_KINDS:
                raise ConfigurationError(f"unknown boundary kind {kind!r}")
        for n, d, L, ax in zip(self.counts, self.spacings, self.lengths, "xyz"):
            if d <= 0.0 or L <= 0.0:
                raise ConfigurationError(f"non-positive spacing/length on axis {ax}")
            if n * d != L:
                raise ConfigurationError(
                    f"L{ax} = {L!r} is not exactly n{ax} * d{ax} = {n * d!r}"
                )

    @classmethod
    def from_box(cls, counts, lengths, origin=(0.0, 0.0, 0.0), bc=(PERIODIC, PERIODIC, PERIODIC)):
        """Build a geometry from cell counts and box lengths (d = L / n)."""
        nx, ny, nz = (int(c) for c in counts)
        Lx, Ly, Lz = (float(v) for v in lengths)
        return cls(
            nx=nx, ny=ny, nz=nz,
            dx=Lx / nx, dy=Ly / ny, dz=Lz / nz,
            Lx=Lx, Ly=Ly, Lz=Lz,
            origin=tuple(float(v) for v in origin),
            bc=tuple(bc),
        )

    @property
    def counts(self):
        return (self.nx, self.ny, self.nz)

    @property
    def spacings(self):
        return (self.dx, self.dy, self.dz)

    @property
    def lengths(self):
        return (self.Lx, self.Ly, self.Lz)

    @property
    def node_shape(self):
        return (self.nx + 1, self.ny + 1, self.nz + 1)

    @property
    def n_nodes(self):
        return (self.nx + 1) * (self.ny + 1) * (self.nz + 1)

    @property
    def n_cells(self):
        return self.nx * self.ny * self.nz

    @property
    def cell_volume(self):
        return self.dx * self.dy * self.dz

    @property
    def unique_shape(self):
        """Node extents with duplicated periodic planes dropped."""
        return tuple(
            n if kind == PERIODIC else n + 1
            for n, kind in zip(self.counts, self.bc)
        )

    def node_index(self, i, j, k):
        """Linearize node (i, j, k), x fastest; bijective on the node box."""
        if not (0 <= i <= self.nx and 0 <= j <= self.ny and 0 <= k <= self.nz):
            raise IndexError(f"node ({i}, {j}, {k}) outside {self.node_shape}")
        return i + (self.nx + 1) * (j + (self.ny + 1) * k)

    def node_of_index(self, idx):
        """Inverse of :meth:`node_index`."""
        if not (0 <= idx < self.n_nodes):
            raise IndexError(f"linear node index {idx} out of range")
        i = idx % (self.nx + 1)
        rest = idx // (self.nx + 1)
        return (i, rest % (self.ny + 1), rest // (self.ny + 1))

    def node_coords(self, axis):
        """Node coordinates along one axis (float64)."""
        n = self.counts[axis]
        d = self.spacings[axis]
        o = self.origin[axis]
        return o + d * np.arange(n + 1, dtype=np.float64)

    def cell_centers(self, axis):
        n = self.counts[axis]
        d = self.spacings[axis]
        o = self.origin[axis]
        return o + d * (np.arange(n, dtype=np.float64) + 0.5)

    def cell_of(self, position):
        """Cell (i, j, k) containing ``position``.

        Positions exactly on the upper box face clamp into the last cell, so
        round-off at a periodic wrap never faults.  Raises
        :class:`DomainError` for genuinely exterior points.
        """
        out = []
        for x, o, d, n, ax in zip(position, self.origin, self.spacings, self.counts, "xyz"):
            if x < o or x > o + n * d:
                raise DomainError(f"position {ax}={x!r} outside [{o!r}, {o + n * d!r}]")
            i = int((x - o) / d)
            if i > n - 1:
                i = n - 1
            out.append(i)
        return tuple(out)

    def cell_index_of(self, x, y, z):
        """Vectorized linear cell index (x fastest), upper faces clamped."""
        i = np.minimum(((np.asarray(x, np.float64) - self.origin[0]) / self.dx).astype(np.int64), self.nx - 1)
        j = np.minimum(((np.asarray(y, np.float64) - self.origin[1]) / self.dy).astype(np.int64), self.ny - 1)
        k = np.minimum(((np.asarray(z, np.float64) - self.origin[2]) / self.dz).astype(np.int64), self.nz - 1)
        if (i < 0).any() or (j < 0).any() or (k < 0).any():
            raise DomainError("positions below the box origin")
        return i + self.nx * (j + self.ny * k)

    def axis_weights(self, axis):
        """Per-node quadrature weights along one axis.

        Reflecting walls own half a cell; every unique periodic node owns a
        full cell (the duplicate plane gets weight zero).
        """
        n = self.counts[axis]
        w = np.ones(n + 1, dtype=np.float64)
        if self.bc[axis] == PERIODIC:
            w[n] = 0.0
        else:
            w[0] = 0.5
            w[n] = 0.5
        return w

    def node_weights(self):
        """3-D control-volume weights, shape ``node_shape`` (float64).

        ``sum(node_weights) * cell_volume == box volume``.
        """
        wx = self.axis_weights(0)
        wy = self.axis_weights(1)
        wz = self.axis_weights(2)
        return wx[:, None, None] * wy[None, :, None] * wz[None, None, :]

    def inv_node_volume(self, dtype=np.float64):
        """Reciprocal control volume per node, used by moment deposition.

        Reflecting walls use the halved volume; the duplicate periodic plane
        carries the same full volume as its partner (contributions landing
        there are folded onto the owning plane afterwards).
        """
        factors = []
        for axis in range(3):
            n = self.counts[axis]
            f = np.ones(n + 1, dtype=np.float64)
            if self.bc[axis] == REFLECTING:
                f[0] = 2.0
                f[n] = 2.0
            factors.append(f)
        inv = (factors[0][:, None, None] * factors[1][None, :, None]
               * factors[2][None, None, :]) / self.cell_volume
        return np.ascontiguousarray(inv.astype(dtype))

    def key(self):
        """Hashable identity used for cached index maps."""
        return (self.counts, self.spacings, self.origin, self.bc)


@lru_cache(maxsize=64)
def _axis_neighbors(n, kind):
    """(lower, upper) neighbor index maps for central differences.

    Periodic axes wrap through the duplicated plane (node n is node 0);
    reflecting axes mirror the stencil arm at the walls, which makes the
    centered derivative vanish there.
    """
    idx = np.arange(n + 1)
    lo = idx - 1
    hi = idx + 1
    if kind == PERIODIC:
        lo[0] = n - 1
        lo[n] = n - 1
        hi[n] = 1
    else:
        lo[0] = 1
        hi[n] = n - 1
    return lo, hi


def axis_neighbors(geom, axis):
    return _axis_neighbors(geom.counts[axis], geom.bc[axis])
