"""Structure-of-arrays particle storage, batching, boundaries, and loading.

Each species owns one :class:`ParticleBuffer`: six contiguous component
arrays plus per-particle charge.  There are no per-particle objects
anywhere; kernels stream the component arrays directly.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .config import PrecisionMode, SpeciesParams
from .errors import ConfigurationError, IntegrityError
from .geometry import PERIODIC, GridGeometry

CHECKPOINT_MAGIC = b"BPIC"
CHECKPOINT_VERSION = 1


@dataclass
class ParticleBuffer:
    """One species' particles in structure-of-arrays layout.

    ``ids`` are stable identities assigned at load time; sorting permutes
    them along with everything else, which lets tests compare runs whose
    buffers are ordered differently.
    """

    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    u: np.ndarray
    v: np.ndarray
    w: np.ndarray
    q_p: np.ndarray
    ids: np.ndarray
    species_id: int

    @classmethod
    def empty(cls, n, species_id=0, dtype=np.float64):
        comp = lambda: np.zeros(n, dtype=dtype)
        return cls(x=comp(), y=comp(), z=comp(), u=comp(), v=comp(), w=comp(),
                   q_p=np.zeros(n, dtype=dtype),
                   ids=np.arange(n, dtype=np.int64), species_id=species_id)

    @property
    def n(self):
        return self.x.shape[0]

    @property
    def dtype(self):
        return self.x.dtype

    def components(self):
        return (self.x, self.y, self.z, self.u, self.v, self.w)

    def copy(self):
        return ParticleBuffer(
            x=self.x.copy(), y=self.y.copy(), z=self.z.copy(),
            u=self.u.copy(), v=self.v.copy(), w=self.w.copy(),
            q_p=self.q_p.copy(), ids=self.ids.copy(), species_id=self.species_id)

    def permute(self, order):
        for name in ("x", "y", "z", "u", "v", "w", "q_p", "ids"):
            arr = getattr(self, name)
            setattr(self, name, np.ascontiguousarray(arr[order]))
        return self

    def validate(self, geom=None):
        n = self.n
        for arr in (*self.components(), self.q_p, self.ids):
            if arr.shape != (n,):
                raise IntegrityError("particle component arrays disagree in length")
        if geom is not None:
            for q, o, L in zip((self.x, self.y, self.z), geom.origin, geom.lengths):
                if q.size and (q.min() < o or q.max() > o + L):
                    raise IntegrityError("particle positions outside the domain")
        return self


@dataclass
class BatchPlan:
    """Partition of one species into contiguous, evenly sized spans."""

    spans: tuple[tuple[int, int], ...]
    batches: int
    group_of: tuple[int, ...] = field(default=())

    def __post_init__(self):
        if not self.group_of:
            self.group_of = tuple(0 for _ in self.spans)


def partition_batches(n_p, m):
    """Split ``n_p`` particles into ``m`` spans differing by at most one.

    The first ``n_p % m`` spans take the extra particle; spans beyond the
    particle count come out empty and are skipped downstream.
    """
    if m < 1:
        raise ConfigurationError(f"batch count must be >= 1, got {m}")
    if n_p < 0:
        raise ConfigurationError(f"negative particle count {n_p}")
    q, r = divmod(n_p, m)
    spans = []
    start = 0
    for b in range(m):
        length = q + 1 if b < r else q
        spans.append((start, length))
        start += length
    return BatchPlan(spans=tuple(spans), batches=m)


def apply_boundaries(buf, geom):
    """Wrap periodic axes, mirror reflecting axes (negating the normal
    velocity), in place.  Positions more than one box length out indicate a
    runaway particle and raise :class:`IntegrityError`.

    Branch selection uses the pre-update masks so the vectorized result is
    bit-identical to the kernel's per-particle ``if/elif``.
    """
    for pos, vel, o, L, kind in (
        (buf.x, buf.u, geom.origin[0], geom.Lx, geom.bc[0]),
        (buf.y, buf.v, geom.origin[1], geom.Ly, geom.bc[1]),
        (buf.z, buf.w, geom.origin[2], geom.Lz, geom.bc[2]),
    ):
        if pos.size == 0:
            continue
        Lc = pos.dtype.type(L)
        oc = pos.dtype.type(o)
        hi = oc + Lc
        if kind == PERIODIC:
            below = pos < oc
            above = pos >= hi
            pos[below] += Lc
            # an upward wrap can round onto the top edge; fold it to the
            # origin (the identical periodic point) so the map is idempotent
            snapped = below & (pos >= hi)
            pos[snapped] = oc
            pos[above] -= Lc
        else:
            below = pos < oc
            above = pos > hi
            pos[below] = oc + (oc - pos[below])
            vel[below] = -vel[below]
            pos[above] = hi + hi - pos[above]
            vel[above] = -vel[above]
        if (pos < oc).any() or (pos > hi).any():
            raise IntegrityError(
                "particle left the domain by a full box length (runaway)")
    return buf


def sort_by_cell(buf, geom):
    """Stable reorder so linearized cell indices are nondecreasing.

    The multiset of particles is untouched; equal-cell particles keep their
    relative order.
    """
    if buf.n == 0:
        return buf
    keys = geom.cell_index_of(buf.x, buf.y, buf.z)
    order = np.argsort(keys, kind="stable")
    return buf.permute(order)


def cell_sequence(buf, geom):
    """Linear cell index per particle, in buffer order (sortedness checks)."""
    if buf.n == 0:
        return np.zeros(0, np.int64)
    return geom.cell_index_of(buf.x, buf.y, buf.z)


def _species_rng(seed, species_id):
    key = np.array([np.uint64(seed), np.uint64(species_id)], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def init_maxwellian(species, geom, density_fn=None, seed=1,
                    precision=None, drift=None):
    """Load ``ppc`` particles per cell with drifting-Maxwellian velocities.

    The per-particle charge is ``q * n(cell center) * V_cell / ppc`` so the
    species total matches the density integral on the cell-midpoint rule;
    identical density profiles for opposite charges cancel exactly.

    The counter-based generator is keyed by (seed, species), and positions
    are drawn before velocities in a fixed cell-major order, so loading is
    bit-reproducible and independent of worker configuration.
    """
    mode = precision or PrecisionMode()
    pd = mode.particle_dtype
    ppc = species.ppc
    n_cells = geom.n_cells
    n_p = n_cells * ppc
    rng = _species_rng(seed, species.species_id)

    # cell-major particle order, cells enumerated x fastest to match
    # cell_index_of; particle slots within a cell are contiguous
    cx = geom.cell_centers(0)
    cy = geom.cell_centers(1)
    cz = geom.cell_centers(2)
    lin = np.arange(n_cells)
    ci = lin % geom.nx
    cj = (lin // geom.nx) % geom.ny
    ck = lin // (geom.nx * geom.ny)

    jitter = rng.random((3, n_p))
    corner_x = geom.origin[0] + geom.dx * np.repeat(ci, ppc)
    corner_y = geom.origin[1] + geom.dy * np.repeat(cj, ppc)
    corner_z = geom.origin[2] + geom.dz * np.repeat(ck, ppc)
    x = corner_x + geom.dx * jitter[0]
    y = corner_y + geom.dy * jitter[1]
    z = corner_z + geom.dz * jitter[2]

    drift_vec = species.drift if drift is None else tuple(drift)
    normals = rng.standard_normal((3, n_p))
    u = drift_vec[0] + species.vth[0] * normals[0]
    v = drift_vec[1] + species.vth[1] * normals[1]
    w = drift_vec[2] + species.vth[2] * normals[2]

    if density_fn is None:
        dens = np.ones(n_cells)
    else:
        dens = np.asarray(density_fn(cx[ci], cy[cj], cz[ck]), dtype=np.float64)
        if (dens <= 0.0).any():
            raise ConfigurationError("density profile must be positive")
    q_cell = species.charge * dens * geom.cell_volume / ppc
    q_p = np.repeat(q_cell, ppc)

    buf = ParticleBuffer(
        x=x.astype(pd), y=y.astype(pd), z=z.astype(pd),
        u=u.astype(pd), v=v.astype(pd), w=w.astype(pd),
        q_p=q_p.astype(pd),
        ids=np.arange(n_p, dtype=np.int64),
        species_id=species.species_id,
    )
    return buf.validate(geom)


def write_particles(buf, path):
    """Checkpoint dump: little-endian header then x, y, z, u, v, w arrays."""
    itemsize = buf.dtype.itemsize
    header = struct.pack("<4sIQB", CHECKPOINT_MAGIC, CHECKPOINT_VERSION,
                         buf.n, itemsize)
    with open(path, "wb") as fh:
        fh.write(header)
        for arr in buf.components():
            fh.write(np.ascontiguousarray(arr, dtype=f"<f{itemsize}").tobytes())


def read_particles(path, species_id=0):
    """Read a checkpoint dump back into a :class:`ParticleBuffer`."""
    with open(path, "rb") as fh:
        raw = fh.read(struct.calcsize("<4sIQB"))
        magic, version, n, itemsize = struct.unpack("<4sIQB", raw)
        if magic != CHECKPOINT_MAGIC:
            raise IntegrityError(f"bad checkpoint magic {magic!r}")
        if version != CHECKPOINT_VERSION:
            raise IntegrityError(f"unsupported checkpoint version {version}")
        dtype = np.dtype(f"<f{itemsize}")
        comps = []
        for _ in range(6):
            data = fh.read(n * itemsize)
            comps.append(np.frombuffer(data, dtype=dtype).astype(
                np.float32 if itemsize == 4 else np.float64))
    x, y, z, u, v, w = comps
    return ParticleBuffer(x=x, y=y, z=z, u=u, v=v, w=w,
                          q_p=np.zeros(n, x.dtype),
                          ids=np.arange(n, dtype=np.int64),
                          species_id=species_id)
