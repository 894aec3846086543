"""Particle mover and moment interpolation: per-particle API and batch pass.

The per-particle functions wrap the span kernels of
:mod:`batchpic.kernels` with count 1, so composing them (move everything,
apply boundaries, deposit everything) reproduces the fused batch kernel
bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import DomainError, IntegrityError
from .fields import MOMENT_SCALE


@dataclass
class WeightStencil:
    """Cell plus its 8 trilinear corner weights (low/high per axis, x fastest)."""

    cell: tuple[int, int, int]
    w: np.ndarray  # shape (8,)


@dataclass
class ParticleFieldSample:
    """E and B interpolated to one particle position."""

    E: np.ndarray  # (3,)
    B: np.ndarray  # (3,)


def _check_inside(position, geom):
    for q, o, L, ax in zip(position, geom.origin, geom.lengths, "xyz"):
        if q < o or q > o + L:
            raise DomainError(f"position {ax}={q!r} outside [{o!r}, {o + L!r}]")


def _mixed_flag(particle_dtype, field_dtype):
    return 1 if np.dtype(particle_dtype) != np.dtype(field_dtype) else 0


def weights(position, geom):
    """Trilinear weights of an in-domain position.

    Per axis the pair is (1 - f, f) with f the fractional cell offset; the
    3-D weight of each corner is the product of its axis factors.
    """
    _check_inside(position, geom)
    cell = []
    frac = []
    for q, o, d, n in zip(position, geom.origin, geom.spacings, geom.counts):
        g = (q - o) / d
        i = int(g)
        if i > n - 1:
            i = n - 1
        cell.append(i)
        frac.append(g - i)
    fx, fy, fz = frac
    ax, ay, az = 1.0 - fx, 1.0 - fy, 1.0 - fz
    w = np.array([
        ax * ay * az, fx * ay * az, ax * fy * az, fx * fy * az,
        ax * ay * fz, fx * ay * fz, ax * fy * fz, fx * fy * fz,
    ])
    return WeightStencil(cell=tuple(cell), w=w)


def gather_fields(position, fields, geom):
    """Weighted 8-node sum of E and B at ``position``.

    The sample comes back in the position's dtype; with double fields and a
    single-precision position this is the double gather rounded once per
    component.
    """
    _check_inside(position, geom)
    pos = np.asarray(position)
    if pos.dtype.kind != "f":
        pos = pos.astype(np.float64)
    pd = pos.dtype.type
    geo_g, geo_i = kernels.make_geo_arrays(geom, fields.dtype)
    out = np.empty((1, 6), dtype=pd)
    kernels.gather_span(pos[:1], pos[1:2], pos[2:3], 0, 1,
                        fields.E, fields.B, geo_g, geo_i, pd(1.0), out)
    return ParticleFieldSample(E=out[0, :3].copy(), B=out[0, 3:].copy())


def corrector_velocity(v_n, sample, qdt2m, c):
    """Implicit average velocity from the half electric kick and the
    magnetic rotation, exactly as the discretized equations state.

    The denominator is >= 1, so this never divides by zero.
    """
    v_n = np.asarray(v_n, dtype=np.float64)
    E = np.asarray(sample.E, dtype=np.float64)
    B = np.asarray(sample.B, dtype=np.float64)
    beta = qdt2m / c
    t = v_n + qdt2m * E
    bsq = float(B[0] * B[0] + B[1] * B[1] + B[2] * B[2])
    denom = 1.0 + beta * beta * bsq
    tdb = float(t[0] * B[0] + t[1] * B[1] + t[2] * B[2])
    cross = np.array([
        t[1] * B[2] - t[2] * B[1],
        t[2] * B[0] - t[0] * B[2],
        t[0] * B[1] - t[1] * B[0],
    ])
    return (t + beta * (cross + beta * tdb * B)) / denom


def mover_iterate(position, velocity, fields, species, dt, geom, c=1.0):
    """One implicit step of a single particle.

    Runs the species' fixed number of corrector iterations, each gathering
    fields at the midpoint of the trial displacement, then commits the
    position/velocity update.  Boundaries are the caller's job.
    """
    _check_inside(position, geom)
    pos = np.asarray(position)
    if pos.dtype.kind != "f":
        pos = pos.astype(np.float64)
    pd = pos.dtype.type
    vel = np.asarray(velocity, dtype=pd)
    geo_f, geo_i = kernels.make_geo_arrays(geom, pd)
    geo_g, _ = kernels.make_geo_arrays(geom, fields.dtype)
    sc = kernels.kernel_scalars(species, dt, c, pd)
    xs = np.array([pos[0]])
    ys = np.array([pos[1]])
    zs = np.array([pos[2]])
    us = np.array([vel[0]])
    vs = np.array([vel[1]])
    ws = np.array([vel[2]])
    scratch = np.empty(6, dtype=pd)
    status = kernels.push_span(xs, ys, zs, us, vs, ws, 0, 1,
                               fields.E, fields.B, geo_f, geo_g, geo_i,
                               sc["dt"], sc["dth"], sc["qdt2m"], sc["beta"],
                               sc["one"], species.mover_iters, 0,
                               _mixed_flag(pd, fields.dtype), scratch)
    if status == kernels.ERR_MIDPOINT:
        raise IntegrityError("mover midpoint not mappable into the domain")
    return (np.array([xs[0], ys[0], zs[0]]), np.array([us[0], vs[0], ws[0]]))


def push_buffer(buf, fields, species, dt, geom, c=1.0, apply_bc=False):
    """Unfused mover pass over a whole particle buffer (in place)."""
    if buf.n == 0:
        return buf
    pd = buf.dtype.type
    geo_f, geo_i = kernels.make_geo_arrays(geom, pd)
    geo_g, _ = kernels.make_geo_arrays(geom, fields.dtype)
    sc = kernels.kernel_scalars(species, dt, c, pd)
    scratch = np.empty(6, dtype=pd)
    status = kernels.push_span(buf.x, buf.y, buf.z, buf.u, buf.v, buf.w,
                               0, buf.n, fields.E, fields.B, geo_f, geo_g,
                               geo_i, sc["dt"], sc["dth"], sc["qdt2m"],
                               sc["beta"], sc["one"], species.mover_iters,
                               1 if apply_bc else 0,
                               _mixed_flag(pd, fields.dtype), scratch)
    if status == kernels.ERR_RUNAWAY:
        raise IntegrityError("runaway particle (moved a full box length)")
    if status == kernels.ERR_MIDPOINT:
        raise IntegrityError("mover midpoint not mappable into the domain")
    return buf


def deposit_moments(position, velocity, q_p, moments, geom):
    """Scatter one particle's charge/current/pressure onto its 8 nodes,
    each contribution divided by the node control volume."""
    _check_inside(position, geom)
    pos = np.asarray(position)
    if pos.dtype.kind != "f":
        pos = pos.astype(np.float64)
    pd = pos.dtype.type
    vel = np.asarray(velocity, dtype=pd)
    fd = moments._float_dtype
    geo_g, geo_i = kernels.make_geo_arrays(geom, fd)
    invvol = geom.inv_node_volume(fd)
    kernels.deposit_span(np.array([pos[0]]), np.array([pos[1]]), np.array([pos[2]]),
                         np.array([vel[0]]), np.array([vel[1]]), np.array([vel[2]]),
                         np.array([pd(q_p)]), 0, 1, moments.acc, invvol,
                         geo_g, geo_i, fd(1.0), fd(MOMENT_SCALE))
    return moments


def deposit_buffer(buf, moments, geom, invvol=None):
    """Unfused deposition pass over a whole buffer."""
    if buf.n == 0:
        return moments
    fd = moments._float_dtype
    geo_g, geo_i = kernels.make_geo_arrays(geom, fd)
    if invvol is None:
        invvol = geom.inv_node_volume(fd)
    kernels.deposit_span(buf.x, buf.y, buf.z, buf.u, buf.v, buf.w, buf.q_p,
                         0, buf.n, moments.acc, invvol, geo_g, geo_i,
                         fd(1.0), fd(MOMENT_SCALE))
    return moments


def move_and_deposit_batch(span, buf, fields, moments, species, dt, geom,
                           c=1.0, invvol=None, scratch=None):
    """Fused pass over one batch span: push, boundary-map, deposit.

    Bitwise equivalent to moving the span, applying boundaries, then
    depositing the span (the kernels share their formula blocks).
    """
    start, count = span
    if count == 0:
        return moments
    if start < 0 or start + count > buf.n:
        raise IndexError(f"span {span} outside buffer of {buf.n}")
    pd = buf.dtype.type
    fd = fields.dtype.type
    geo_f, geo_i = kernels.make_geo_arrays(geom, pd)
    geo_g, _ = kernels.make_geo_arrays(geom, fd)
    sc = kernels.kernel_scalars(species, dt, c, pd)
    if invvol is None:
        invvol = geom.inv_node_volume(fd)
    if scratch is None:
        scratch = np.empty(6, dtype=pd)
    status = kernels.fused_span(
        buf.x, buf.y, buf.z, buf.u, buf.v, buf.w, buf.q_p,
        start, count, fields.E, fields.B, moments.acc, invvol,
        geo_f, geo_g, geo_i, sc["dt"], sc["dth"], sc["qdt2m"], sc["beta"],
        sc["one"], species.mover_iters, fd(MOMENT_SCALE),
        _mixed_flag(pd, fields.dtype), scratch)
    if status == kernels.ERR_RUNAWAY:
        raise IntegrityError("runaway particle (moved a full box length)")
    if status == kernels.ERR_MIDPOINT:
        raise IntegrityError("mover midpoint not mappable into the domain")
    return moments
