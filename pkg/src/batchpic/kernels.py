"""Compiled particle kernels: fused move + moment-deposit, and the
unfused building blocks behind the per-particle API.

Precision model
---------------
Every arithmetic step runs in the dtype of its operands, so one kernel
source serves the three precision modes:

* double - particle and field arrays float64, everything float64;
* single - both float32; gather sums and mover algebra stay float32;
* mixed  - float32 particles against float64 fields: gather products
  promote to float64 and the field sample is rounded once (through the
  caller's scratch buffer) before the velocity update, which then runs in
  float32.

Float literals never appear in particle-precision expressions (numba
would promote them to float64); callers pass ``one`` pre-cast and derived
constants are built from it.

Determinism model
-----------------
Moment deposition quantizes each contribution onto a fixed-point lattice
(``fields.MOMENT_SCALE``) and accumulates in int64.  Integer addition is
associative and commutative, so deposited grids are bit-identical under
every batch split, worker schedule, and particle ordering.

``fused_span`` repeats the formula blocks of ``push_span`` and
``deposit_span`` verbatim instead of calling them: the call overhead
halves throughput, and without fastmath identical expression sequences
round identically, so the fused and two-pass routes stay bitwise equal.
The mover/deposition tests pin that equality; edit the blocks in
lockstep.

Kernels report failures through status codes (raising from nogil code is
avoided): 0 ok, 1 runaway particle, 2 unmappable gather midpoint.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from .fields import MOMENT_SCALE

OK = 0
ERR_RUNAWAY = 1
ERR_MIDPOINT = 2

# geometry packs share one layout: dx dy dz ox oy oz Lx Ly Lz.  geo_f is
# in particle precision (boundary wraps), geo_g in field precision (cell
# location and weights).  geo_i (int64): nx ny nz bcx bcy bcz with
# bc 0 = periodic, 1 = reflecting.
BC_PERIODIC = 0
BC_REFLECTING = 1


def make_geo_arrays(geom, dtype):
    """Pack geometry into kernel-friendly arrays of the requested dtype."""
    geo_f = np.array(
        [geom.dx, geom.dy, geom.dz,
         geom.origin[0], geom.origin[1], geom.origin[2],
         geom.Lx, geom.Ly, geom.Lz],
        dtype=dtype,
    )
    bc = [BC_PERIODIC if k == "periodic" else BC_REFLECTING for k in geom.bc]
    geo_i = np.array([geom.nx, geom.ny, geom.nz] + bc, dtype=np.int64)
    return geo_f, geo_i


def kernel_scalars(species, dt, c, particle_dtype):
    """Per-species scalar arguments pre-cast to the particle dtype."""
    pd = particle_dtype
    return {
        "dt": pd(dt),
        "dth": pd(dt / 2.0),
        "qdt2m": pd(species.qom * dt / 2.0),
        "beta": pd(species.qom * dt / (2.0 * c)),
        "one": pd(1.0),
    }


@njit(cache=True, nogil=True)
def push_span(xs, ys, zs, us, vs, ws, start, count, E, B, geo_f, geo_g,
              geo_i, dt, dth, qdt2m, beta, one, n_iters, apply_bc, mixed,
              scratch):
    """Implicit mover over a span: iterated midpoint gather, rotation, drift.

    With ``apply_bc`` the updated position is folded back into the box and
    the normal velocity flipped at reflecting walls.  ``mixed`` routes the
    gathered sample through ``scratch`` so it is rounded to particle
    precision exactly once before the velocity algebra.
    """
    ox = geo_f[3]
    oy = geo_f[4]
    oz = geo_f[5]
    Lx = geo_f[6]
    Ly = geo_f[7]
    Lz = geo_f[8]
    gdx = geo_g[0]
    gdy = geo_g[1]
    gdz = geo_g[2]
    gox = geo_g[3]
    goy = geo_g[4]
    goz = geo_g[5]
    nx = geo_i[0]
    ny = geo_i[1]
    nz = geo_i[2]
    bcx = geo_i[3]
    bcy = geo_i[4]
    bcz = geo_i[5]
    worst = OK
    for p in range(start, start + count):
        xp = xs[p]
        yp = ys[p]
        zp = zs[p]
        vnx = us[p]
        vny = vs[p]
        vnz = ws[p]
        vbx = vnx
        vby = vny
        vbz = vnz
        status = OK
        # --- push block: keep in bitwise lockstep with fused_span ---
        for _ in range(n_iters):
            xm = xp + vbx * dth
            ym = yp + vby * dth
            zm = zp + vbz * dth
            if bcx == BC_PERIODIC:
                if xm < ox:
                    xm = xm + Lx
                elif xm > ox + Lx:
                    xm = xm - Lx
            else:
                if xm < ox:
                    xm = ox + (ox - xm)
                elif xm > ox + Lx:
                    xm = (ox + Lx) + (ox + Lx) - xm
            if bcy == BC_PERIODIC:
                if ym < oy:
                    ym = ym + Ly
                elif ym > oy + Ly:
                    ym = ym - Ly
            else:
                if ym < oy:
                    ym = oy + (oy - ym)
                elif ym > oy + Ly:
                    ym = (oy + Ly) + (oy + Ly) - ym
            if bcz == BC_PERIODIC:
                if zm < oz:
                    zm = zm + Lz
                elif zm > oz + Lz:
                    zm = zm - Lz
            else:
                if zm < oz:
                    zm = oz + (oz - zm)
                elif zm > oz + Lz:
                    zm = (oz + Lz) + (oz + Lz) - zm
            if (xm < ox or xm > ox + Lx or ym < oy or ym > oy + Ly
                    or zm < oz or zm > oz + Lz):
                status = ERR_MIDPOINT
                break
            gx = (xm - gox) / gdx
            gy = (ym - goy) / gdy
            gz = (zm - goz) / gdz
            i = int(gx)
            j = int(gy)
            k = int(gz)
            if i > nx - 1:
                i = nx - 1
            if j > ny - 1:
                j = ny - 1
            if k > nz - 1:
                k = nz - 1
            fx = gx - i
            fy = gy - j
            fz = gz - k
            ax = one - fx
            ay = one - fy
            az = one - fz
            w000 = ax * ay * az
            w100 = fx * ay * az
            w010 = ax * fy * az
            w110 = fx * fy * az
            w001 = ax * ay * fz
            w101 = fx * ay * fz
            w011 = ax * fy * fz
            w111 = fx * fy * fz
            i1 = i + 1
            j1 = j + 1
            k1 = k + 1
            epx = (w000 * E[0, i, j, k] + w100 * E[0, i1, j, k]
                   + w010 * E[0, i, j1, k] + w110 * E[0, i1, j1, k]
                   + w001 * E[0, i, j, k1] + w101 * E[0, i1, j, k1]
                   + w011 * E[0, i, j1, k1] + w111 * E[0, i1, j1, k1])
            epy = (w000 * E[1, i, j, k] + w100 * E[1, i1, j, k]
                   + w010 * E[1, i, j1, k] + w110 * E[1, i1, j1, k]
                   + w001 * E[1, i, j, k1] + w101 * E[1, i1, j, k1]
                   + w011 * E[1, i, j1, k1] + w111 * E[1, i1, j1, k1])
            epz = (w000 * E[2, i, j, k] + w100 * E[2, i1, j, k]
                   + w010 * E[2, i, j1, k] + w110 * E[2, i1, j1, k]
                   + w001 * E[2, i, j, k1] + w101 * E[2, i1, j, k1]
                   + w011 * E[2, i, j1, k1] + w111 * E[2, i1, j1, k1])
            bpx = (w000 * B[0, i, j, k] + w100 * B[0, i1, j, k]
                   + w010 * B[0, i, j1, k] + w110 * B[0, i1, j1, k]
                   + w001 * B[0, i, j, k1] + w101 * B[0, i1, j, k1]
                   + w011 * B[0, i, j1, k1] + w111 * B[0, i1, j1, k1])
            bpy = (w000 * B[1, i, j, k] + w100 * B[1, i1, j, k]
                   + w010 * B[1, i, j1, k] + w110 * B[1, i1, j1, k]
                   + w001 * B[1, i, j, k1] + w101 * B[1, i1, j, k1]
                   + w011 * B[1, i, j1, k1] + w111 * B[1, i1, j1, k1])
            bpz = (w000 * B[2, i, j, k] + w100 * B[2, i1, j, k]
                   + w010 * B[2, i, j1, k] + w110 * B[2, i1, j1, k]
                   + w001 * B[2, i, j, k1] + w101 * B[2, i1, j, k1]
                   + w011 * B[2, i, j1, k1] + w111 * B[2, i1, j1, k1])
            if mixed:
                scratch[0] = epx
                scratch[1] = epy
                scratch[2] = epz
                scratch[3] = bpx
                scratch[4] = bpy
                scratch[5] = bpz
                tx = vnx + qdt2m * scratch[0]
                ty = vny + qdt2m * scratch[1]
                tz = vnz + qdt2m * scratch[2]
                hx = scratch[3]
                hy = scratch[4]
                hz = scratch[5]
            else:
                tx = vnx + qdt2m * epx
                ty = vny + qdt2m * epy
                tz = vnz + qdt2m * epz
                hx = bpx
                hy = bpy
                hz = bpz
            bsq = hx * hx + hy * hy + hz * hz
            denom = one + beta * beta * bsq
            tdb = tx * hx + ty * hy + tz * hz
            vbx = (tx + beta * ((ty * hz - tz * hy) + beta * tdb * hx)) / denom
            vby = (ty + beta * ((tz * hx - tx * hz) + beta * tdb * hy)) / denom
            vbz = (tz + beta * ((tx * hy - ty * hx) + beta * tdb * hz)) / denom
        if status != OK:
            if status > worst:
                worst = status
            continue
        xp = xp + vbx * dt
        yp = yp + vby * dt
        zp = zp + vbz * dt
        two = one + one
        vnx = two * vbx - vnx
        vny = two * vby - vny
        vnz = two * vbz - vnz
        if apply_bc:
            if bcx == BC_PERIODIC:
                if xp < ox:
                    xp = xp + Lx
                    if xp >= ox + Lx:  # wrap rounded onto the top edge
                        xp = ox
                elif xp >= ox + Lx:
                    xp = xp - Lx
            else:
                if xp < ox:
                    xp = ox + (ox - xp)
                    vnx = -vnx
                elif xp > ox + Lx:
                    xp = (ox + Lx) + (ox + Lx) - xp
                    vnx = -vnx
            if bcy == BC_PERIODIC:
                if yp < oy:
                    yp = yp + Ly
                    if yp >= oy + Ly:  # wrap rounded onto the top edge
                        yp = oy
                elif yp >= oy + Ly:
                    yp = yp - Ly
            else:
                if yp < oy:
                    yp = oy + (oy - yp)
                    vny = -vny
                elif yp > oy + Ly:
                    yp = (oy + Ly) + (oy + Ly) - yp
                    vny = -vny
            if bcz == BC_PERIODIC:
                if zp < oz:
                    zp = zp + Lz
                    if zp >= oz + Lz:  # wrap rounded onto the top edge
                        zp = oz
                elif zp >= oz + Lz:
                    zp = zp - Lz
            else:
                if zp < oz:
                    zp = oz + (oz - zp)
                    vnz = -vnz
                elif zp > oz + Lz:
                    zp = (oz + Lz) + (oz + Lz) - zp
                    vnz = -vnz
            if (xp < ox or xp > ox + Lx or yp < oy or yp > oy + Ly
                    or zp < oz or zp > oz + Lz):
                if ERR_RUNAWAY > worst:
                    worst = ERR_RUNAWAY
                continue
        # --- end push block ---
        xs[p] = xp
        ys[p] = yp
        zs[p] = zp
        us[p] = vnx
        vs[p] = vny
        ws[p] = vnz
    return worst


@njit(cache=True, nogil=True)
def deposit_span(xs, ys, zs, us, vs, ws, qs, start, count, acc, invvol,
                 geo_g, geo_i, one, scale):
    """Scatter charge/current/pressure of a span onto the node grid.

    Each of the ten contributions is divided by the node control volume,
    quantized to the fixed-point lattice, and accumulated in int64.
    """
    gdx = geo_g[0]
    gdy = geo_g[1]
    gdz = geo_g[2]
    gox = geo_g[3]
    goy = geo_g[4]
    goz = geo_g[5]
    nx = geo_i[0]
    ny = geo_i[1]
    nz = geo_i[2]
    for p in range(start, start + count):
        # --- deposit block: keep in bitwise lockstep with fused_span ---
        xp = xs[p]
        yp = ys[p]
        zp = zs[p]
        vnx = us[p]
        vny = vs[p]
        vnz = ws[p]
        gx = (xp - gox) / gdx
        gy = (yp - goy) / gdy
        gz = (zp - goz) / gdz
        i = int(gx)
        j = int(gy)
        k = int(gz)
        if i > nx - 1:
            i = nx - 1
        if j > ny - 1:
            j = ny - 1
        if k > nz - 1:
            k = nz - 1
        fx = gx - i
        fy = gy - j
        fz = gz - k
        ax = one - fx
        ay = one - fy
        az = one - fz
        q = qs[p]
        pxx = vnx * vnx
        pxy = vnx * vny
        pxz = vnx * vnz
        pyy = vny * vny
        pyz = vny * vnz
        pzz = vnz * vnz
        for c in range(8):
            ci = c & 1
            cj = (c >> 1) & 1
            ck = (c >> 2) & 1
            ii = i + ci
            jj = j + cj
            kk = k + ck
            wx = fx if ci else ax
            wy = fy if cj else ay
            wz = fz if ck else az
            base = q * (wx * wy * wz) * invvol[ii, jj, kk]
            acc[0, ii, jj, kk] += np.int64(np.rint(base * scale))
            acc[1, ii, jj, kk] += np.int64(np.rint(base * vnx * scale))
            acc[2, ii, jj, kk] += np.int64(np.rint(base * vny * scale))
            acc[3, ii, jj, kk] += np.int64(np.rint(base * vnz * scale))
            acc[4, ii, jj, kk] += np.int64(np.rint(base * pxx * scale))
            acc[5, ii, jj, kk] += np.int64(np.rint(base * pxy * scale))
            acc[6, ii, jj, kk] += np.int64(np.rint(base * pxz * scale))
            acc[7, ii, jj, kk] += np.int64(np.rint(base * pyy * scale))
            acc[8, ii, jj, kk] += np.int64(np.rint(base * pyz * scale))
            acc[9, ii, jj, kk] += np.int64(np.rint(base * pzz * scale))
        # --- end deposit block ---
    return OK


@njit(cache=True)
def gather_span(xs, ys, zs, start, count, E, B, geo_g, geo_i, one, out):
    """Field samples at already-in-domain points; one row of ``out`` per
    particle, rounded once into the particle dtype."""
    gdx = geo_g[0]
    gdy = geo_g[1]
    gdz = geo_g[2]
    gox = geo_g[3]
    goy = geo_g[4]
    goz = geo_g[5]
    nx = geo_i[0]
    ny = geo_i[1]
    nz = geo_i[2]
    for p in range(start, start + count):
        xm = xs[p]
        ym = ys[p]
        zm = zs[p]
        gx = (xm - gox) / gdx
        gy = (ym - goy) / gdy
        gz = (zm - goz) / gdz
        i = int(gx)
        j = int(gy)
        k = int(gz)
        if i > nx - 1:
            i = nx - 1
        if j > ny - 1:
            j = ny - 1
        if k > nz - 1:
            k = nz - 1
        fx = gx - i
        fy = gy - j
        fz = gz - k
        ax = one - fx
        ay = one - fy
        az = one - fz
        w000 = ax * ay * az
        w100 = fx * ay * az
        w010 = ax * fy * az
        w110 = fx * fy * az
        w001 = ax * ay * fz
        w101 = fx * ay * fz
        w011 = ax * fy * fz
        w111 = fx * fy * fz
        i1 = i + 1
        j1 = j + 1
        k1 = k + 1
        out[p - start, 0] = (w000 * E[0, i, j, k] + w100 * E[0, i1, j, k]
                             + w010 * E[0, i, j1, k] + w110 * E[0, i1, j1, k]
                             + w001 * E[0, i, j, k1] + w101 * E[0, i1, j, k1]
                             + w011 * E[0, i, j1, k1] + w111 * E[0, i1, j1, k1])
        out[p - start, 1] = (w000 * E[1, i, j, k] + w100 * E[1, i1, j, k]
                             + w010 * E[1, i, j1, k] + w110 * E[1, i1, j1, k]
                             + w001 * E[1, i, j, k1] + w101 * E[1, i1, j, k1]
                             + w011 * E[1, i, j1, k1] + w111 * E[1, i1, j1, k1])
        out[p - start, 2] = (w000 * E[2, i, j, k] + w100 * E[2, i1, j, k]
                             + w010 * E[2, i, j1, k] + w110 * E[2, i1, j1, k]
                             + w001 * E[2, i, j, k1] + w101 * E[2, i1, j, k1]
                             + w011 * E[2, i, j1, k1] + w111 * E[2, i1, j1, k1])
        out[p - start, 3] = (w000 * B[0, i, j, k] + w100 * B[0, i1, j, k]
                             + w010 * B[0, i, j1, k] + w110 * B[0, i1, j1, k]
                             + w001 * B[0, i, j, k1] + w101 * B[0, i1, j, k1]
                             + w011 * B[0, i, j1, k1] + w111 * B[0, i1, j1, k1])
        out[p - start, 4] = (w000 * B[1, i, j, k] + w100 * B[1, i1, j, k]
                             + w010 * B[1, i, j1, k] + w110 * B[1, i1, j1, k]
                             + w001 * B[1, i, j, k1] + w101 * B[1, i1, j, k1]
                             + w011 * B[1, i, j1, k1] + w111 * B[1, i1, j1, k1])
        out[p - start, 5] = (w000 * B[2, i, j, k] + w100 * B[2, i1, j, k]
                             + w010 * B[2, i, j1, k] + w110 * B[2, i1, j1, k]
                             + w001 * B[2, i, j, k1] + w101 * B[2, i1, j, k1]
                             + w011 * B[2, i, j1, k1] + w111 * B[2, i1, j1, k1])
    return OK


@njit(cache=True, nogil=True)
def fused_span(xs, ys, zs, us, vs, ws, qs, start, count, E, B, acc, invvol,
               geo_f, geo_g, geo_i, dt, dth, qdt2m, beta, one, n_iters,
               scale, mixed, scratch):
    """Fused mover + interpolation over one batch span.

    Once a particle's position is updated it is immediately deposited at
    the new position with the new velocity.  The push and deposit blocks
    are verbatim copies of ``push_span`` / ``deposit_span`` (see module
    docstring), so the fused pass matches the two-pass route bitwise.
    """
    ox = geo_f[3]
    oy = geo_f[4]
    oz = geo_f[5]
    Lx = geo_f[6]
    Ly = geo_f[7]
    Lz = geo_f[8]
    gdx = geo_g[0]
    gdy = geo_g[1]
    gdz = geo_g[2]
    gox = geo_g[3]
    goy = geo_g[4]
    goz = geo_g[5]
    nx = geo_i[0]
    ny = geo_i[1]
    nz = geo_i[2]
    bcx = geo_i[3]
    bcy = geo_i[4]
    bcz = geo_i[5]
    apply_bc = 1
    worst = OK
    for p in range(start, start + count):
        xp = xs[p]
        yp = ys[p]
        zp = zs[p]
        vnx = us[p]
        vny = vs[p]
        vnz = ws[p]
        vbx = vnx
        vby = vny
        vbz = vnz
        status = OK
        # --- push block: keep in bitwise lockstep with fused_span ---
        for _ in range(n_iters):
            xm = xp + vbx * dth
            ym = yp + vby * dth
            zm = zp + vbz * dth
            if bcx == BC_PERIODIC:
                if xm < ox:
                    xm = xm + Lx
                elif xm > ox + Lx:
                    xm = xm - Lx
            else:
                if xm < ox:
                    xm = ox + (ox - xm)
                elif xm > ox + Lx:
                    xm = (ox + Lx) + (ox + Lx) - xm
            if bcy == BC_PERIODIC:
                if ym < oy:
                    ym = ym + Ly
                elif ym > oy + Ly:
                    ym = ym - Ly
            else:
                if ym < oy:
                    ym = oy + (oy - ym)
                elif ym > oy + Ly:
                    ym = (oy + Ly) + (oy + Ly) - ym
            if bcz == BC_PERIODIC:
                if zm < oz:
                    zm = zm + Lz
                elif zm > oz + Lz:
                    zm = zm - Lz
            else:
                if zm < oz:
                    zm = oz + (oz - zm)
                elif zm > oz + Lz:
                    zm = (oz + Lz) + (oz + Lz) - zm
            if (xm < ox or xm > ox + Lx or ym < oy or ym > oy + Ly
                    or zm < oz or zm > oz + Lz):
                status = ERR_MIDPOINT
                break
            gx = (xm - gox) / gdx
            gy = (ym - goy) / gdy
            gz = (zm - goz) / gdz
            i = int(gx)
            j = int(gy)
            k = int(gz)
            if i > nx - 1:
                i = nx - 1
            if j > ny - 1:
                j = ny - 1
            if k > nz - 1:
                k = nz - 1
            fx = gx - i
            fy = gy - j
            fz = gz - k
            ax = one - fx
            ay = one - fy
            az = one - fz
            w000 = ax * ay * az
            w100 = fx * ay * az
            w010 = ax * fy * az
            w110 = fx * fy * az
            w001 = ax * ay * fz
            w101 = fx * ay * fz
            w011 = ax * fy * fz
            w111 = fx * fy * fz
            i1 = i + 1
            j1 = j + 1
            k1 = k + 1
            epx = (w000 * E[0, i, j, k] + w100 * E[0, i1, j, k]
                   + w010 * E[0, i, j1, k] + w110 * E[0, i1, j1, k]
                   + w001 * E[0, i, j, k1] + w101 * E[0, i1, j, k1]
                   + w011 * E[0, i, j1, k1] + w111 * E[0, i1, j1, k1])
            epy = (w000 * E[1, i, j, k] + w100 * E[1, i1, j, k]
                   + w010 * E[1, i, j1, k] + w110 * E[1, i1, j1, k]
                   + w001 * E[1, i, j, k1] + w101 * E[1, i1, j, k1]
                   + w011 * E[1, i, j1, k1] + w111 * E[1, i1, j1, k1])
            epz = (w000 * E[2, i, j, k] + w100 * E[2, i1, j, k]
                   + w010 * E[2, i, j1, k] + w110 * E[2, i1, j1, k]
                   + w001 * E[2, i, j, k1] + w101 * E[2, i1, j, k1]
                   + w011 * E[2, i, j1, k1] + w111 * E[2, i1, j1, k1])
            bpx = (w000 * B[0, i, j, k] + w100 * B[0, i1, j, k]
                   + w010 * B[0, i, j1, k] + w110 * B[0, i1, j1, k]
                   + w001 * B[0, i, j, k1] + w101 * B[0, i1, j, k1]
                   + w011 * B[0, i, j1, k1] + w111 * B[0, i1, j1, k1])
            bpy = (w000 * B[1, i, j, k] + w100 * B[1, i1, j, k]
                   + w010 * B[1, i, j1, k] + w110 * B[1, i1, j1, k]
                   + w001 * B[1, i, j, k1] + w101 * B[1, i1, j, k1]
                   + w011 * B[1, i, j1, k1] + w111 * B[1, i1, j1, k1])
            bpz = (w000 * B[2, i, j, k] + w100 * B[2, i1, j, k]
                   + w010 * B[2, i, j1, k] + w110 * B[2, i1, j1, k]
                   + w001 * B[2, i, j, k1] + w101 * B[2, i1, j, k1]
                   + w011 * B[2, i, j1, k1] + w111 * B[2, i1, j1, k1])
            if mixed:
                scratch[0] = epx
                scratch[1] = epy
                scratch[2] = epz
                scratch[3] = bpx
                scratch[4] = bpy
                scratch[5] = bpz
                tx = vnx + qdt2m * scratch[0]
                ty = vny + qdt2m * scratch[1]
                tz = vnz + qdt2m * scratch[2]
                hx = scratch[3]
                hy = scratch[4]
                hz = scratch[5]
            else:
                tx = vnx + qdt2m * epx
                ty = vny + qdt2m * epy
                tz = vnz + qdt2m * epz
                hx = bpx
                hy = bpy
                hz = bpz
            bsq = hx * hx + hy * hy + hz * hz
            denom = one + beta * beta * bsq
            tdb = tx * hx + ty * hy + tz * hz
            vbx = (tx + beta * ((ty * hz - tz * hy) + beta * tdb * hx)) / denom
            vby = (ty + beta * ((tz * hx - tx * hz) + beta * tdb * hy)) / denom
            vbz = (tz + beta * ((tx * hy - ty * hx) + beta * tdb * hz)) / denom
        if status != OK:
            if status > worst:
                worst = status
            continue
        xp = xp + vbx * dt
        yp = yp + vby * dt
        zp = zp + vbz * dt
        two = one + one
        vnx = two * vbx - vnx
        vny = two * vby - vny
        vnz = two * vbz - vnz
        if apply_bc:
            if bcx == BC_PERIODIC:
                if xp < ox:
                    xp = xp + Lx
                    if xp >= ox + Lx:  # wrap rounded onto the top edge
                        xp = ox
                elif xp >= ox + Lx:
                    xp = xp - Lx
            else:
                if xp < ox:
                    xp = ox + (ox - xp)
                    vnx = -vnx
                elif xp > ox + Lx:
                    xp = (ox + Lx) + (ox + Lx) - xp
                    vnx = -vnx
            if bcy == BC_PERIODIC:
                if yp < oy:
                    yp = yp + Ly
                    if yp >= oy + Ly:  # wrap rounded onto the top edge
                        yp = oy
                elif yp >= oy + Ly:
                    yp = yp - Ly
            else:
                if yp < oy:
                    yp = oy + (oy - yp)
                    vny = -vny
                elif yp > oy + Ly:
                    yp = (oy + Ly) + (oy + Ly) - yp
                    vny = -vny
            if bcz == BC_PERIODIC:
                if zp < oz:
                    zp = zp + Lz
                    if zp >= oz + Lz:  # wrap rounded onto the top edge
                        zp = oz
                elif zp >= oz + Lz:
                    zp = zp - Lz
            else:
                if zp < oz:
                    zp = oz + (oz - zp)
                    vnz = -vnz
                elif zp > oz + Lz:
                    zp = (oz + Lz) + (oz + Lz) - zp
                    vnz = -vnz
            if (xp < ox or xp > ox + Lx or yp < oy or yp > oy + Ly
                    or zp < oz or zp > oz + Lz):
                if ERR_RUNAWAY > worst:
                    worst = ERR_RUNAWAY
                continue
        xs[p] = xp
        ys[p] = yp
        zs[p] = zp
        us[p] = vnx
        vs[p] = vny
        ws[p] = vnz
        xp = xs[p]
        yp = ys[p]
        zp = zs[p]
        vnx = us[p]
        vny = vs[p]
        vnz = ws[p]
        gx = (xp - gox) / gdx
        gy = (yp - goy) / gdy
        gz = (zp - goz) / gdz
        i = int(gx)
        j = int(gy)
        k = int(gz)
        if i > nx - 1:
            i = nx - 1
        if j > ny - 1:
            j = ny - 1
        if k > nz - 1:
            k = nz - 1
        fx = gx - i
        fy = gy - j
        fz = gz - k
        ax = one - fx
        ay = one - fy
        az = one - fz
        q = qs[p]
        pxx = vnx * vnx
        pxy = vnx * vny
        pxz = vnx * vnz
        pyy = vny * vny
        pyz = vny * vnz
        pzz = vnz * vnz
        for c in range(8):
            ci = c & 1
            cj = (c >> 1) & 1
            ck = (c >> 2) & 1
            ii = i + ci
            jj = j + cj
            kk = k + ck
            wx = fx if ci else ax
            wy = fy if cj else ay
            wz = fz if ck else az
            base = q * (wx * wy * wz) * invvol[ii, jj, kk]
            acc[0, ii, jj, kk] += np.int64(np.rint(base * scale))
            acc[1, ii, jj, kk] += np.int64(np.rint(base * vnx * scale))
            acc[2, ii, jj, kk] += np.int64(np.rint(base * vny * scale))
            acc[3, ii, jj, kk] += np.int64(np.rint(base * vnz * scale))
            acc[4, ii, jj, kk] += np.int64(np.rint(base * pxx * scale))
            acc[5, ii, jj, kk] += np.int64(np.rint(base * pxy * scale))
            acc[6, ii, jj, kk] += np.int64(np.rint(base * pxz * scale))
            acc[7, ii, jj, kk] += np.int64(np.rint(base * pyy * scale))
            acc[8, ii, jj, kk] += np.int64(np.rint(base * pyz * scale))
            acc[9, ii, jj, kk] += np.int64(np.rint(base * pzz * scale))
    return worst
