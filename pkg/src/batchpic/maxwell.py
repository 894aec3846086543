"""Implicit field advance and Poisson divergence cleaning.

The electric field is advanced by solving the theta-scheme curl-curl
system with matrix-free GMRES,

    E' + (c theta dt)^2 curl(curl(E')) = E^n + c theta dt (curl(B^n) - 4 pi J / c),

after which ``E^{n+1} = (E' - (1-theta) E^n) / theta`` and
``B^{n+1} = B^n - c dt curl(E')``.  The pressure tensor rides along in the
moment interface but the default operator does not use it.

Divergence cleaning solves ``lap(phi) = div(E) - 4 pi rho`` with CG and
subtracts ``grad(phi)``.  Because ``lap`` is enforced to be the composition
``div o grad``, its wide stencil has a small nullspace beyond constants
(per-axis parity modes on even periodic extents, and wall rows where the
mirrored stencil zeroes out).  The right-hand side is projected onto the
solvable subspace first; what the projection removes is physically
uncorrectable by a gradient and shows up in the reported residual.

All solves run in float64 regardless of storage precision; results are
rounded back into the grid's dtype.
"""

from __future__ import annotations

import numpy as np

from .errors import SolverFailure
from .fields import FieldGrid, sync_periodic, unique_view
from .geometry import PERIODIC, REFLECTING
from .krylov import cg_solve, gmres_solve
from .operators import curl, divergence, gradient, laplacian

FOUR_PI = 4.0 * np.pi


# ---------------------------------------------------------------------------
# packing between full node arrays (with duplicate periodic planes) and the
# flat unique-node vectors the Krylov solvers iterate on


def _unique_slices(geom):
    return tuple(
        slice(0, n if kind == PERIODIC else n + 1)
        for n, kind in zip(geom.counts, geom.bc)
    )


def pack_scalar(full, geom):
    return full[_unique_slices(geom)].ravel().astype(np.float64, copy=True)


def unpack_scalar(vec, geom):
    full = np.zeros(geom.node_shape, np.float64)
    full[_unique_slices(geom)] = vec.reshape(geom.unique_shape)
    sync_periodic(full, geom)
    return full


def pack_vector(full3, geom):
    sl = (slice(None),) + _unique_slices(geom)
    return full3[sl].reshape(3, -1).ravel().astype(np.float64, copy=True)


def unpack_vector(vec, geom):
    full = np.zeros((3,) + geom.node_shape, np.float64)
    sl = (slice(None),) + _unique_slices(geom)
    full[sl] = vec.reshape((3,) + geom.unique_shape)
    sync_periodic(full, geom)
    return full


# ---------------------------------------------------------------------------
# nullspace of the composed Laplacian on the unique grid


_null_cache = {}


def null_setup(geom):
    """Weights, wall mask, and an orthonormal nullspace basis for cleaning.

    Candidate null vectors are products of per-axis parity indicators
    (walls pinned to zero on reflecting axes); each candidate is verified
    against the actual operator and the survivors are orthonormalized under
    the volume-weighted inner product.
    """
    key = geom.key()
    if key in _null_cache:
        return _null_cache[key]

    ushape = geom.unique_shape
    w = unique_view(geom.node_weights(), geom).ravel().copy()

    wall = np.zeros(ushape, bool)
    for axis, kind in enumerate(geom.bc):
        if kind != REFLECTING:
            continue
        sl0 = [slice(None)] * 3
        sln = [slice(None)] * 3
        sl0[axis] = 0
        sln[axis] = geom.counts[axis]
        wall[tuple(sl0)] = True
        wall[tuple(sln)] = True
    wall_flat = wall.ravel()

    def op(vec):
        return pack_scalar(laplacian(unpack_scalar(vec, geom), geom), geom)

    axis_choices = []
    for axis in range(3):
        n = ushape[axis]
        idx = np.arange(n)
        ones = np.ones(n)
        even = (idx % 2 == 0).astype(float)
        odd = 1.0 - even
        axis_choices.append([ones, even, odd])

    basis = []
    for ax0 in axis_choices[0]:
        for ax1 in axis_choices[1]:
            for ax2 in axis_choices[2]:
                v = (ax0[:, None, None] * ax1[None, :, None]
                     * ax2[None, None, :]).ravel()
                v = v.copy()
                v[wall_flat] = 0.0
                nv = np.linalg.norm(v)
                if nv == 0.0:
                    continue
                v /= nv
                if np.linalg.norm(op(v)) > 1e-10:
                    continue
                # weighted modified Gram-Schmidt against accepted basis;
                # dependent candidates shrink to numerical zero and drop out
                for u in basis:
                    v = v - (np.dot(w * v, u) / np.dot(w * u, u)) * u
                nv = np.linalg.norm(v)
                if nv < 1e-8:
                    continue
                v /= nv
                basis.append(v)

    setup = (w, wall_flat, basis)
    _null_cache[key] = setup
    return setup


def project_solvable(vec, geom):
    """Project a flat unique-node RHS onto the cleaning operator's range."""
    w, wall_flat, basis = null_setup(geom)
    out = vec.copy()
    out[wall_flat] = 0.0
    for u in basis:
        out = out - (np.dot(w * out, u) / np.dot(w * u, u)) * u
    out[wall_flat] = 0.0
    return out


# ---------------------------------------------------------------------------
# field advance


def plasma_susceptibility(per_species_moments, species_list, dt, theta, geom):
    """Scalar implicit plasma response, (theta dt^2 / 2) sum of 4 pi rho q/m.

    This is the unmagnetized diagonal of the implicit-moment dielectric:
    each species' current responds to the new field through its half
    electric kick.  Used in delta form by :func:`maxwell_advance`, it
    removes the plasma-frequency and finite-grid stability limits that the
    bare curl-curl operator is subject to.  Deposition noise can push the
    product slightly negative on isolated nodes; it is clipped at zero.
    """
    chi = np.zeros(geom.node_shape, np.float64)
    for mom, sp in zip(per_species_moments, species_list):
        rho = mom.rho.astype(np.float64, copy=False)
        chi += FOUR_PI * rho * sp.qom
    np.clip(chi, 0.0, None, out=chi)
    chi *= 0.5 * theta * dt * dt
    return chi


def maxwell_advance(fields, moments, dt, theta, c, geom,
                    tol=1e-7, restart=20, max_iter=200, susceptibility=None):
    """One implicit Maxwell step from consolidated moments.

    With ``susceptibility`` (a node array ``chi``) the electric-field system
    is solved in delta form, ``(1 + chi) E' + (c theta dt)^2 curl curl E' =
    (1 + chi) E^n + ...``, which reduces exactly to the bare operator when
    ``chi`` is zero.  Returns the advanced :class:`FieldGrid` and the GMRES
    report; raises :class:`SolverFailure` when GMRES does not converge.
    """
    E0 = fields.E.astype(np.float64, copy=True)
    B0 = fields.B.astype(np.float64, copy=True)
    sync_periodic(E0, geom)
    sync_periodic(B0, geom)
    block = moments.to_float().astype(np.float64, copy=False)
    J = block[1:4]

    alpha = c * theta * dt
    rhs_full = E0 + alpha * (curl(B0, geom) - (FOUR_PI / c) * J)
    if susceptibility is not None:
        rhs_full = rhs_full + susceptibility[None] * E0
    b = pack_vector(rhs_full, geom)

    if susceptibility is None:
        def apply_op(vec):
            Ef = unpack_vector(vec, geom)
            out = Ef + (alpha * alpha) * curl(curl(Ef, geom), geom)
            return pack_vector(out, geom)
    else:
        def apply_op(vec):
            Ef = unpack_vector(vec, geom)
            out = (Ef + susceptibility[None] * Ef
                   + (alpha * alpha) * curl(curl(Ef, geom), geom))
            return pack_vector(out, geom)

    x0 = pack_vector(E0, geom)
    x, report = gmres_solve(apply_op, b, x0=x0, tol=tol, restart=restart,
                            max_iter=max_iter)
    if not report.converged:
        raise SolverFailure(
            f"field solve stalled at relative residual {report.residual:.3e}",
            report)

    Eth = unpack_vector(x, geom)
    E1 = (Eth - (1.0 - theta) * E0) / theta
    B1 = B0 - c * dt * curl(Eth, geom)
    sync_periodic(E1, geom)
    sync_periodic(B1, geom)

    dtype = fields.E.dtype
    out = FieldGrid(E=E1.astype(dtype), B=B1.astype(dtype),
                    precision=fields.precision)
    out.check_finite()
    return out, report


def div_residual(fields, rho, geom):
    """Plain L2 norm of ``div(E) - 4 pi rho`` over unique nodes."""
    E = fields.E.astype(np.float64, copy=False)
    r = divergence(E, geom) - FOUR_PI * rho.astype(np.float64, copy=False)
    return float(np.linalg.norm(unique_view(r, geom)))


def divergence_clean(fields, rho, geom, tol=1e-7, max_iter=500):
    """Correct E toward Gauss's law by subtracting a potential gradient.

    ``rho`` is the total charge density on nodes.  The CG system is the
    negated composed Laplacian (positive semi-definite) under the
    volume-weighted inner product; the RHS is first projected onto the
    solvable subspace (mean, parity modes, mirrored wall rows).
    """
    E0 = fields.E.astype(np.float64, copy=True)
    sync_periodic(E0, geom)
    rho64 = rho.astype(np.float64, copy=False)

    b_full = divergence(E0, geom) - FOUR_PI * rho64
    b = pack_scalar(b_full, geom)
    b_proj = project_solvable(b, geom)

    w, _, _ = null_setup(geom)

    def apply_op(vec):
        return -pack_scalar(laplacian(unpack_scalar(vec, geom), geom), geom)

    phi_vec, report = cg_solve(apply_op, -b_proj, tol=tol, max_iter=max_iter,
                               weight=w)
    if not report.converged:
        raise SolverFailure(
            f"divergence cleaning stalled at residual {report.residual:.3e}",
            report)

    phi = unpack_scalar(phi_vec, geom)
    E1 = E0 - gradient(phi, geom)
    sync_periodic(E1, geom)
    dtype = fields.E.dtype
    out = FieldGrid(E=E1.astype(dtype), B=fields.B.copy(),
                    precision=fields.precision)
    out.check_finite()
    return out, report
