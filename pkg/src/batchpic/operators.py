"""Discrete differential operators on the node grid.

Second-order central differences everywhere; periodic axes wrap through
the duplicated plane, reflecting axes mirror the stencil arm so the
centered derivative vanishes at the wall.  ``laplacian`` is literally
``divergence(gradient(...))`` - the divergence-cleaning update relies on
that composition holding bitwise.
"""

from __future__ import annotations

import numpy as np

from .geometry import axis_neighbors


def _check_extents(arr, geom):
    if arr.shape[-3:] != geom.node_shape:
        raise ValueError(f"array extents {arr.shape[-3:]} != node shape {geom.node_shape}")


def axis_derivative(F, axis, geom):
    """Centered derivative of one scalar node array along ``axis``."""
    _check_extents(F, geom)
    lo, hi = axis_neighbors(geom, axis)
    d = geom.spacings[axis]
    ax = F.ndim - 3 + axis
    return (np.take(F, hi, axis=ax) - np.take(F, lo, axis=ax)) / (2.0 * d)


def gradient(phi, geom):
    """(d/dx, d/dy, d/dz) of a scalar node array, stacked on axis 0."""
    _check_extents(phi, geom)
    return np.stack([axis_derivative(phi, a, geom) for a in range(3)])


def divergence(F, geom):
    """Divergence of a 3-component node field (shape (3, nodes...))."""
    if F.shape[0] != 3:
        raise ValueError("divergence expects a 3-component field")
    _check_extents(F, geom)
    return (axis_derivative(F[0], 0, geom)
            + axis_derivative(F[1], 1, geom)
            + axis_derivative(F[2], 2, geom))


def curl(F, geom):
    """Curl of a 3-component node field."""
    if F.shape[0] != 3:
        raise ValueError("curl expects a 3-component field")
    _check_extents(F, geom)
    dFz_dy = axis_derivative(F[2], 1, geom)
    dFy_dz = axis_derivative(F[1], 2, geom)
    dFx_dz = axis_derivative(F[0], 2, geom)
    dFz_dx = axis_derivative(F[2], 0, geom)
    dFy_dx = axis_derivative(F[1], 0, geom)
    dFx_dy = axis_derivative(F[0], 1, geom)
    return np.stack([dFz_dy - dFy_dz, dFx_dz - dFz_dx, dFy_dx - dFx_dy])


def laplacian(phi, geom):
    """Discrete Laplacian, enforced as the composition div(grad(phi))."""
    return divergence(gradient(phi, geom), geom)
