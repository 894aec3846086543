"""Precision plumbing, cross-run error norms, and physics diagnostics.

All reductions accumulate in float64 regardless of storage precision, so
precision studies compare storage/compute rounding only, not accumulation
artifacts.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fields import unique_view

EIGHT_PI = 8.0 * np.pi


@dataclass
class EnergyLedger:
    cycle: int
    field_energy: float
    kinetic_energy: tuple[float, ...]

    @property
    def total(self):
        return self.field_energy + sum(self.kinetic_energy)


def cast_boundary(values, from_precision, to_precision):
    """Round-to-nearest conversion at a particle/field precision hand-off."""
    arr = np.asarray(values)
    target = np.float32 if to_precision == "single" else np.float64
    if arr.dtype == target:
        return arr
    return arr.astype(target)


def grid_error_norm(a, b):
    """L2 norm of the pointwise difference plus the absolute error map.

    Inputs are compared in float64; extents must agree.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    diff = np.abs(a - b)
    return float(np.sqrt(np.sum(diff * diff))), diff


def field_energy(fields, geom):
    """Sum of (|E|^2 + |B|^2) V / 8 pi over unique nodes, float64."""
    E = unique_view(fields.E, geom).astype(np.float64, copy=False)
    B = unique_view(fields.B, geom).astype(np.float64, copy=False)
    w = unique_view(geom.node_weights()[None], geom)[0]
    dens = (E * E).sum(axis=0) + (B * B).sum(axis=0)
    return float(np.sum(dens * w)) * geom.cell_volume / EIGHT_PI


def kinetic_energy(buf, species):
    """Sum of m |v|^2 / 2 over a species' macro-particles, float64.

    The macro mass follows from the macro charge through the physical
    charge-to-mass ratio.
    """
    if buf.n == 0:
        return 0.0
    u = buf.u.astype(np.float64, copy=False)
    v = buf.v.astype(np.float64, copy=False)
    w = buf.w.astype(np.float64, copy=False)
    m_p = buf.q_p.astype(np.float64, copy=False) / species.qom
    return 0.5 * float(np.sum(m_p * (u * u + v * v + w * w)))


def energy_ledger(cycle, fields, buffers, species_list, geom):
    """Field plus per-species kinetic energy at a cycle barrier."""
    kin = tuple(kinetic_energy(buf, sp) for buf, sp in zip(buffers, species_list))
    return EnergyLedger(cycle=cycle, field_energy=field_energy(fields, geom),
                        kinetic_energy=kin)


def reconnected_flux(fields, geom):
    """In-plane flux proxy: mean |B_y| on the midplane of the sheet normal.

    Report-only trend quantity for reconnection runs; starts near the
    perturbation level and grows as field lines reconnect.
    """
    By = fields.B[1].astype(np.float64, copy=False)
    jmid = geom.ny // 2
    sheet = unique_view(np.abs(By)[None], geom)[0][:, jmid, :]
    return float(sheet.mean()) * geom.Lx
