"""Magnetic-reconnection initial condition: Harris sheet plus flux
perturbation, with two current-carrying and two background species.

The current sheet is normal to y.  In normalized units (charge magnitude
1, ion mass 1, peak density n0 = 1/4pi so the reference ion plasma
frequency is 1) the asymptotic field b0 sets the Alfven speed, and the
sheet drifts follow from Ampere's law split by species temperature.
"""

from __future__ import annotations

import numpy as np

from .errors import ConfigurationError
from .fields import FieldGrid, sync_periodic
from .particles import init_maxwellian

SHEET_ELECTRON, SHEET_ION, BG_ELECTRON, BG_ION = 0, 1, 2, 3


def _validate_species(species):
    if len(species) != 4:
        raise ConfigurationError(
            f"reconnection setup needs exactly 4 species (sheet e/i, "
            f"background e/i), got {len(species)}")
    signs = [np.sign(s.charge) for s in species]
    if signs != [-1.0, 1.0, -1.0, 1.0]:
        raise ConfigurationError(
            "species order must be sheet electrons, sheet ions, background "
            "electrons, background ions (charges -, +, -, +)")


def harris_bx(y, b0, y_center, thickness):
    return b0 * np.tanh((y - y_center) / thickness)


def perturbation_b(x, y, psi0, Lx, Ly, y_center):
    """Curl of the flux function psi0 cos(2 pi x / Lx) cos(pi (y-yc) / Ly)."""
    carg = 2.0 * np.pi * x / Lx
    sarg = np.pi * (y - y_center) / Ly
    dbx = -psi0 * (np.pi / Ly) * np.cos(carg) * np.sin(sarg)
    dby = psi0 * (2.0 * np.pi / Lx) * np.sin(carg) * np.cos(sarg)
    return dbx, dby


def sheet_drifts(species, init, c):
    """Out-of-plane drift of the two sheet species from current balance.

    The full sheet current c b0 / (4 pi thickness) is split between ions
    and electrons in proportion to their temperatures (T = m vth_z^2).
    """
    t_e = species[SHEET_ELECTRON].mass * species[SHEET_ELECTRON].vth[2] ** 2
    t_i = species[SHEET_ION].mass * species[SHEET_ION].vth[2] ** 2
    if t_e <= 0.0 or t_i <= 0.0:
        raise ConfigurationError("sheet species need nonzero thermal velocity")
    e = abs(species[SHEET_ION].charge)
    jz = -c * init.b0 / (4.0 * np.pi * init.sheet_thickness)
    dv = jz / (init.n0 * e)  # u_i - u_e
    u_i = dv * t_i / (t_i + t_e)
    u_e = -dv * t_e / (t_i + t_e)
    return u_e, u_i


def init_gem(deck, seed=None):
    """Build the four particle buffers and the initial field grid.

    Sheet species load with density ``n0 sech^2((y-yc)/thickness)`` and the
    current-balance drift; background species load uniform at
    ``background_fraction * n0`` with no drift.  B carries the tanh profile
    plus the standard flux perturbation; E starts at zero.
    """
    _validate_species(deck.species)
    init = deck.init
    geom = deck.geom
    seed = deck.init.seed if seed is None else seed
    yc = geom.origin[1] + 0.5 * geom.Ly
    lam = init.sheet_thickness

    u_e, u_i = sheet_drifts(deck.species, init, deck.c)

    def sheet_density(x, y, z):
        return init.n0 / np.cosh((y - yc) / lam) ** 2

    def bg_density(x, y, z):
        return np.full_like(np.asarray(y, dtype=np.float64),
                            init.background_fraction * init.n0)

    buffers = []
    for s in deck.species:
        if s.species_id == SHEET_ELECTRON:
            buf = init_maxwellian(s, geom, density_fn=sheet_density, seed=seed,
                                  precision=deck.precision,
                                  drift=(0.0, 0.0, u_e))
        elif s.species_id == SHEET_ION:
            buf = init_maxwellian(s, geom, density_fn=sheet_density, seed=seed,
                                  precision=deck.precision,
                                  drift=(0.0, 0.0, u_i))
        else:
            buf = init_maxwellian(s, geom, density_fn=bg_density, seed=seed,
                                  precision=deck.precision,
                                  drift=(0.0, 0.0, 0.0))
        buffers.append(buf)

    fields = FieldGrid.zeros(geom, deck.precision)
    x = geom.node_coords(0)
    y = geom.node_coords(1)
    X, Y = np.meshgrid(x, y, indexing="ij")
    bx = harris_bx(Y, init.b0, yc, lam)
    dbx, dby = perturbation_b(X, Y, init.perturbation * init.b0,
                              geom.Lx, geom.Ly, yc)
    fields.B[0] = ((bx + dbx)[:, :, None]).astype(fields.dtype)
    fields.B[1] = (dby[:, :, None]).astype(fields.dtype)
    sync_periodic(fields.B, geom)
    fields.check_finite()
    return buffers, fields
