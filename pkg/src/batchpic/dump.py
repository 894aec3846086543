"""Field dumps, diagnostics CSV, and the run manifest.

Field dumps use the legacy structured-points text layout readable by
standard scientific viewers: a version header, title, ASCII marker,
node-count dimensions, origin and spacing, then named scalar/vector
blocks with x varying fastest.  Doubles print with 15 significant digits,
singles with 8, so a round trip recovers values to printed precision.
"""

from __future__ import annotations

import csv
import hashlib
import json
import subprocess
from pathlib import Path

import numpy as np

from .errors import IntegrityError

__version__ = "0.1.0"


def _fmt(precision):
    return "%.15g" if precision == "double" else "%.8g"


def write_field_dump(path, geom, scalars=None, vectors=None,
                     title="batchpic fields", precision="double"):
    """Write named node arrays as a legacy structured-points text file."""
    scalars = scalars or {}
    vectors = vectors or {}
    n_nodes = geom.n_nodes
    fmt = _fmt(precision)
    lines = [
        "# vtk DataFile Version 3.0",
        title,
        "ASCII",
        "DATASET STRUCTURED_POINTS",
        f"DIMENSIONS {geom.nx + 1} {geom.ny + 1} {geom.nz + 1}",
        f"ORIGIN {geom.origin[0]!r} {geom.origin[1]!r} {geom.origin[2]!r}",
        f"SPACING {geom.dx!r} {geom.dy!r} {geom.dz!r}",
        f"POINT_DATA {n_nodes}",
    ]
    for name, arr in scalars.items():
        arr = np.asarray(arr)
        if arr.shape != geom.node_shape:
            raise ValueError(f"scalar {name!r} extents {arr.shape} != nodes")
        lines.append(f"SCALARS {name} double 1")
        lines.append("LOOKUP_TABLE default")
        flat = arr.transpose(2, 1, 0).ravel()  # x fastest
        lines.extend(fmt % v for v in flat)
    for name, arr in vectors.items():
        arr = np.asarray(arr)
        if arr.shape != (3,) + geom.node_shape:
            raise ValueError(f"vector {name!r} extents {arr.shape} != (3, nodes)")
        lines.append(f"VECTORS {name} double")
        comp = [arr[c].transpose(2, 1, 0).ravel() for c in range(3)]
        lines.extend(
            f"{fmt % comp[0][i]} {fmt % comp[1][i]} {fmt % comp[2][i]}"
            for i in range(n_nodes))
    Path(path).write_text("\n".join(lines) + "\n")
    return path


def read_field_dump(path):
    """Parse a structured-points dump back into arrays.

    Returns (meta, fields) where meta has dimensions/origin/spacing and
    fields maps block name to a node array (scalars (nx+1,ny+1,nz+1),
    vectors (3,...)).
    """
    lines = Path(path).read_text().splitlines()
    if not lines or not lines[0].startswith("# vtk DataFile"):
        raise IntegrityError(f"{path}: not a structured-points dump")
    if lines[2].strip() != "ASCII":
        raise IntegrityError(f"{path}: only ASCII dumps are supported")
    if lines[3].strip() != "DATASET STRUCTURED_POINTS":
        raise IntegrityError(f"{path}: unexpected dataset type")
    dims = tuple(int(v) for v in lines[4].split()[1:4])
    origin = tuple(float(v) for v in lines[5].split()[1:4])
    spacing = tuple(float(v) for v in lines[6].split()[1:4])
    n_nodes = int(lines[7].split()[1])
    meta = {"dimensions": dims, "origin": origin, "spacing": spacing,
            "title": lines[1].strip()}

    fields = {}
    i = 8
    while i < len(lines):
        header = lines[i].split()
        if not header:
            i += 1
            continue
        if header[0] == "SCALARS":
            name = header[1]
            i += 2  # skip LOOKUP_TABLE
            vals = np.array([float(v) for v in lines[i:i + n_nodes]])
            i += n_nodes
            fields[name] = vals.reshape(dims[2], dims[1], dims[0]).transpose(2, 1, 0)
        elif header[0] == "VECTORS":
            name = header[1]
            i += 1
            rows = np.array([[float(v) for v in lines[i + r].split()]
                             for r in range(n_nodes)])
            i += n_nodes
            arr = np.stack([
                rows[:, c].reshape(dims[2], dims[1], dims[0]).transpose(2, 1, 0)
                for c in range(3)])
            fields[name] = arr
        else:
            raise IntegrityError(f"{path}: unexpected block header {header[0]!r}")
    return meta, fields


class DiagWriter:
    """Append-style diagnostics CSV with a fixed column schema."""

    def __init__(self, path, n_species):
        self.path = Path(path)
        self.n_species = n_species
        cols = ["cycle", "t", "mpa_s", "mover_interp_seconds",
                "field_solve_seconds", "gmres_iters", "cg_iters",
                "field_energy"]
        cols += [f"kinetic_energy_{s}" for s in range(n_species)]
        cols += ["div_residual", "recon_flux", "handoff_seconds"]
        self.columns = cols
        with open(self.path, "w", newline="") as fh:
            csv.writer(fh).writerow(cols)

    def write_row(self, report, ledger, dt, recon_flux=0.0):
        row = [report.cycle, (report.cycle + 1) * dt, f"{report.mpa_s:.6f}",
               f"{report.mover_interp_seconds:.6f}",
               f"{report.field_solve_seconds:.6f}",
               report.gmres_iters, report.cg_iters,
               f"{ledger.field_energy:.16e}"]
        row += [f"{k:.16e}" for k in ledger.kinetic_energy]
        row += [f"{report.div_residual:.6e}", f"{recon_flux:.8e}",
                f"{report.handoff_seconds:.6f}"]
        with open(self.path, "a", newline="") as fh:
            csv.writer(fh).writerow(row)


def deck_sha256(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def version_string():
    """git-describe when available, falling back to the package version."""
    try:
        out = subprocess.run(["git", "describe", "--always", "--dirty"],
                             capture_output=True, text=True, timeout=5,
                             cwd=Path(__file__).parent)
        if out.returncode == 0 and out.stdout.strip():
            return f"{__version__}+{out.stdout.strip()}"
    except (OSError, subprocess.TimeoutExpired):
        pass
    return __version__


def write_manifest(path, deck, deck_path=None, seed=None):
    """Machine-readable record sufficient to reproduce a run bit-exactly."""
    manifest = {
        "version": version_string(),
        "deck_file": str(deck_path) if deck_path else None,
        "deck_sha256": deck_sha256(deck_path) if deck_path else None,
        "seed": deck.init.seed if seed is None else seed,
        "precision_mode": deck.precision.label,
        "grid": list(deck.geom.counts),
        "species": [s.name for s in deck.species],
        "total_particles": deck.total_particles(),
        "batches": deck.batches,
        "groups": deck.groups,
        "workers": deck.resolved_workers(),
        "sort_period": deck.sort_period,
    }
    Path(path).write_text(json.dumps(manifest, indent=2) + "\n")
    return manifest
