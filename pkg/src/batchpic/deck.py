"""Plain-text sectioned key=value run decks.

Sections: [grid], [time], [species.N], [pipeline], [precision], [output],
[init].  Unknown keys are rejected (typo safety) and every deck invariant
is revalidated after parsing.  ``write_deck`` emits the canonical form with
all defaults materialized, so parse(write(parse(f))) == parse(f).
"""

from __future__ import annotations

import re
from pathlib import Path

from .config import (InitConfig, OutputConfig, PrecisionMode, SimulationDeck,
                     SpeciesParams)
from .errors import ConfigurationError, DeckParseError
from .geometry import GridGeometry

_SECTION_RE = re.compile(r"^\[([a-z0-9_.]+)\]$")

_GRID_KEYS = {"nx", "ny", "nz", "lx", "ly", "lz",
              "origin_x", "origin_y", "origin_z", "bc_x", "bc_y", "bc_z"}
_TIME_KEYS = {"dt", "cycles", "c", "theta", "susceptibility", "clean_period"}
_SPECIES_KEYS = {"name", "charge", "mass", "ppc",
                 "drift_x", "drift_y", "drift_z",
                 "vth_x", "vth_y", "vth_z", "mover_iters"}
_PIPELINE_KEYS = {"batches", "groups", "workers", "sort_period",
                  "memory_budget_mb"}
_PRECISION_KEYS = {"particles", "fields"}
_OUTPUT_KEYS = {"dir", "cadence", "dump_fields", "dump_moments", "diag"}
_INIT_KEYS = {"kind", "seed", "n0", "b0", "sheet_thickness", "perturbation",
              "background_fraction"}

_MANDATORY = {
    "grid": {"nx", "ny", "nz", "lx", "ly", "lz"},
    "time": {"dt", "cycles"},
    "species": {"charge", "mass", "ppc"},
}


def _parse_lines(path):
    """Raw pass: {section: {key: (value, line_no)}} with duplicate checks."""
    sections = {}
    current = None
    text = Path(path).read_text()
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = _SECTION_RE.match(line)
        if m:
            current = m.group(1)
            if current in sections:
                raise DeckParseError(f"duplicate section [{current}]",
                                     path, line_no)
            sections[current] = {}
            continue
        if "=" not in line:
            raise DeckParseError(f"expected key = value, got {line!r}",
                                 path, line_no)
        if current is None:
            raise DeckParseError("key outside any [section]", path, line_no)
        key, val = (part.strip() for part in line.split("=", 1))
        if key in sections[current]:
            raise DeckParseError(f"duplicate key {key!r} in [{current}]",
                                 path, line_no)
        sections[current][key] = (val, line_no)
    return sections


class _Section:
    def __init__(self, name, data, path, allowed):
        self.name = name
        self.data = data
        self.path = path
        for key, (_, line_no) in data.items():
            if key not in allowed:
                raise DeckParseError(f"unknown key {key!r} in [{name}]",
                                     path, line_no)

    def _get(self, key, cast, default):
        if key not in self.data:
            if default is _REQUIRED:
                raise DeckParseError(
                    f"missing mandatory key [{self.name}].{key}", self.path)
            return default
        val, line_no = self.data[key]
        try:
            return cast(val)
        except (ValueError, ConfigurationError) as exc:
            raise DeckParseError(
                f"[{self.name}].{key}: {exc}", self.path, line_no) from exc

    def get_int(self, key, default=None):
        return self._get(key, int, default)

    def get_float(self, key, default=None):
        return self._get(key, float, default)

    def get_str(self, key, default=None):
        return self._get(key, str, default)

    def get_bool(self, key, default=None):
        def cast(v):
            lv = v.lower()
            if lv in ("true", "yes", "on", "1"):
                return True
            if lv in ("false", "no", "off", "0"):
                return False
            raise ValueError(f"expected a boolean, got {v!r}")
        return self._get(key, cast, default)


class _Required:
    pass


_REQUIRED = _Required()


def parse_deck(path, overrides=None):
    """Parse and validate a deck file into a :class:`SimulationDeck`.

    ``overrides`` is an optional list of ``section.key=value`` strings
    applied on top of the file before validation (the CLI's ``--set``).
    """
    sections = _parse_lines(path)
    for ov in overrides or []:
        if "=" not in ov or "." not in ov.split("=", 1)[0]:
            raise DeckParseError(f"override must be section.key=value: {ov!r}",
                                 path)
        target, val = (s.strip() for s in ov.split("=", 1))
        sec, key = target.rsplit(".", 1)
        sections.setdefault(sec, {})[key] = (val, None)

    known = {"grid", "time", "pipeline", "precision", "output", "init"}
    species_secs = {}
    for name in sections:
        if name in known:
            continue
        m = re.fullmatch(r"species\.(\d+)", name)
        if not m:
            raise DeckParseError(f"unknown section [{name}]", path)
        species_secs[int(m.group(1))] = name
    if not species_secs:
        raise DeckParseError("no [species.N] sections found", path)
    expected = set(range(len(species_secs)))
    if set(species_secs) != expected:
        raise DeckParseError(
            f"species sections must be contiguous 0..{len(species_secs)-1}, "
            f"got {sorted(species_secs)}", path)
    for sec in ("grid", "time"):
        if sec not in sections:
            raise DeckParseError(f"missing mandatory section [{sec}]", path)

    try:
        g = _Section("grid", sections["grid"], path, _GRID_KEYS)
        geom = GridGeometry.from_box(
            counts=(g.get_int("nx", _REQUIRED), g.get_int("ny", _REQUIRED),
                    g.get_int("nz", _REQUIRED)),
            lengths=(g.get_float("lx", _REQUIRED), g.get_float("ly", _REQUIRED),
                     g.get_float("lz", _REQUIRED)),
            origin=(g.get_float("origin_x", 0.0), g.get_float("origin_y", 0.0),
                    g.get_float("origin_z", 0.0)),
            bc=(g.get_str("bc_x", "periodic"), g.get_str("bc_y", "periodic"),
                g.get_str("bc_z", "periodic")),
        )

        species = []
        for sid in range(len(species_secs)):
            s = _Section(species_secs[sid], sections[species_secs[sid]], path,
                         _SPECIES_KEYS)
            species.append(SpeciesParams(
                species_id=sid,
                charge=s.get_float("charge", _REQUIRED),
                mass=s.get_float("mass", _REQUIRED),
                ppc=s.get_int("ppc", _REQUIRED),
                drift=(s.get_float("drift_x", 0.0), s.get_float("drift_y", 0.0),
                       s.get_float("drift_z", 0.0)),
                vth=(s.get_float("vth_x", 0.0), s.get_float("vth_y", 0.0),
                     s.get_float("vth_z", 0.0)),
                mover_iters=s.get_int("mover_iters", 3),
                name=s.get_str("name", f"species{sid}"),
            ))

        t = _Section("time", sections["time"], path, _TIME_KEYS)
        p = _Section("pipeline", sections.get("pipeline", {}), path,
                     _PIPELINE_KEYS)
        pr = _Section("precision", sections.get("precision", {}), path,
                      _PRECISION_KEYS)
        o = _Section("output", sections.get("output", {}), path, _OUTPUT_KEYS)
        ini = _Section("init", sections.get("init", {}), path, _INIT_KEYS)

        budget_mb = p.get_float("memory_budget_mb", 0.0)
        deck = SimulationDeck(
            geom=geom,
            species=tuple(species),
            dt=t.get_float("dt", _REQUIRED),
            n_cycles=t.get_int("cycles", _REQUIRED),
            c=t.get_float("c", 1.0),
            theta=t.get_float("theta", 0.5),
            susceptibility=t.get_bool("susceptibility", True),
            clean_period=t.get_int("clean_period", 1),
            batches=p.get_int("batches", 16),
            groups=p.get_int("groups", 1),
            workers=p.get_int("workers", 0),
            sort_period=p.get_int("sort_period", 10),
            memory_budget=int(budget_mb * 1024 * 1024),
            precision=PrecisionMode(particles=pr.get_str("particles", "double"),
                                    fields=pr.get_str("fields", "double")),
            output=OutputConfig(
                directory=o.get_str("dir", "out"),
                cadence=o.get_int("cadence", 100),
                dump_fields=o.get_bool("dump_fields", True),
                dump_moments=o.get_bool("dump_moments", True),
                diag_name=o.get_str("diag", "diag.csv"),
            ),
            init=InitConfig(
                kind=ini.get_str("kind", "uniform"),
                seed=ini.get_int("seed", 1),
                n0=ini.get_float("n0", 1.0),
                b0=ini.get_float("b0", 0.0097),
                sheet_thickness=ini.get_float("sheet_thickness", 0.5),
                perturbation=ini.get_float("perturbation", 0.1),
                background_fraction=ini.get_float("background_fraction", 0.2),
            ),
        )
    except ConfigurationError as exc:
        raise DeckParseError(str(exc), path) from exc
    return deck


def _f(v):
    """Full-precision float literal (numpy scalars print as plain floats)."""
    return repr(float(v))


def write_deck(deck, path):
    """Emit the canonical deck text for a validated configuration."""
    g = deck.geom
    lines = [
        "[grid]",
        f"nx = {g.nx}", f"ny = {g.ny}", f"nz = {g.nz}",
        f"lx = {_f(g.Lx)}", f"ly = {_f(g.Ly)}", f"lz = {_f(g.Lz)}",
        f"origin_x = {_f(g.origin[0])}", f"origin_y = {_f(g.origin[1])}",
        f"origin_z = {_f(g.origin[2])}",
        f"bc_x = {g.bc[0]}", f"bc_y = {g.bc[1]}", f"bc_z = {g.bc[2]}",
        "",
        "[time]",
        f"dt = {_f(deck.dt)}", f"cycles = {deck.n_cycles}", f"c = {_f(deck.c)}",
        f"theta = {_f(deck.theta)}",
        f"susceptibility = {str(deck.susceptibility).lower()}",
        f"clean_period = {deck.clean_period}",
        "",
    ]
    for s in deck.species:
        lines += [
            f"[species.{s.species_id}]",
            f"name = {s.name}",
            f"charge = {_f(s.charge)}", f"mass = {_f(s.mass)}", f"ppc = {s.ppc}",
            f"drift_x = {_f(s.drift[0])}", f"drift_y = {_f(s.drift[1])}",
            f"drift_z = {_f(s.drift[2])}",
            f"vth_x = {_f(s.vth[0])}", f"vth_y = {_f(s.vth[1])}",
            f"vth_z = {_f(s.vth[2])}",
            f"mover_iters = {s.mover_iters}",
            "",
        ]
    lines += [
        "[pipeline]",
        f"batches = {deck.batches}", f"groups = {deck.groups}",
        f"workers = {deck.workers}", f"sort_period = {deck.sort_period}",
        f"memory_budget_mb = {_f(deck.memory_budget / 1024 / 1024)}",
        "",
        "[precision]",
        f"particles = {deck.precision.particles}",
        f"fields = {deck.precision.fields}",
        "",
        "[output]",
        f"dir = {deck.output.directory}",
        f"cadence = {deck.output.cadence}",
        f"dump_fields = {str(deck.output.dump_fields).lower()}",
        f"dump_moments = {str(deck.output.dump_moments).lower()}",
        f"diag = {deck.output.diag_name}",
        "",
        "[init]",
        f"kind = {deck.init.kind}",
        f"seed = {deck.init.seed}",
        f"n0 = {_f(deck.init.n0)}",
        f"b0 = {_f(deck.init.b0)}",
        f"sheet_thickness = {_f(deck.init.sheet_thickness)}",
        f"perturbation = {_f(deck.init.perturbation)}",
        f"background_fraction = {_f(deck.init.background_fraction)}",
        "",
    ]
    Path(path).write_text("\n".join(lines))
    return path
