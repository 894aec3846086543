import numpy as np
import pytest

import batchpic
from batchpic.deck import parse_deck, write_deck
from batchpic.errors import DeckParseError


def test_parse_full_deck_values():
    deck = parse_deck(batchpic.bundled_deck("gem_full"))
    assert deck.geom.counts == (128, 64, 64)
    assert deck.n_species == 4
    assert all(s.ppc == 125 for s in deck.species)
    assert deck.total_particles() == 262_144_000  # about 2.6e8
    assert deck.species[1].mass / deck.species[0].mass == pytest.approx(64.0)
    assert deck.dt == 0.25


def test_parse_desk_deck_values():
    deck = parse_deck(batchpic.bundled_deck("gem_desk"))
    assert deck.geom.counts == (32, 16, 16)
    assert all(s.ppc == 27 for s in deck.species)
    assert deck.n_species == 4
    # 32 * 16 * 16 cells x 27 ppc x 4 species
    assert deck.total_particles() == 32 * 16 * 16 * 27 * 4 == 884_736
    assert deck.batches == 16
    assert deck.sort_period == 10
    assert deck.theta == 0.5


def test_parse_error_names_key(tmp_path):
    deck_text = """
[grid]
nx = 4
ny = 4
nz = 4
lx = 4.0
ly = 4.0
lz = 4.0

[time]
dt = 0.1
cycles = 1

[species.0]
charge = -1.0
mass = 1.0
ppc = 1

[pipeline]
batches = 0
"""
    p = tmp_path / "bad.deck"
    p.write_text(deck_text)
    with pytest.raises(DeckParseError) as err:
        parse_deck(p)
    assert "batches" in str(err.value)


def test_unknown_key_rejected(tmp_path):
    p = tmp_path / "typo.deck"
    p.write_text("""
[grid]
nx = 4
ny = 4
nz = 4
lx = 4.0
ly = 4.0
lz = 4.0
dx = 1.0

[time]
dt = 0.1
cycles = 1

[species.0]
charge = -1.0
mass = 1.0
ppc = 1
""")
    with pytest.raises(DeckParseError) as err:
        parse_deck(p)
    assert "dx" in str(err.value)
    assert ":9" in str(err.value)  # line number of the offending key


def test_missing_mandatory_key(tmp_path):
    p = tmp_path / "missing.deck"
    p.write_text("""
[grid]
nx = 4
ny = 4
nz = 4
lx = 4.0
ly = 4.0

[time]
dt = 0.1
cycles = 1

[species.0]
charge = -1.0
mass = 1.0
ppc = 1
""")
    with pytest.raises(DeckParseError) as err:
        parse_deck(p)
    assert "lz" in str(err.value)


def test_type_mismatch_has_line(tmp_path):
    p = tmp_path / "badtype.deck"
    p.write_text("""
[grid]
nx = four
ny = 4
nz = 4
lx = 4.0
ly = 4.0
lz = 4.0

[time]
dt = 0.1
cycles = 1

[species.0]
charge = -1.0
mass = 1.0
ppc = 1
""")
    with pytest.raises(DeckParseError) as err:
        parse_deck(p)
    assert ":3" in str(err.value)


def test_species_sections_contiguous(tmp_path):
    p = tmp_path / "gap.deck"
    p.write_text("""
[grid]
nx = 4
ny = 4
nz = 4
lx = 4.0
ly = 4.0
lz = 4.0

[time]
dt = 0.1
cycles = 1

[species.0]
charge = -1.0
mass = 1.0
ppc = 1

[species.2]
charge = 1.0
mass = 1.0
ppc = 1
""")
    with pytest.raises(DeckParseError):
        parse_deck(p)


def test_mixed_precision_invariant(tmp_path):
    p = tmp_path / "mixedbad.deck"
    p.write_text("""
[grid]
nx = 4
ny = 4
nz = 4
lx = 4.0
ly = 4.0
lz = 4.0

[time]
dt = 0.1
cycles = 1

[species.0]
charge = -1.0
mass = 1.0
ppc = 1

[precision]
particles = double
fields = single
""")
    with pytest.raises(DeckParseError):
        parse_deck(p)


def test_roundtrip_identity(tmp_path):
    src = batchpic.bundled_deck("gem_desk")
    deck1 = parse_deck(src)
    out = tmp_path / "rewritten.deck"
    write_deck(deck1, out)
    deck2 = parse_deck(out)
    assert deck1 == deck2


def test_overrides_applied():
    deck = parse_deck(batchpic.bundled_deck("gem_desk"),
                      overrides=["pipeline.batches=3", "time.cycles=7",
                                 "precision.particles=single"])
    assert deck.batches == 3
    assert deck.n_cycles == 7
    assert deck.precision.label == "mixed"


def test_bad_override_rejected():
    with pytest.raises(DeckParseError):
        parse_deck(batchpic.bundled_deck("gem_desk"), overrides=["nonsense"])
