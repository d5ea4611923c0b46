import sqlite3

import pytest
from hypothesis import given, settings, strategies as st

from nyonscope.forge import auto_waypoints, emit_tree, forge_case, forge_odometer_rollback, forge_trip
from nyonscope.forge.case import EBIKE_TABLES, MAX_RETAINED_TRIPS, distance_m
from nyonscope.forge.image import tree_files
from nyonscope.forge.tamper import TamperError, find_ebike_db
from nyonscope.chronicle import haversine


def _rows(db):
    con = sqlite3.connect(db)
    try:
        out = {}
        for (table,) in con.execute("SELECT name FROM sqlite_master WHERE type='table'"):
            cols = ["rowid"] + [r[1] for r in con.execute(f'PRAGMA table_info("{table}")')]
            out[table] = {tuple(r) for r in con.execute(f'SELECT rowid, * FROM "{table}"')}, cols
        return out
    finally:
        con.close()


@pytest.mark.parametrize("generation", ["gen1", "gen2"])
def test_emit_is_byte_deterministic(tmp_path, generation):
    a, ma = emit_tree(forge_case(5, generation), tmp_path / "a")
    b, mb = emit_tree(forge_case(5, generation), tmp_path / "b")
    assert tree_files(a) == tree_files(b)
    assert ma == mb


def test_seeds_differ():
    assert forge_case(1, "gen1").user != forge_case(2, "gen1").user


def test_gen1_populates_seven_ebike_tables(gen1_tree):
    case, root, _ = gen1_tree
    assert len(case.ebike_tables) == 7 and set(case.ebike_tables) == set(EBIKE_TABLES)
    tables = _rows(find_ebike_db(root))
    for t in EBIKE_TABLES:
        assert tables[t][0], f"{t} empty"
    assert forge_case(1, "gen2").ebike_tables == ()


def test_gen2_retains_last_hundred_trips(tmp_path):
    case = forge_case(0, "gen2", trips=MAX_RETAINED_TRIPS + 3, points_per_trip=2)
    assert case.trips_generated == 103 and len(case.trips) == 100
    _, manifest = emit_tree(case, tmp_path)
    assert manifest["counts"]["trips_retained"] == 100


def test_argument_validation():
    with pytest.raises(ValueError):
        forge_case(0, "gen1", trips=-1)
    with pytest.raises(ValueError):
        forge_case(0, "gen1", points_per_trip=0)


@settings(max_examples=50, deadline=None)
@given(a=st.tuples(st.floats(-80, 80), st.floats(-179, 179)), b=st.tuples(st.floats(-80, 80), st.floats(-179, 179)))
def test_forge_distance_agrees_with_chronicle(a, b):
    assert distance_m(*a, *b) == pytest.approx(haversine(*a, *b), rel=1e-9, abs=1e-6)


@pytest.mark.parametrize("mode", ["plausible", "reversed", "duplicate"])
def test_tamper_diff_equals_row_set_difference(gen1_tree, mode):
    _, root, _ = gen1_tree
    db = find_ebike_db(root)
    before = _rows(db)
    diff = forge_trip(root, auto_waypoints(root, 4, seed=1), mode)
    after = _rows(db)
    for table in after:
        added = after[table][0] - before[table][0]
        cols = after[table][1]
        listed = {tuple(r[c] for c in cols) for r in diff["inserted"].get(table, [])}
        assert added == listed, table
    assert len(diff["inserted"]["Localization"]) == 4 and len(diff["inserted"]["Activities"]) == 1


def test_tamper_timestamps(gen1_tree):
    _, root, _ = gen1_tree
    db = find_ebike_db(root)
    con = sqlite3.connect(db)
    last = con.execute("SELECT MAX(TimeStamp) FROM Localization").fetchone()[0]
    con.close()
    rev = forge_trip(root, auto_waypoints(root, 3), "reversed")
    stamps = [r["TimeStamp"] for r in rev["inserted"]["Localization"]]
    assert stamps == sorted(stamps, reverse=True) and stamps[0] < last


def test_empty_waypoints_is_noop(gen1_tree):
    _, root, _ = gen1_tree
    before = tree_files(root)
    diff = forge_trip(root, [], "plausible")
    assert diff["inserted"] == {"Localization": [], "Activities": []}
    assert tree_files(root) == before


def test_bad_mode_and_missing_db(tmp_path, gen1_tree):
    _, root, _ = gen1_tree
    with pytest.raises(ValueError):
        forge_trip(root, [(48.0, 9.0)], "sideways")
    with pytest.raises(TamperError):
        forge_trip(tmp_path / "nowhere", [(48.0, 9.0)])


def test_odometer_rollback(gen1_tree):
    _, root, _ = gen1_tree
    diff = forge_odometer_rollback(root, 500)
    con = sqlite3.connect(find_ebike_db(root))
    top = con.execute("SELECT MAX(Odometer) FROM DriveUnit").fetchone()[0]
    con.close()
    row = diff["inserted"]["DriveUnit"][0]
    assert row["Odometer"] == pytest.approx(top - 500, abs=0.1)


@pytest.mark.parametrize("generation", ["gen1", "gen2"])
def test_single_point_trips_round_trip(tmp_path, generation):
    from nyonscope.artifacts import assemble_bundle
    from nyonscope.artifacts.records import canonical_json

    root, manifest = emit_tree(forge_case(31, generation, trips=3, points_per_trip=1), tmp_path)
    assert canonical_json(assemble_bundle(root).to_dict()) == canonical_json(manifest["expected_bundle"])
