import pytest
from hypothesis import given, settings, strategies as st

from nyonscope.artifacts import assemble_bundle
from nyonscope.artifacts.records import CaseBundle, ChartsSample, EBikeData, TrackPoint, TripRecord
from nyonscope.forge import auto_waypoints, emit_tree, forge_case, forge_odometer_rollback, forge_trip
from nyonscope.sentry import (
    MONOTONIC_TIME, ODOMETER, RULES, SPEED_PLAUSIBILITY, STEP25, SentryConfig, TamperFinding, run_checks,
)


def _charts(values):
    return CaseBundle(generation="gen1",
                      charts=[ChartsSample("u", v, row_id=i) for i, v in enumerate(values, 1)])


def test_step25_fires_once():
    findings = run_checks(_charts([66175, 66200, 66250]))
    assert [(f.rule, f.severity) for f in findings] == [(STEP25, "warn")]
    assert findings[0].threshold == {"charts_step": 25.0}
    assert "row 3" in findings[0].subject["locator"]


def test_step25_clean_sequence():
    assert run_checks(_charts([0, 25, 50, 75])) == []


def _trip(points, trip_id=1, odometer=None, start=None):
    return TripRecord(trip_id, start_ms=start, odometer_m=odometer,
                      points=[TrackPoint(la, lo, None, t, s, None, i) for i, (la, lo, t, s) in enumerate(points, 1)])


def test_monotonic_in_storage_order():
    b = CaseBundle(generation="gen2", trips=[_trip([(48, 9, 2000, None), (48, 9, 1000, None)])])
    assert [f.rule for f in run_checks(b)] == [MONOTONIC_TIME]


def test_speed_rules():
    fast = _trip([(48.0, 9.0, 0, None), (48.01, 9.0, 10_000, None)])         # ~111 m/s
    zero = _trip([(48.0, 9.0, 0, None), (48.0001, 9.0, 0, None)], 2)
    ratio = _trip([(48.0, 9.0, 0, 20.0), (48.0, 9.00005, 1_000, 20.0)], 3)      # ~3.7 m/s vs 20
    slow = _trip([(48.0, 9.0, 0, 0.1), (48.0, 9.00001, 1_000, 0.2)], 4)         # below ratio floor
    b = CaseBundle(generation="gen2", trips=[fast, zero, ratio, slow])
    got = sorted(f.subject["locator"] for f in run_checks(b) if f.rule == SPEED_PLAUSIBILITY)
    assert got == ["trip 1 row 2", "trip 2 row 2", "trip 3 row 2"]


def test_odometer_rules():
    trips = [_trip([], 1, 1000.0, 1), _trip([], 2, 900.0, 2)]
    findings = run_checks(CaseBundle(generation="gen2", trips=trips))
    assert [f.rule for f in findings] == [ODOMETER] and findings[0].severity == "alert"
    eb = EBikeData(drive_unit=[{"timestamp_ms": 1, "odometer": 10, "row_id": 1},
                               {"timestamp_ms": 2, "odometer": 5, "row_id": 2}])
    assert [f.rule for f in run_checks(CaseBundle(generation="gen1", ebike=eb))] == [ODOMETER]


@settings(max_examples=30, deadline=None)
@given(st.permutations(list(RULES)))
def test_rule_order_is_irrelevant(order):
    b = CaseBundle(generation="gen2", trips=[_trip([(48, 9, 2000, None), (48.5, 9, 1000, None)]),
                                             _trip([(48, 9, 0, None), (48.5, 9, 1, None)], 2)],
                   charts=_charts([0, 30]).charts)
    assert run_checks(b, {"rules": order}) == run_checks(b)


def test_config_validation(tmp_path):
    with pytest.raises(ValueError):
        SentryConfig.from_dict({"max_speed": 3})
    with pytest.raises(ValueError):
        SentryConfig.from_dict({"rules": ["NOPE"]})
    path = tmp_path / "c.json"
    path.write_text('{"max_speed_mps": 10}')
    assert SentryConfig.load(path).max_speed_mps == 10
    assert run_checks(_charts([0, 30]), {"rules": [MONOTONIC_TIME]}) == []


def test_finding_validation():
    with pytest.raises(ValueError):
        TamperFinding("X", "warn", {"a": 1}, "")
    with pytest.raises(ValueError):
        TamperFinding(STEP25, "fatal", {"a": 1}, "")
    with pytest.raises(ValueError):
        TamperFinding(STEP25, "warn", {}, "")


@pytest.mark.parametrize("mode,rule", [("reversed", MONOTONIC_TIME), ("duplicate", SPEED_PLAUSIBILITY),
                                       ("plausible", None)])
def test_forged_trips(tmp_path, mode, rule):
    root, _ = emit_tree(forge_case(11, "gen1"), tmp_path)
    forge_trip(root, auto_waypoints(root, 5), mode)
    rules = {f.rule for f in run_checks(assemble_bundle(root))}
    assert rules == ({rule} if rule else set())


def test_odometer_rollback_fixture(tmp_path):
    root, _ = emit_tree(forge_case(12, "gen1"), tmp_path)
    forge_odometer_rollback(root)
    assert ODOMETER in {f.rule for f in run_checks(assemble_bundle(root))}


@pytest.mark.parametrize("generation", ["gen1", "gen2"])
def test_clean_fixtures_have_no_findings(tmp_path, generation):
    for seed in range(5):
        root, _ = emit_tree(forge_case(seed, generation), tmp_path / str(seed))
        assert run_checks(assemble_bundle(root)) == []


def test_subject_cites_artifact_digest(tmp_path):
    root, _ = emit_tree(forge_case(13, "gen1"), tmp_path)
    forge_trip(root, auto_waypoints(root, 3), "reversed")
    f = run_checks(assemble_bundle(root))[0]
    assert f.subject["artifact"] == "EBike" and len(f.subject["sha256"]) == 64
