import io
import random

import pytest
from hypothesis import given, settings, strategies as st

from nyonscope.artifacts import assemble_bundle, parse_gpx
from nyonscope.artifacts.records import CaseBundle, TrackPoint
from nyonscope.chronicle import (
    PRIORITY, SOURCES, Track, TimelineEvent, build_timeline, export_gpx, haversine, read_jsonl,
    reconstruct_tracks, sort_events, tracks_from_bundle, write_jsonl,
)

lat = st.floats(-90, 90, allow_nan=False)
lon = st.floats(-180, 180, allow_nan=False)


@settings(max_examples=100, deadline=None)
@given(lat, lon, lat, lon)
def test_haversine_symmetric_and_bounded(a, b, c, d):
    h = haversine(a, b, c, d)
    assert h == pytest.approx(haversine(c, d, a, b), abs=1e-6)
    assert 0 <= h <= 3.1416 * 6_371_008.8 + 1e-6
    assert haversine(a, b, a, b) == 0


def test_haversine_known_distance():
    # one degree of latitude on the mean sphere
    assert haversine(0, 0, 1, 0) == pytest.approx(111_195.08, abs=0.01)


def _points(n, start=1_700_000_000_000, step_ms=10_000):
    return [TrackPoint(48.0 + i * 1e-4, 9.0, 300.0 + i, start + i * step_ms, 5.0) for i in range(n)]


def test_twenty_minute_gap_splits_track():
    pts = _points(10)
    for p in pts[5:]:
        p.timestamp_ms += 20 * 60 * 1000
    tracks = reconstruct_tracks(list(reversed(pts)))
    assert [len(t.points) for t in tracks] == [5, 5]
    assert [t.trip_id for t in tracks] == [1, 2]
    assert tracks[0].duration_s == 40.0 and tracks[0].max_gap_s == 10.0
    assert len(reconstruct_tracks(pts, gap_threshold=1500)) == 1


def test_untimed_points_dropped():
    pts = _points(3) + [TrackPoint(48.0, 9.0)]
    assert sum(len(t.points) for t in reconstruct_tracks(pts)) == 3


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.floats(-89, 89), st.floats(-179, 179), st.one_of(st.none(), st.floats(-400, 9000)),
                          st.integers(0, 4_102_444_800_000)), min_size=1, max_size=30))
def test_gpx_round_trip(rows):
    track = Track(points=[TrackPoint(a, b, c, d) for a, b, c, d in rows])
    back = parse_gpx(export_gpx(track)).points
    assert len(back) == len(rows)
    for p, q in zip(track.points, back):
        assert abs(p.latitude - q.latitude) <= 1e-6 and abs(p.longitude - q.longitude) <= 1e-6
        assert abs(p.timestamp_ms - q.timestamp_ms) <= 1
        assert p.altitude == q.altitude


def test_gpx_empty_track_and_escaping():
    with pytest.raises(ValueError):
        export_gpx(Track())
    assert b"a &lt;b&gt;" in export_gpx(Track(points=_points(1)), name="a <b>")


def _event(ms, source, index):
    return TimelineEvent(ms, source, "k", {}, None, index)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 5), st.sampled_from(SOURCES)), max_size=40), st.randoms())
def test_sort_is_permutation_invariant(specs, rnd):
    events = [_event(ms, src, i) for i, (ms, src) in enumerate(specs)]
    ref = sort_events(events)
    shuffled = list(events)
    rnd.shuffle(shuffled)
    assert sort_events(shuffled) == ref
    keys = [e.sort_key() for e in ref]
    assert keys == sorted(keys) and len(set(keys)) == len(keys)


def test_equal_instants_use_source_priority():
    evs = sort_events([_event(5, "syslog", 0), _event(5, "ebike-db", 1), _event(5, "gnss", 2)])
    assert [e.source for e in evs] == ["ebike-db", "gnss", "syslog"]
    assert PRIORITY["ebike-db"] < PRIORITY["tracking"] < PRIORITY["charts"]


def test_timeline_from_fixture(gen2_tree):
    _, root, manifest = gen2_tree
    bundle = assemble_bundle(root)
    quarantine = []
    tl = build_timeline(bundle, quarantine)
    assert tl == sort_events(tl)
    n_points = sum(len(t.points) for t in bundle.trips)
    assert sum(1 for e in tl if e.kind == "trip.point") == n_points
    assert all(e.provenance and e.provenance["sha256"] for e in tl if e.source == "tracking")
    buf = io.StringIO()
    write_jsonl(tl, buf)
    buf.seek(0)
    assert read_jsonl(buf) == tl


def test_charts_are_quarantined(gen1_tree):
    _, root, _ = gen1_tree
    bundle = assemble_bundle(root)
    quarantine = []
    tl = build_timeline(bundle, quarantine)
    assert not any(e.source == "charts" for e in tl)
    assert sum(1 for q in quarantine if q["source"] == "charts") == len(bundle.charts) > 0


def test_empty_bundle():
    assert build_timeline(CaseBundle()) == []
    assert tracks_from_bundle(CaseBundle()) == []


def test_gen1_tracks_from_bundle(gen1_tree):
    case, root, _ = gen1_tree
    tracks = tracks_from_bundle(assemble_bundle(root))
    assert len(tracks) == len(case.trips)
