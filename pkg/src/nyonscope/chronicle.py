"""Unified timeline, track reconstruction and GPX export."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Iterable, Optional
from xml.sax.saxutils import escape

from nyonscope.artifacts.records import CaseBundle, TrackPoint, canonical_json, ms_to_iso

EARTH_RADIUS_M = 6_371_008.8
DEFAULT_GAP_S = 300

SOURCES = ("ebike-db", "tracking", "analytics", "gnss", "wifi", "bluetooth", "syslog", "charts")
PRIORITY = {name: rank for rank, name in enumerate(SOURCES)}


def haversine(lat1: float, lon1: float, lat2: float, lon2: float) -> float:
    """Great-circle distance in metres."""
    p1, p2 = math.radians(lat1), math.radians(lat2)
    dphi = p2 - p1
    dlmb = math.radians(lon2 - lon1)
    a = math.sin(dphi / 2) ** 2 + math.cos(p1) * math.cos(p2) * math.sin(dlmb / 2) ** 2
    return 2 * EARTH_RADIUS_M * math.asin(min(1.0, math.sqrt(a)))


@dataclass(frozen=True)
class TimelineEvent:
    instant_ms: int
    source: str
    kind: str
    payload: dict = field(default_factory=dict, compare=False, hash=False)
    provenance: Optional[dict] = field(default=None, compare=False, hash=False)
    index: int = 0

    @property
    def instant(self) -> str:
        return ms_to_iso(self.instant_ms)

    def sort_key(self):
        return (self.instant_ms, PRIORITY.get(self.source, len(PRIORITY)), self.index)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["instant"] = self.instant
        return d


def sort_events(events: Iterable[TimelineEvent]) -> list[TimelineEvent]:
    return sorted(events, key=TimelineEvent.sort_key)


class _Collector:
    def __init__(self, bundle: CaseBundle):
        self.bundle = bundle
        self.events: list[TimelineEvent] = []
        self.quarantined: list[dict] = []

    def prov(self, kind: Optional[str] = None, path: Optional[str] = None) -> Optional[dict]:
        path = path or (self.bundle.artifact_path(kind) if kind else None)
        if path is None:
            return None
        meta = self.bundle.provenance.get(path, {})
        return {"path": path, "sha256": meta.get("sha256")}

    def add(self, ms, source: str, kind: str, payload: dict, prov: Optional[dict]) -> None:
        index = len(self.events) + len(self.quarantined)
        if not isinstance(ms, int) or isinstance(ms, bool):
            self.quarantined.append({"source": source, "kind": kind, "payload": payload, "index": index})
            return
        self.events.append(TimelineEvent(ms, source, kind, payload, prov, index))


def build_timeline(bundle: CaseBundle, quarantine: Optional[list] = None) -> list[TimelineEvent]:
    """Every timestamped datum of ``bundle`` as one ordered event list.

    Events whose timestamp could not be decoded are left out; pass a list as
    ``quarantine`` to receive them.
    """
    c = _Collector(bundle)
    b = bundle
    if b.ebike is not None:
        prov = c.prov("EBike")
        for table in ("activities", "ambient", "bike_battery", "drive_unit", "operational", "driver"):
            for row in getattr(b.ebike, table):
                c.add(row.get("timestamp_ms"), "ebike-db", table, row, prov)
                if table == "activities" and row.get("stop_time") is not None:
                    stop = row["stop_time"] * 1000 if row["stop_time"] < 10 ** 12 else row["stop_time"]
                    c.add(stop, "ebike-db", "activities.stop", row, prov)
        for p in b.ebike.localization:
            c.add(p.timestamp_ms, "ebike-db", "localization", asdict(p), prov)
    for s in b.charts:
        # charts rows carry distance, not time
        c.quarantined.append({"source": "charts", "kind": "sample", "payload": asdict(s),
                              "index": len(c.events) + len(c.quarantined)})
    prov = c.prov("tracking.db")
    for trip in b.trips:
        summary = {"trip_id": trip.trip_id, "distance_m": trip.distance_m, "odometer_m": trip.odometer_m}
        c.add(trip.start_ms, "tracking", "trip.start", summary, prov)
        c.add(trip.end_ms, "tracking", "trip.end", summary, prov)
        for p in trip.points:
            c.add(p.timestamp_ms, "tracking", "trip.point", dict(asdict(p), trip_id=trip.trip_id), prov)
    prov = c.prov("analytics.db")
    for ev in b.analytics:
        c.add(ev.timestamp_ms, "analytics", ev.kind, {"params": ev.params, "row_id": ev.row_id}, prov)
    if b.last_position is not None:
        c.add(b.last_position.timestamp, "gnss", "lastPosition", asdict(b.last_position), c.prov("gnssSettings.json"))
    for net in b.wifi:
        if net.last_modified_ms is not None:
            c.add(net.last_modified_ms, "wifi", "network.modified", {"ssid": net.ssid, "security": net.security},
                  c.prov(path=net.path))
    for dev in b.bluetooth:
        if dev.observed_at_ms is not None:
            c.add(dev.observed_at_ms, "bluetooth", f"device.{dev.extras.get('event') or 'seen'}",
                  {"address": dev.address, "name": dev.name, "trusted": dev.trusted}, c.prov(path=dev.path))
    for logf in b.logs:
        prov = c.prov(path=logf.path)
        for line in logf.lines:
            if line.get("timestamp_ms") is not None:
                c.add(line["timestamp_ms"], "syslog", "log", {"line": line["line"], "message": line["message"]}, prov)
    if quarantine is not None:
        quarantine.extend(c.quarantined)
    return sort_events(c.events)


def write_jsonl(events: Iterable[TimelineEvent], fh) -> int:
    n = 0
    for ev in events:
        fh.write(canonical_json(ev.to_dict()) + "\n")
        n += 1
    return n


def read_jsonl(fh) -> list[TimelineEvent]:
    out = []
    for line in fh:
        if line.strip():
            d = json.loads(line)
            d.pop("instant", None)
            out.append(TimelineEvent(**d))
    return out


@dataclass
class Track:
    trip_id: Optional[object] = None
    points: list = field(default_factory=list)
    distance_m: float = 0.0
    duration_s: float = 0.0
    max_gap_s: float = 0.0

    def compute_stats(self) -> "Track":
        self.distance_m = sum(
            haversine(a.latitude, a.longitude, b.latitude, b.longitude) for a, b in zip(self.points, self.points[1:])
        )
        times = [p.timestamp_ms for p in self.points if p.timestamp_ms is not None]
        self.duration_s = (times[-1] - times[0]) / 1000 if len(times) > 1 else 0.0
        gaps = [(b - a) / 1000 for a, b in zip(times, times[1:])]
        self.max_gap_s = max(gaps) if gaps else 0.0
        return self

    def to_dict(self) -> dict:
        return asdict(self)


def _time_key(indexed):
    i, p = indexed
    return (p.timestamp_ms, i)


def reconstruct_tracks(points: Iterable[TrackPoint], gap_threshold: float = DEFAULT_GAP_S) -> list[Track]:
    """Sort by time and cut wherever consecutive points are more than ``gap_threshold`` seconds apart.

    Points without a timestamp cannot be placed and are dropped.
    """
    ordered = [p for _, p in sorted(((i, p) for i, p in enumerate(points) if p.timestamp_ms is not None),
                                    key=_time_key)]
    tracks: list[Track] = []
    current: list = []
    for p in ordered:
        if current and (p.timestamp_ms - current[-1].timestamp_ms) / 1000 > gap_threshold:
            tracks.append(Track(points=current))
            current = []
        current.append(p)
    if current:
        tracks.append(Track(points=current))
    for n, t in enumerate(tracks, 1):
        t.trip_id = n
        t.compute_stats()
    return tracks


def tracks_from_bundle(bundle: CaseBundle, gap_threshold: float = DEFAULT_GAP_S) -> list[Track]:
    """Gen-2 trips map one-to-one onto tracks; gen-1 localization rows are split by time gaps."""
    if bundle.trips:
        out = []
        for trip in bundle.trips:
            pts = [p for _, p in sorted(((i, p) for i, p in enumerate(trip.points) if p.timestamp_ms is not None),
                                        key=_time_key)]
            out.append(Track(trip_id=trip.trip_id, points=pts).compute_stats())
        return out
    if bundle.ebike is not None:
        return reconstruct_tracks(bundle.ebike.localization, gap_threshold)
    return []


def export_gpx(track: Track, name: Optional[str] = None) -> bytes:
    if not track.points:
        raise ValueError("cannot export an empty track")
    title = name if name is not None else f"trip {track.trip_id}" if track.trip_id is not None else "track"
    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        '<gpx version="1.1" creator="nyonscope" xmlns="http://www.topografix.com/GPX/1/1">',
        "  <trk>",
        f"    <name>{escape(str(title))}</name>",
        "    <trkseg>",
    ]
    for p in track.points:
        inner = ""
        if p.altitude is not None:
            inner += f"<ele>{float(p.altitude)!r}</ele>"
        if p.timestamp_ms is not None:
            inner += f"<time>{ms_to_iso(p.timestamp_ms)}</time>"
        out.append(f'      <trkpt lat="{float(p.latitude)!r}" lon="{float(p.longitude)!r}">{inner}</trkpt>')
    out += ["    </trkseg>", "  </trk>", "</gpx>", ""]
    return "\n".join(out).encode("utf-8")
