"""Consistency checks that flag implausible or manipulated records."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Optional

from nyonscope.artifacts.records import CaseBundle
from nyonscope.chronicle import haversine

STEP25 = "STEP25"
MONOTONIC_TIME = "MONOTONIC_TIME"
SPEED_PLAUSIBILITY = "SPEED_PLAUSIBILITY"
ODOMETER = "ODOMETER"
RULES = (STEP25, MONOTONIC_TIME, SPEED_PLAUSIBILITY, ODOMETER)

SEVERITIES = ("info", "warn", "alert")


@dataclass(frozen=True)
class TamperFinding:
    rule: str
    severity: str
    subject: dict
    detail: str
    threshold: Optional[dict] = None

    def __post_init__(self):
        if self.rule not in RULES:
            raise ValueError(f"unknown rule {self.rule!r}")
        if self.severity not in SEVERITIES:
            raise ValueError(f"unknown severity {self.severity!r}")
        if not self.subject:
            raise ValueError("finding without subject")

    def key(self):
        return (self.rule, json.dumps(self.subject, sort_keys=True), self.detail)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class SentryConfig:
    max_speed_mps: float = 25.0
    speed_factor: float = 3.0
    # ratios between very slow speeds are noise
    min_ratio_speed_mps: float = 1.0
    charts_step: float = 25.0
    rules: tuple = RULES

    @classmethod
    def from_dict(cls, data: Optional[dict]) -> "SentryConfig":
        data = dict(data or {})
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown sentry config keys: {sorted(unknown)}")
        if "rules" in data:
            bad = [r for r in data["rules"] if r not in RULES]
            if bad:
                raise ValueError(f"unknown rules: {bad}")
            data["rules"] = tuple(data["rules"])
        return cls(**data)

    @classmethod
    def load(cls, path) -> "SentryConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))


def _subject(bundle: CaseBundle, kind: str, locator: str) -> dict:
    path = bundle.artifact_path(kind)
    sha = bundle.provenance.get(path, {}).get("sha256") if path else None
    return {"artifact": kind, "path": path, "sha256": sha, "locator": locator}


def _sequences(bundle: CaseBundle):
    """(artifact kind, label, points in storage order) for every recorded track."""
    if bundle.ebike is not None and bundle.ebike.localization:
        pts = sorted(bundle.ebike.localization, key=lambda p: (p.row_id is None, p.row_id or 0))
        yield "EBike", "Localization", pts
    for trip in bundle.trips:
        pts = sorted(trip.points, key=lambda p: (p.row_id is None, p.row_id or 0))
        yield "tracking.db", f"trip {trip.trip_id}", pts


def check_step25(bundle: CaseBundle, cfg: SentryConfig) -> list[TamperFinding]:
    out = []
    by_user: dict = {}
    for s in bundle.charts:
        by_user.setdefault(s.user_id, []).append(s)
    for user, samples in sorted(by_user.items(), key=lambda kv: str(kv[0])):
        samples.sort(key=lambda s: (s.row_id is None, s.row_id or 0))
        for a, b in zip(samples, samples[1:]):
            if a.nt_distance is None or b.nt_distance is None:
                continue
            delta = b.nt_distance - a.nt_distance
            if delta != cfg.charts_step:
                out.append(TamperFinding(
                    STEP25, "warn", _subject(bundle, "EBikeCharts", f"ChartsData row {b.row_id}"),
                    f"NTDistance {a.nt_distance} -> {b.nt_distance} (delta {delta}, expected {cfg.charts_step})",
                    {"charts_step": cfg.charts_step},
                ))
    return out


def check_monotonic(bundle: CaseBundle, cfg: SentryConfig) -> list[TamperFinding]:
    out = []
    for kind, label, pts in _sequences(bundle):
        for a, b in zip(pts, pts[1:]):
            if a.timestamp_ms is None or b.timestamp_ms is None:
                continue
            if b.timestamp_ms < a.timestamp_ms:
                out.append(TamperFinding(
                    MONOTONIC_TIME, "alert", _subject(bundle, kind, f"{label} row {b.row_id}"),
                    f"timestamp {b.timestamp_ms} precedes previous row {a.row_id} at {a.timestamp_ms}",
                ))
    return out


def check_speed(bundle: CaseBundle, cfg: SentryConfig) -> list[TamperFinding]:
    out = []
    thr = {"max_speed_mps": cfg.max_speed_mps, "speed_factor": cfg.speed_factor}
    for kind, label, pts in _sequences(bundle):
        for a, b in zip(pts, pts[1:]):
            if a.timestamp_ms is None or b.timestamp_ms is None:
                continue
            dt = (b.timestamp_ms - a.timestamp_ms) / 1000
            if dt < 0:
                continue  # ordering is the monotonic rule's business
            dist = haversine(a.latitude, a.longitude, b.latitude, b.longitude)
            subject = _subject(bundle, kind, f"{label} row {b.row_id}")
            if dt == 0:
                if dist > 0:
                    out.append(TamperFinding(SPEED_PLAUSIBILITY, "warn", subject,
                                             f"{dist:.1f} m covered in zero time", thr))
                continue
            implied = dist / dt
            if implied > cfg.max_speed_mps:
                out.append(TamperFinding(SPEED_PLAUSIBILITY, "warn", subject,
                                         f"implied speed {implied:.2f} m/s exceeds {cfg.max_speed_mps} m/s", thr))
                continue
            rec = b.speed
            if rec is not None and min(rec, implied) >= cfg.min_ratio_speed_mps:
                ratio = max(rec, implied) / min(rec, implied)
                if ratio > cfg.speed_factor:
                    out.append(TamperFinding(
                        SPEED_PLAUSIBILITY, "warn", subject,
                        f"implied speed {implied:.2f} m/s vs recorded {rec:.2f} m/s (factor {ratio:.2f} > "
                        f"{cfg.speed_factor})", thr))
    return out


def check_odometer(bundle: CaseBundle, cfg: SentryConfig) -> list[TamperFinding]:
    out = []
    if bundle.ebike is not None:
        rows = [r for r in bundle.ebike.drive_unit if r.get("odometer") is not None and r.get("timestamp_ms") is not None]
        rows.sort(key=lambda r: (r["timestamp_ms"], r.get("row_id") or 0))
        for a, b in zip(rows, rows[1:]):
            if b["odometer"] < a["odometer"]:
                out.append(TamperFinding(
                    ODOMETER, "alert", _subject(bundle, "EBike", f"DriveUnit row {b.get('row_id')}"),
                    f"odometer fell from {a['odometer']} to {b['odometer']}",
                ))
    trips = [t for t in bundle.trips if t.odometer_m is not None and t.start_ms is not None]
    trips.sort(key=lambda t: (t.start_ms, str(t.trip_id)))
    for a, b in zip(trips, trips[1:]):
        if b.odometer_m < a.odometer_m:
            out.append(TamperFinding(
                ODOMETER, "alert", _subject(bundle, "tracking.db", f"trip {b.trip_id}"),
                f"odometer fell from {a.odometer_m} (trip {a.trip_id}) to {b.odometer_m}",
            ))
    return out


CHECKS = {
    STEP25: check_step25,
    MONOTONIC_TIME: check_monotonic,
    SPEED_PLAUSIBILITY: check_speed,
    ODOMETER: check_odometer,
}


def run_checks(bundle: CaseBundle, config=None) -> list[TamperFinding]:
    """Evaluate every enabled rule; the result is sorted, so rule order never matters."""
    cfg = config if isinstance(config, SentryConfig) else SentryConfig.from_dict(config)
    findings = []
    for rule in cfg.rules:
        findings.extend(CHECKS[rule](bundle, cfg))
    unique = {f.key(): f for f in findings}
    return [unique[k] for k in sorted(unique)]


def findings_to_json(findings) -> list[dict]:
    return [f.to_dict() for f in findings]
