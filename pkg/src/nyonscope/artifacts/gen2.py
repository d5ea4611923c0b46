"""Parsers for second-generation (2021) artifacts from the decrypted userdata partition."""

from __future__ import annotations

import json
import logging
import os
import re
from importlib import resources
from pathlib import Path
from typing import Optional

from nyonscope.artifacts import lenient_json, sqlite_util
from nyonscope.artifacts.gen1 import _decode_text, dump_table
from nyonscope.artifacts.records import (
    MAC_RE,
    AnalyticsEvent,
    BikeInfo,
    BluetoothDevice,
    LastPosition,
    NavData,
    TrackPoint,
    TripRecord,
    WifiNetwork,
    epoch_to_ms,
    iso_to_ms,
    jsonable,
    ms_to_iso,
    valid_coordinates,
)

log = logging.getLogger(__name__)

PROFILE_ENV = "NYONSCOPE_SCHEMA_PROFILE"
RETAINED_TRIPS = 100


def _unquote(value: str) -> str:
    if len(value) >= 2 and value[0] == value[-1] == '"':
        return value[1:-1]
    return value


def _wifi_entries(doc) -> list:
    if isinstance(doc, list):
        return doc
    if isinstance(doc, dict):
        if "id" in doc:
            return [doc]
        for value in doc.values():
            if isinstance(value, list) and any(isinstance(v, dict) and "id" in v for v in value):
                return value
    return []


def parse_wifi_manager(data, path: Optional[str] = None, warnings: Optional[list] = None) -> list[WifiNetwork]:
    """``WifiManagerSettings.json``: a single entry, a list, or an object holding a list."""
    warnings = warnings if warnings is not None else []
    doc, repaired = lenient_json.loads(data)
    if repaired:
        warnings.append("WifiManagerSettings.json: redaction placeholders removed")
    networks = []
    for i, entry in enumerate(_wifi_entries(doc)):
        if not isinstance(entry, dict) or not entry.get("id"):
            warnings.append(f"WifiManagerSettings.json entry {i}: no id, skipped")
            continue
        rest = {k: v for k, v in entry.items() if k not in ("id", "psk", "security")}
        networks.append(WifiNetwork(
            ssid=_unquote(str(entry["id"])),
            passphrase=entry.get("psk"),
            security=entry.get("security"),
            settings=rest,
            last_modified_ms=None,
            generation="gen2",
            path=path,
        ))
    return networks


def parse_gnss_settings(data, warnings: Optional[list] = None) -> LastPosition:
    warnings = warnings if warnings is not None else []
    doc, repaired = lenient_json.loads(data)
    if repaired:
        warnings.append("gnssSettings.json: redaction placeholders removed")
    if not isinstance(doc, dict) or not isinstance(doc.get("lastPosition"), dict):
        raise LookupError("gnssSettings.json: lastPosition missing")
    pos = dict(doc["lastPosition"])
    ts = pos.pop("timestamp", None)
    ms = epoch_to_ms(ts)
    out = LastPosition(
        latitude=pos.pop("latitude", None),
        longitude=pos.pop("longitude", None),
        altitude=pos.pop("altitude", None),
        speed=pos.pop("speed", None),
        timestamp=ms,
        instant=ms_to_iso(ms),
        extras=pos,
        settings={k: v for k, v in doc.items() if k != "lastPosition"},
    )
    if out.latitude is not None and out.longitude is not None and not valid_coordinates(out.latitude, out.longitude):
        raise ValueError(f"gnssSettings.json: invalid coordinates ({out.latitude}, {out.longitude})")
    return out


SETTINGS_WITH_DATA = ("settings_app", "settings_system")


def parse_user_settings_db(path) -> dict:
    """``user-settings.db``: key/value rows of settings_app and settings_system, counts for all tables."""
    out = {name: [] for name in SETTINGS_WITH_DATA}
    out["tables"] = {}
    with sqlite_util.open_ro(path) as conn:
        for table in sqlite_util.tables(conn):
            rows = sqlite_util.rows(conn, table)
            out["tables"][table] = len(rows)
            if table.lower() not in SETTINGS_WITH_DATA:
                continue
            for row in rows:
                row.pop("__rowid__", None)
                row.pop("id", None)
                key = row.pop("stored_setting", None)
                value = row.pop("value", None)
                entry = {"key": key, "value": jsonable(value)}
                if row:
                    entry["extras"] = {k: jsonable(v) for k, v in row.items()}
                out[table.lower()].append(entry)
    return out


_SERIAL_KEY = re.compile(r"serial|partnumber|framenumber", re.IGNORECASE)


def parse_bike_info(data) -> list[BikeInfo]:
    doc, _ = lenient_json.loads(data)
    if isinstance(doc, dict):
        doc = doc.get("bikes", [doc])
    if not isinstance(doc, list):
        raise ValueError("bike-info.json: expected a list of bikes")
    bikes = []
    for item in doc:
        if not isinstance(item, dict):
            continue
        info = BikeInfo()
        for key, value in item.items():
            if key == "softwareVersion":
                info.software_version = value
            elif key == "hardwareVersion":
                info.hardware_version = value
            elif key == "batteryPacks":
                info.battery_packs = list(value or [])
            elif _SERIAL_KEY.search(key) and not isinstance(value, (dict, list)):
                info.serials[key] = value
            else:
                info.extras[key] = value
        bikes.append(info)
    return bikes


def _json_column(value):
    if isinstance(value, str):
        try:
            return json.loads(value)
        except json.JSONDecodeError:
            return value
    return jsonable(value)


def parse_nav_storage(path, diagnostics: Optional[list] = None) -> NavData:
    diagnostics = diagnostics if diagnostics is not None else []
    nav = NavData()
    with sqlite_util.open_ro(path) as conn:
        def table_rows(name):
            table = sqlite_util.find_table(conn, name)
            if table is None:
                diagnostics.append(f"NavStorage: table {name} missing")
                return []
            return sqlite_util.rows(conn, table)

        for row in table_rows("Consumptions"):
            row.pop("__rowid__", None)
            entry = {"id": row.pop("id", None), "vector": _json_column(row.pop("vector", None))}
            entry["extras"] = {k: jsonable(v) for k, v in row.items()}
            nav.consumptions.append(entry)

        for row in table_rows("Locations"):
            row.pop("__rowid__", None)
            lat, lon = row.pop("latitude", None), row.pop("longitude", None)
            if not valid_coordinates(lat, lon):
                diagnostics.append(f"NavStorage.Locations id {row.get('id')} quarantined: invalid coordinates")
                continue
            modified = row.pop("modified", None)
            nav.locations.append({
                "id": row.pop("id", None), "name": row.pop("name", None), "latitude": lat, "longitude": lon,
                "modified": modified, "modified_ms": epoch_to_ms(modified),
                "extras": {k: jsonable(v) for k, v in row.items()},
            })

        for row in table_rows("Routes"):
            row.pop("__rowid__", None)
            waypoints = _json_column(row.pop("waypoints", None))
            points = []
            for wp in waypoints if isinstance(waypoints, list) else []:
                if isinstance(wp, (list, tuple)) and len(wp) >= 2 and valid_coordinates(wp[0], wp[1]):
                    points.append([wp[0], wp[1]])
                else:
                    diagnostics.append(f"NavStorage.Routes id {row.get('id')}: waypoint {wp!r} quarantined")
            modified = row.pop("modified", None)
            nav.routes.append({
                "id": row.pop("id", None), "name": row.pop("name", None), "points": points,
                "modified": modified, "modified_ms": epoch_to_ms(modified),
                "extras": {k: jsonable(v) for k, v in row.items()},
            })

        for row in table_rows("Recents"):
            row.pop("__rowid__", None)
            lat, lon = row.pop("latitude", None), row.pop("longitude", None)
            if not valid_coordinates(lat, lon):
                diagnostics.append(f"NavStorage.Recents id {row.get('id')} quarantined: invalid coordinates")
                continue
            ts = row.pop("timestamp", None)
            nav.recents.append({
                "id": row.pop("id", None), "name": row.pop("name", None), "latitude": lat, "longitude": lon,
                "timestamp": ts, "timestamp_ms": epoch_to_ms(ts),
                "extras": {k: jsonable(v) for k, v in row.items()},
            })
    return nav


def load_schema_profile(path=None) -> dict:
    """tracking.db schema profile: explicit path, then $NYONSCOPE_SCHEMA_PROFILE, then the bundled one."""
    path = path or os.environ.get(PROFILE_ENV)
    if path:
        return json.loads(Path(path).read_text())
    return json.loads(resources.files("nyonscope").joinpath("data/tracking_profile.json").read_text())


def _resolve(conn, spec: dict) -> Optional[str]:
    for name in spec.get("tables", []):
        table = sqlite_util.find_table(conn, name)
        if table:
            return table
    return None


def parse_tracking_db(path, profile: Optional[dict] = None, diagnostics: Optional[list] = None,
                      leftovers: Optional[dict] = None) -> list[TripRecord]:
    """Decode profile-recognized tables into trips; everything else goes to ``leftovers``."""
    diagnostics = diagnostics if diagnostics is not None else []
    profile = profile or load_schema_profile()
    roles = profile["roles"]
    with sqlite_util.open_ro(path) as conn:
        resolved = {role: _resolve(conn, spec) for role, spec in roles.items()}
        trip_spec, trip_table = roles["trip"], resolved.get("trip")
        trips: dict = {}
        if trip_table is None:
            diagnostics.append("tracking.db: no trip summary table recognized by the schema profile")
        else:
            cols = trip_spec["columns"]
            for row in sqlite_util.rows(conn, trip_table):
                row.pop("__rowid__", None)
                tid = row.pop(cols["trip_id"], None)
                start = row.pop(cols.get("start_ms", ""), None)
                end = row.pop(cols.get("end_ms", ""), None)
                trips[tid] = TripRecord(
                    trip_id=tid,
                    start_ms=epoch_to_ms(start),
                    end_ms=epoch_to_ms(end),
                    distance_m=row.pop(cols.get("distance_m", ""), None),
                    odometer_m=row.pop(cols.get("odometer_m", ""), None),
                    extras={k: jsonable(v) for k, v in row.items()},
                )

        point_table = resolved.get("points")
        if point_table:
            cols = roles["points"]["columns"]
            for row in sqlite_util.rows(conn, point_table):
                rowid = row.pop("__rowid__", None)
                tid = row.get(cols["trip_id"])
                trip = trips.get(tid)
                if trip is None:
                    diagnostics.append(f"tracking.db.{point_table} row {rowid}: unknown trip {tid!r}")
                    continue
                try:
                    point = TrackPoint(
                        latitude=row.get(cols["latitude"]),
                        longitude=row.get(cols["longitude"]),
                        altitude=row.get(cols.get("altitude", "")),
                        timestamp_ms=epoch_to_ms(row.get(cols["timestamp_ms"])),
                        speed=row.get(cols.get("speed", "")),
                        row_id=rowid,
                    )
                except (ValueError, TypeError) as exc:
                    diagnostics.append(f"tracking.db.{point_table} row {rowid} quarantined: {exc}")
                    continue
                trip.points.append(point)

        driver_table = resolved.get("driver")
        if driver_table:
            cols = roles["driver"]["columns"]
            for row in sqlite_util.rows(conn, driver_table):
                rowid = row.pop("__rowid__", None)
                tid = row.pop(cols["trip_id"], None)
                trip = trips.get(tid)
                if trip is None:
                    diagnostics.append(f"tracking.db.{driver_table} row {rowid}: unknown trip {tid!r}")
                    continue
                ts_col = cols.get("timestamp_ms")
                entry = {"timestamp_ms": epoch_to_ms(row.pop(ts_col, None)) if ts_col else None}
                entry.update({k: jsonable(v) for k, v in row.items()})
                trip.driver.append(entry)

        if leftovers is not None:
            known = {t for t in resolved.values() if t}
            for table in sqlite_util.tables(conn):
                if table not in known:
                    leftovers[table] = dump_table(conn, table)

    ordered = sorted(trips.values(), key=lambda t: (t.start_ms is None, t.start_ms or 0, str(t.trip_id)))
    if len(ordered) > RETAINED_TRIPS:
        diagnostics.append(f"tracking.db: {len(ordered)} trips found, device retains at most {RETAINED_TRIPS}")
    return ordered


def parse_analytics_db(path, diagnostics: Optional[list] = None) -> list[AnalyticsEvent]:
    diagnostics = diagnostics if diagnostics is not None else []
    events = []
    with sqlite_util.open_ro(path) as conn:
        table = sqlite_util.find_table(conn, "analytics_events")
        if table is None:
            raise LookupError("analytics.db: table analytics_events missing")
        for row in sqlite_util.rows(conn, table):
            rowid = row.pop("__rowid__", None)
            row.pop("id", None)
            kind = row.pop("event", None) or row.pop("name", None)
            raw_params = row.pop("params", None)
            params = None
            if raw_params:
                try:
                    params = json.loads(raw_params)
                except (json.JSONDecodeError, TypeError):
                    diagnostics.append(f"analytics_events row {rowid}: params not JSON, kept raw")
            try:
                events.append(AnalyticsEvent(
                    kind=kind,
                    timestamp_ms=epoch_to_ms(row.pop("timestamp", None)),
                    params=params,
                    raw_params=raw_params,
                    row_id=rowid,
                    extras={k: jsonable(v) for k, v in row.items()},
                ))
            except ValueError as exc:
                diagnostics.append(f"analytics_events row {rowid}: {exc}")
    return events


DEFAULT_CEF_PATTERNS = (
    r"\b(?P<event>discovered|trusted|paired|connected)\b.*?\b(?:address|addr|mac)\s*[=:]\s*(?P<address>[^\s,;]+)"
    r"(?:.*?\bname\s*[=:]\s*\"(?P<name>[^\"]*)\")?"
    r"(?:.*?\btrusted\s*[=:]\s*(?P<trusted>true|false|1|0)\b)?",
)
_CEF_TIME = re.compile(r"^\[?(\d{4}-\d{2}-\d{2}T\d{2}:\d{2}:\d{2}(?:\.\d{1,9})?(?:Z|[+-]\d{2}:?\d{2})?)")


def scan_cef_log(data, patterns=DEFAULT_CEF_PATTERNS, path: Optional[str] = None,
                 warnings: Optional[list] = None) -> list[BluetoothDevice]:
    """One device observation per matching log line."""
    warnings = warnings if warnings is not None else []
    compiled = [re.compile(p, re.IGNORECASE) for p in patterns]
    devices = []
    for lineno, line in enumerate(_decode_text(data).splitlines(), 1):
        for rx in compiled:
            m = rx.search(line)
            if not m:
                continue
            groups = m.groupdict()
            address = groups.get("address")
            if not address or not MAC_RE.match(address):
                msg = f"cef_debug.log line {lineno}: malformed MAC {address!r}, skipped"
                log.warning(msg)
                warnings.append(msg)
                break
            trusted = groups.get("trusted")
            if trusted is not None:
                trusted_flag = trusted.lower() in ("true", "1")
            elif (groups.get("event") or "").lower() == "trusted":
                trusted_flag = True
            else:
                trusted_flag = None
            tm = _CEF_TIME.match(line)
            devices.append(BluetoothDevice(
                address=address,
                name=groups.get("name"),
                trusted=trusted_flag,
                source="cef_log",
                observed_at_ms=iso_to_ms(tm.group(1)) if tm else None,
                path=path,
                extras={"line": lineno, "event": (groups.get("event") or "").lower()},
            ))
            break
    return devices
