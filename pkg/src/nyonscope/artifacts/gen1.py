"""Parsers for first-generation (2014) artifacts under ``/home/appdata`` and ``/var/lib``."""

from __future__ import annotations

import logging
import re
from typing import Optional

from nyonscope.artifacts import lenient_json, sqlite_util
from nyonscope.artifacts.records import (
    MAC_RE,
    BikeSettings,
    BluetoothDevice,
    ChartsSample,
    EBikeData,
    TrackPoint,
    UserProfile,
    WifiNetwork,
    epoch_to_ms,
    iso_to_ms,
    jsonable,
    snake,
)

log = logging.getLogger(__name__)

SOCIAL_KEYS = ("facebook", "twitter", "instagram", "strava", "google", "apple")

GEN1_PROFILE_KEYS = {
    "user_id": "user_id",
    "first_name": "first_name",
    "last_name": "last_name",
    "gender": "gender",
    "date_of_birth": "date_of_birth",
    "email": "email",
    "home_address": "home_address",
    "mobile_phone_number": "mobile_phone_number",
}
GEN2_PROFILE_KEYS = {
    "userId": "user_id",
    "firstName": "first_name",
    "lastName": "last_name",
    "gender": "gender",
    "dateOfBirth": "date_of_birth",
    "email": "email",
    "address": "home_address",
    "phoneNumber": "mobile_phone_number",
}


def parse_user_profile(data, generation: str = "gen1", warnings: Optional[list] = None) -> UserProfile:
    """Map ``userObject.json`` (gen1) or ``active-account.json`` (gen2) onto a profile."""
    warnings = warnings if warnings is not None else []
    doc, repaired = lenient_json.loads(data)
    if repaired:
        warnings.append("profile: redaction placeholders removed before parsing")
    if not isinstance(doc, dict):
        raise ValueError("profile JSON is not an object")
    mapping = GEN2_PROFILE_KEYS if generation == "gen2" else GEN1_PROFILE_KEYS
    profile = UserProfile()
    for key, value in doc.items():
        if key in mapping:
            attr = mapping[key]
            if attr != "home_address" and value is not None and not isinstance(value, (dict, list)):
                value = str(value)
            setattr(profile, attr, value)
        elif key.lower() in SOCIAL_KEYS:
            profile.social[key] = value
        else:
            profile.extras[key] = value
    if not profile.user_id:
        msg = "profile: user_id missing"
        log.warning(msg)
        warnings.append(msg)
    return profile


CHARTS_COLUMNS = {
    "userid": "user_id",
    "ntdistance": "nt_distance",
    "altitude": "altitude",
    "speed": "speed",
    "drivercadence": "driver_cadence",
    "heartrate": "heart_rate",
    "stateofcharge": "state_of_charge",
    "consumption": "consumption",
    "power": "power",
}


def parse_charts_db(path) -> list[ChartsSample]:
    with sqlite_util.open_ro(path) as conn:
        table = sqlite_util.find_table(conn, "ChartsData")
        if table is None:
            raise LookupError("EBikeCharts: table ChartsData missing")
        samples = []
        for row in sqlite_util.rows(conn, table):
            kwargs = {"row_id": row.pop("__rowid__", None), "extras": {}}
            for col, value in row.items():
                attr = CHARTS_COLUMNS.get(col.lower())
                if attr:
                    kwargs[attr] = str(value) if attr == "user_id" and value is not None else value
                else:
                    kwargs["extras"][col] = jsonable(value)
            kwargs.setdefault("user_id", None)
            kwargs.setdefault("nt_distance", 0)
            samples.append(ChartsSample(**kwargs))
        return samples


EBIKE_TABLES = {
    "activities": "activities",
    "ambientdata": "ambient",
    "bikebattery": "bike_battery",
    "driveunit": "drive_unit",
    "operational": "operational",
    "driver": "driver",
    "localization": "localization",
}
BOOL_COLUMNS = {"is_moving", "bui_operational", "operational"}


def _ebike_row(row: dict) -> dict:
    out = {"row_id": row.pop("__rowid__", None)}
    for col, value in row.items():
        key = snake(col)
        value = jsonable(value)
        if key in BOOL_COLUMNS and value is not None:
            value = bool(value)
        out[key] = value
    if "user_id" in out and out["user_id"] is not None:
        out["user_id"] = str(out["user_id"])
    out["timestamp_ms"] = epoch_to_ms(out.get("time_stamp"))
    return out


def parse_ebike_db(path, diagnostics: Optional[list] = None, leftovers: Optional[dict] = None) -> EBikeData:
    diagnostics = diagnostics if diagnostics is not None else []
    data = EBikeData()
    with sqlite_util.open_ro(path) as conn:
        present = {t.lower(): t for t in sqlite_util.tables(conn)}
        for key, attr in EBIKE_TABLES.items():
            table = present.get(key)
            if table is None:
                data.tables[attr] = None
                continue
            raw_rows = sqlite_util.rows(conn, table)
            data.tables[attr] = len(raw_rows)
            for raw in raw_rows:
                row = _ebike_row(dict(raw))
                if row["timestamp_ms"] is None:
                    diagnostics.append(f"EBike.{table} row {row['row_id']}: undecodable timestamp")
                if attr == "localization":
                    try:
                        point = TrackPoint(
                            latitude=row.get("latitude"),
                            longitude=row.get("longitude"),
                            altitude=row.get("sensor_altitude"),
                            timestamp_ms=row["timestamp_ms"],
                            user_id=row.get("user_id"),
                            row_id=row["row_id"],
                        )
                    except (ValueError, TypeError) as exc:
                        diagnostics.append(f"EBike.{table} row {row['row_id']} quarantined: {exc}")
                        continue
                    data.localization.append(point)
                else:
                    getattr(data, attr).append(row)
        if leftovers is not None:
            for lower, table in sorted(present.items()):
                if lower not in EBIKE_TABLES:
                    leftovers[table] = dump_table(conn, table)
    return data


def dump_table(conn, table: str) -> dict:
    cols = sqlite_util.columns(conn, table)
    rows = []
    for r in sqlite_util.rows(conn, table):
        r.pop("__rowid__", None)
        rows.append({k: jsonable(v) for k, v in r.items()})
    return {"columns": cols, "row_count": len(rows), "rows": rows}


def _decode_text(data) -> str:
    if isinstance(data, str):
        return data
    try:
        return bytes(data).decode("utf-8")
    except UnicodeDecodeError:
        return bytes(data).decode("latin-1")


def _ini_lines(text: str, warnings: list, label: str):
    section = "General"
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith((";", "#")):
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1]
            continue
        if "=" not in line:
            msg = f"{label} line {lineno}: unparseable, skipped"
            log.warning(msg)
            warnings.append(msg)
            continue
        key, value = raw.split("=", 1)
        yield section, key.strip(), value.rstrip("\r\n").lstrip()


SERIAL_RE = re.compile(r"serial|partnumber|part_number", re.IGNORECASE)


def parse_settings_ini(data, warnings: Optional[list] = None) -> BikeSettings:
    """``Settings.ini``: serials, consent timestamps, Wi-Fi token, raw last-sync value."""
    warnings = warnings if warnings is not None else []
    text = _decode_text(data)
    settings = BikeSettings()
    for section, key, value in _ini_lines(text, warnings, "Settings.ini"):
        lowered = key.lower()
        if lowered in ("lastsync", "last_sync", "lastsyncdate"):
            settings.last_sync_raw = value
        elif lowered in ("wifitoken", "wifiaccesstoken", "wifi_token"):
            settings.wifi_token = value
        elif section.lower() == "bike" or SERIAL_RE.search(key):
            settings.serials[key] = value
        elif section.lower() == "consent":
            settings.consent[key] = {"raw": value, "timestamp_ms": epoch_to_ms(value)}
        else:
            settings.extras[f"{section}/{key}"] = value
    return settings


CONNMAN_SECURITY = ("psk", "wep", "ieee8021x", "none", "wps")


def parse_connman_settings(data, service: str, path: Optional[str] = None,
                           warnings: Optional[list] = None) -> Optional[WifiNetwork]:
    warnings = warnings if warnings is not None else []
    text = _decode_text(data)
    values: dict[str, str] = {}
    section_name = service
    for section, key, value in _ini_lines(text, warnings, f"connman {service}"):
        section_name = section
        values[key] = value
    ssid = values.pop("Name", None)
    hex_ssid = values.get("SSID")
    if not ssid and hex_ssid:
        try:
            ssid = bytes.fromhex(hex_ssid).decode("utf-8", errors="replace")
        except ValueError:
            ssid = None
    if not ssid:
        warnings.append(f"connman {service}: no SSID, entry skipped")
        return None
    passphrase = values.pop("Passphrase", None)
    security = next((s for s in CONNMAN_SECURITY if section_name.endswith("_" + s)), None)
    modified = values.pop("Modified", None)
    settings = dict(values)
    if modified is not None:
        settings["Modified"] = modified
    return WifiNetwork(
        ssid=ssid,
        passphrase=passphrase,
        security=security,
        settings=settings,
        last_modified_ms=iso_to_ms(modified) if modified else None,
        generation="gen1",
        path=path,
    )


def _bool(value: Optional[str]) -> Optional[bool]:
    if value is None:
        return None
    return value.strip().lower() in ("true", "1", "yes")


def parse_bluego_file(data, filename: str, path: Optional[str] = None,
                      warnings: Optional[list] = None) -> Optional[BluetoothDevice]:
    warnings = warnings if warnings is not None else []
    values = {k: v for _, k, v in _ini_lines(_decode_text(data), warnings, f"bluego {filename}")}
    address = values.pop("Address", None)
    if address is None:
        guess = filename.replace("_", ":").replace("-", ":")
        address = guess if MAC_RE.match(guess) else None
    try:
        return BluetoothDevice(
            address=address,
            name=values.pop("Name", None),
            trusted=_bool(values.pop("Trusted", None)),
            source="bluego",
            observed_at_ms=epoch_to_ms(values.pop("LastSeen")) if "LastSeen" in values else None,
            path=path,
            extras=values,
        )
    except ValueError as exc:
        warnings.append(f"bluego {filename}: {exc}")
        return None


_LOG_RE = re.compile(
    r"^\[?(\d{4}-\d{2}-\d{2}[T ]\d{2}:\d{2}:\d{2}(?:\.\d{1,9})?(?:Z|[+-]\d{2}:?\d{2})?)\]?\s+(.*)$"
)


def parse_log(data) -> list[dict]:
    """One entry per non-empty line; leading ISO timestamps are decoded."""
    out = []
    for lineno, raw in enumerate(_decode_text(data).splitlines(), 1):
        if not raw.strip():
            continue
        m = _LOG_RE.match(raw)
        if m:
            out.append({"line": lineno, "timestamp_ms": iso_to_ms(m.group(1)), "message": m.group(2)})
        else:
            out.append({"line": lineno, "timestamp_ms": None, "message": raw})
    return out
