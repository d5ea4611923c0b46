"""Write a synthetic case out as an extracted file tree.

Alongside the files, the expected parse result is assembled straight from the
case values (never by running the parsers), so it can serve as an oracle.
"""

from __future__ import annotations

import hashlib
import json
import sqlite3
from datetime import datetime, timedelta, timezone
from pathlib import Path

from nyonscope.forge.case import GEN1, GEN2, SyntheticCase, distance_m

GEN1_SETTINGS = "home/appdata/Main/Apps/Settings"
GEN1_LOGS = "home/appdata/var/log"
CONNMAN = "var/lib/connman"
BLUEGO = "var/lib/bluego"
GEN2_DB = "users/buiowner/data/system/db"
GEN2_LOGS = "system/webfs/logs/log"
CEF_LOG = "system/webfs/logs/cef_debug.log"
ANALYTICS = "system/db/analytics.db"
WIFI_JSON = "system/settings/WifiManagerSettings.json"
GNSS_JSON = "system/settings/gnssSettings.json"

USER_SETTINGS_TABLES = ("settings_app", "settings_system", "settings_display", "settings_audio",
                        "settings_privacy", "settings_navigation", "settings_meta")
TRACKING_EXTRA_TABLES = (
    "trip_ambient", "trip_battery", "drive_unit_state", "trip_operational", "sync_state", "activity_types",
    "achievements", "goals", "segments", "segment_points", "pause_events", "gear_changes", "assist_modes",
    "trip_tags", "trip_notes", "weather", "device_info", "firmware_events", "user_stats",
)
EXTRA_COLUMNS = ["id", "trip_id", "timestamp", "value", "note"]

_EPOCH = datetime(1970, 1, 1, tzinfo=timezone.utc)


def iso_ms(ms: int) -> str:
    dt = _EPOCH + timedelta(milliseconds=ms)
    return dt.strftime("%Y-%m-%dT%H:%M:%S.") + f"{ms % 1000:03d}Z"


def _point(lat, lon, alt=None, ts=None, speed=None, user_id=None, row_id=None) -> dict:
    return {"latitude": lat, "longitude": lon, "altitude": alt, "timestamp_ms": ts, "speed": speed,
            "user_id": user_id, "row_id": row_id}


def empty_bundle(generation: str) -> dict:
    return {
        "generation": generation, "labels": {}, "profile": None, "bikes": [], "settings": None,
        "user_settings": None, "wifi": [], "bluetooth": [], "charts": [], "ebike": None, "trips": [],
        "nav": None, "analytics": [], "last_position": None, "planned_routes": [], "logs": [],
        "raw_leftovers": {}, "provenance": {}, "absent": [], "diagnostics": [],
    }


class _Writer:
    def __init__(self, root: Path):
        self.root = root
        self.files: dict[str, tuple[str, str]] = {}

    def write(self, rel: str, data, kind: str) -> None:
        path = self.root / rel
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(data.encode("utf-8") if isinstance(data, str) else data)
        self.files[rel] = (kind, path)

    def db(self, rel: str, kind: str, statements) -> None:
        path = self.root / rel
        path.parent.mkdir(parents=True, exist_ok=True)
        if path.exists():
            path.unlink()
        conn = sqlite3.connect(path)
        with conn:
            for sql, rows in statements:
                if rows is None:
                    conn.execute(sql)
                else:
                    conn.executemany(sql, rows)
        conn.close()
        self.files[rel] = (kind, path)

    def provenance(self) -> dict:
        out = {}
        for rel, (kind, path) in self.files.items():
            data = path.read_bytes()
            out[rel] = {"artifact": kind, "sha256": hashlib.sha256(data).hexdigest(), "size": len(data)}
        return out


def _log_files(w: _Writer, case: SyntheticCase, base: str) -> list:
    out = []
    for name in sorted(case.logs):
        text_lines, expected = [], []
        for n, (ts_s, msg) in enumerate(case.logs[name], 1):
            text_lines.append(f"{iso_ms(ts_s * 1000)} {msg}")
            expected.append({"line": n, "timestamp_ms": ts_s * 1000, "message": msg})
        cont = "    continuation without timestamp"
        text_lines.append(cont)
        expected.append({"line": len(text_lines), "timestamp_ms": None, "message": cont})
        rel = f"{base}/{name}"
        w.write(rel, "\n".join(text_lines) + "\n", "logs")
        out.append({"path": rel, "lines": expected})
    return out


# ----------------------------------------------------------------------------- gen1

def _emit_gen1(w: _Writer, case: SyntheticCase, exp: dict) -> None:
    uid = case.user["user_id"]
    udir = f"{GEN1_SETTINGS}/{uid}"
    u = case.user

    profile_doc = {
        "user_id": int(uid), "first_name": u["first_name"], "last_name": u["last_name"], "gender": u["gender"],
        "date_of_birth": u["date_of_birth"], "email": u["email"], "home_address": u["home_address"],
        "mobile_phone_number": u["mobile_phone_number"], "facebook": None, "twitter": None,
        "language": u["language"], "weight_kg": 72,
    }
    w.write(f"{udir}/userObject.json", json.dumps(profile_doc, indent=2), "userObject.json")
    exp["profile"] = {
        "user_id": uid, "first_name": u["first_name"], "last_name": u["last_name"], "gender": u["gender"],
        "date_of_birth": u["date_of_birth"], "email": u["email"], "home_address": u["home_address"],
        "mobile_phone_number": u["mobile_phone_number"], "social": {"facebook": None, "twitter": None},
        "extras": {"language": u["language"], "weight_kg": 72},
    }

    s = case.settings
    bike = case.bikes[0]
    pack = bike["batteryPacks"][0]["serialNumber"]
    ini = (
        "[General]\n"
        f"LastSync={s['last_sync']}\n"
        f"WifiToken={s['wifi_token']}\n"
        f"Brightness={s['brightness']}\n"
        "[Bike]\n"
        f"DriveUnitSerialNumber={bike['driveUnitSerialNumber']}\n"
        f"BatteryPackSerialNumber={pack}\n"
        "[Consent]\n"
        f"FitnessDataAllowed={s['fitness_allowed']}\n"
        f"GeoDataAllowed={s['geo_allowed']}\n"
    )
    w.write(f"{udir}/Settings.ini", ini, "Settings.ini")
    exp["settings"] = {
        "serials": {"DriveUnitSerialNumber": bike["driveUnitSerialNumber"], "BatteryPackSerialNumber": pack},
        "consent": {
            "FitnessDataAllowed": {"raw": str(s["fitness_allowed"]), "timestamp_ms": s["fitness_allowed"] * 1000},
            "GeoDataAllowed": {"raw": str(s["geo_allowed"]), "timestamp_ms": s["geo_allowed"] * 1000},
        },
        "wifi_token": s["wifi_token"],
        "last_sync_raw": s["last_sync"],
        "extras": {"General/Brightness": str(s["brightness"])},
    }

    _emit_ebike(w, case, udir, exp)
    _emit_charts(w, case, udir, exp)

    gpx_dir = f"{udir}/gpx"
    (w.root / gpx_dir).mkdir(parents=True, exist_ok=True)
    for k, route in enumerate(case.routes, 1):
        rel = f"{gpx_dir}/route_{k}.gpx"
        pts = "".join(f'    <rtept lat="{lat!r}" lon="{lon!r}"/>\n' for lat, lon in route["points"])
        doc = (
            '<?xml version="1.0" encoding="UTF-8"?>\n'
            '<gpx version="1.1" creator="bui" xmlns="http://www.topografix.com/GPX/1/1">\n'
            f'  <rte>\n    <name>{route["name"]}</name>\n{pts}  </rte>\n</gpx>\n'
        )
        w.write(rel, doc, "gpx")
        exp["planned_routes"].append({
            "name": route["name"], "path": rel,
            "points": [_point(lat, lon) for lat, lon in route["points"]],
        })

    (w.root / CONNMAN).mkdir(parents=True, exist_ok=True)
    services = []
    for net in case.wifi:
        hexssid = net["ssid"].encode("utf-8").hex()
        service = f"wifi_{net['bssid']}_{hexssid}_managed_psk"
        modified = iso_ms(net["modified_ms"])
        settings = {
            "SSID": hexssid, "Frequency": str(net["frequency"]), "Favorite": "true", "AutoConnect": "true",
            "IPv4.method": "dhcp", "IPv4.DHCP.LastAddress": net["last_address"], "IPv6.method": "auto",
        }
        body = [f"[{service}]", f"Name={net['ssid']}", f"SSID={hexssid}", f"Frequency={net['frequency']}",
                "Favorite=true", "AutoConnect=true", f"Modified={modified}", f"Passphrase={net['psk']}",
                "IPv4.method=dhcp", f"IPv4.DHCP.LastAddress={net['last_address']}", "IPv6.method=auto"]
        rel = f"{CONNMAN}/{service}/settings"
        w.write(rel, "\n".join(body) + "\n", "connman")
        services.append((service, {
            "ssid": net["ssid"], "passphrase": net["psk"], "security": "psk",
            "settings": dict(settings, Modified=modified), "last_modified_ms": net["modified_ms"],
            "generation": GEN1, "path": rel,
        }))
    exp["wifi"] = [e for _, e in sorted(services, key=lambda x: x[0])]

    (w.root / BLUEGO).mkdir(parents=True, exist_ok=True)
    devices = []
    for dev in case.bluetooth:
        fname = dev["address"].replace(":", "_")
        body = ["[General]", f"Address={dev['address']}", f"Name={dev['name']}",
                f"Trusted={'true' if dev['trusted'] else 'false'}", f"LastSeen={dev['seen_s']}",
                f"Class={dev['class']}", "Paired=true"]
        rel = f"{BLUEGO}/{fname}"
        w.write(rel, "\n".join(body) + "\n", "bluego")
        devices.append((fname, {
            "address": dev["address"], "name": dev["name"], "trusted": dev["trusted"], "source": "bluego",
            "observed_at_ms": dev["seen_s"] * 1000, "path": rel,
            "extras": {"Class": dev["class"], "Paired": "true"},
        }))
    exp["bluetooth"] = [e for _, e in sorted(devices, key=lambda x: x[0])]

    exp["logs"] = _log_files(w, case, GEN1_LOGS)


def _emit_ebike(w: _Writer, case: SyntheticCase, udir: str, exp: dict) -> None:
    uid = case.user["user_id"]
    du_serial = case.bikes[0]["driveUnitSerialNumber"]
    pack = case.bikes[0]["batteryPacks"][0]["serialNumber"]
    act, amb, bat, du, op, drv, loc = [], [], [], [], [], [], []
    e = {k: [] for k in ("activities", "ambient", "bike_battery", "drive_unit", "operational", "driver")}
    e_loc = []
    for trip in case.trips:
        pts = trip["points"]
        act.append((uid, trip["start"], trip["end"], trip["distance"], trip["calories"], trip["max_speed"], du_serial))
        e["activities"].append({
            "row_id": len(act), "user_id": uid, "time_stamp": trip["start"], "stop_time": trip["end"],
            "distance": trip["distance"], "calories": trip["calories"], "max_speed": trip["max_speed"],
            "drive_unit_serial": du_serial, "timestamp_ms": trip["start"] * 1000,
        })
        for ts, soc in ((trip["start"], trip["soc_start"]), (trip["end"], trip["soc_end"])):
            amb.append((ts, trip["temperature"], trip["air_pressure"]))
            e["ambient"].append({"row_id": len(amb), "time_stamp": ts, "temperature": trip["temperature"],
                                 "air_pressure": trip["air_pressure"], "timestamp_ms": ts * 1000})
            bat.append((ts, soc, pack))
            e["bike_battery"].append({"row_id": len(bat), "time_stamp": ts, "state_of_charge": soc,
                                      "battery_serial": pack, "timestamp_ms": ts * 1000})
            op.append((ts, 1))
            e["operational"].append({"row_id": len(op), "time_stamp": ts, "bui_operational": True,
                                     "timestamp_ms": ts * 1000})
        odo = trip["odometer_start"]
        for i, p in enumerate(pts):
            if i:
                odo = round(odo + distance_m(pts[i - 1]["lat"], pts[i - 1]["lon"], p["lat"], p["lon"]), 1)
            speed_kmh = round(p["speed"] * 3.6, 2)
            torque = 10 + (i * 7) % 40
            power = 50 + (i * 13) % 300
            du.append((p["t"], 1 if i else 0, odo, speed_kmh, torque, power))
            e["drive_unit"].append({"row_id": len(du), "time_stamp": p["t"], "is_moving": bool(i), "odometer": odo,
                                    "speed": speed_kmh, "torque": torque, "power": power,
                                    "timestamp_ms": p["t"] * 1000})
            hr, cad = trip["heart_rates"][i], trip["cadences"][i]
            drv.append((p["t"], hr, cad, torque, power))
            e["driver"].append({"row_id": len(drv), "time_stamp": p["t"], "heart_rate": hr, "driver_cadence": cad,
                                "driver_torque": torque, "driver_power": power, "timestamp_ms": p["t"] * 1000})
            loc.append((uid, p["t"], p["lat"], p["lon"], p["alt"]))
            e_loc.append(_point(p["lat"], p["lon"], p["alt"], p["t"] * 1000, None, uid, len(loc)))
    payload = hashlib.sha256(f"sync-{case.seed}".encode()).digest()[:12]
    sync_ts = case.trips[-1]["end"] + 60 if case.trips else 1_672_531_200
    w.db(f"{udir}/EBike", "EBike", [
        ("CREATE TABLE Activities (UserId TEXT, TimeStamp INTEGER, StopTime INTEGER, Distance REAL, "
         "Calories INTEGER, MaxSpeed REAL, DriveUnitSerial TEXT)", None),
        ("INSERT INTO Activities VALUES (?,?,?,?,?,?,?)", act),
        ("CREATE TABLE AmbientData (TimeStamp INTEGER, Temperature REAL, AirPressure REAL)", None),
        ("INSERT INTO AmbientData VALUES (?,?,?)", amb),
        ("CREATE TABLE BikeBattery (TimeStamp INTEGER, StateOfCharge INTEGER, BatterySerial TEXT)", None),
        ("INSERT INTO BikeBattery VALUES (?,?,?)", bat),
        ("CREATE TABLE DriveUnit (TimeStamp INTEGER, IsMoving INTEGER, Odometer REAL, Speed REAL, "
         "Torque INTEGER, Power INTEGER)", None),
        ("INSERT INTO DriveUnit VALUES (?,?,?,?,?,?)", du),
        ("CREATE TABLE Operational (TimeStamp INTEGER, BuiOperational INTEGER)", None),
        ("INSERT INTO Operational VALUES (?,?)", op),
        ("CREATE TABLE Driver (TimeStamp INTEGER, HeartRate INTEGER, DriverCadence INTEGER, "
         "DriverTorque INTEGER, DriverPower INTEGER)", None),
        ("INSERT INTO Driver VALUES (?,?,?,?,?)", drv),
        ("CREATE TABLE Localization (UserId TEXT, TimeStamp INTEGER, Latitude REAL, Longitude REAL, "
         "SensorAltitude REAL)", None),
        ("INSERT INTO Localization VALUES (?,?,?,?,?)", loc),
        ("CREATE TABLE SyncQueue (Id INTEGER PRIMARY KEY, Payload BLOB, Created INTEGER)", None),
        ("INSERT INTO SyncQueue VALUES (?,?,?)", [(1, payload, sync_ts)]),
    ])
    ebike = dict(e, localization=e_loc)
    ebike["tables"] = {k: len(v) for k, v in ebike.items()}
    exp["ebike"] = ebike
    exp["raw_leftovers"][f"{udir}/EBike"] = {"SyncQueue": {
        "columns": ["Id", "Payload", "Created"], "row_count": 1,
        "rows": [{"Id": 1, "Payload": "hex:" + payload.hex(), "Created": sync_ts}],
    }}


def _emit_charts(w: _Writer, case: SyntheticCase, udir: str, exp: dict) -> None:
    uid = case.user["user_id"]
    rows, expected = [], []
    for n, r in enumerate(case.charts, 1):
        rows.append((uid, r["nt"], r["altitude"], r["speed"], r["cadence"], r["heart_rate"], r["soc"],
                     r["consumption"], r["power"]))
        expected.append({
            "user_id": uid, "nt_distance": r["nt"], "altitude": r["altitude"], "speed": r["speed"],
            "driver_cadence": r["cadence"], "heart_rate": r["heart_rate"], "state_of_charge": r["soc"],
            "consumption": r["consumption"], "power": r["power"], "row_id": n, "extras": {},
        })
    w.db(f"{udir}/EBikeCharts", "EBikeCharts", [
        ("CREATE TABLE ChartsData (UserId TEXT, NTDistance INTEGER, Altitude REAL, Speed REAL, "
         "driverCadence INTEGER, heartRate INTEGER, stateOfCharge INTEGER, Consumption REAL, Power INTEGER)", None),
        ("INSERT INTO ChartsData VALUES (?,?,?,?,?,?,?,?,?)", rows),
    ])
    exp["charts"] = expected


# ----------------------------------------------------------------------------- gen2

def _emit_gen2(w: _Writer, case: SyntheticCase, exp: dict) -> None:
    u = case.user
    account = {
        "userId": u["user_id"], "firstName": u["first_name"], "lastName": u["last_name"], "gender": u["gender"],
        "dateOfBirth": u["date_of_birth"], "email": u["email"], "address": u["home_address"],
        "phoneNumber": u["mobile_phone_number"], "locale": u["language"],
    }
    w.write(f"{GEN2_DB}/active-account.json", json.dumps(account), "active-account.json")
    exp["profile"] = {
        "user_id": u["user_id"], "first_name": u["first_name"], "last_name": u["last_name"], "gender": u["gender"],
        "date_of_birth": u["date_of_birth"], "email": u["email"], "home_address": u["home_address"],
        "mobile_phone_number": u["mobile_phone_number"], "social": {}, "extras": {"locale": u["language"]},
    }

    stmts, counts = [], {}
    for table in USER_SETTINGS_TABLES:
        stmts.append((f"CREATE TABLE {table} (id INTEGER PRIMARY KEY, stored_setting TEXT, value TEXT)", None))
        rows = case.user_settings.get(table, [])
        if table == "settings_meta":
            rows = [("schema_version", "7")]
        stmts.append((f"INSERT INTO {table} (stored_setting, value) VALUES (?,?)", rows))
        counts[table] = len(rows)
    w.db(f"{GEN2_DB}/user-settings.db", "user-settings.db", stmts)
    exp["user_settings"] = {
        "settings_app": [{"key": k, "value": v} for k, v in case.user_settings["settings_app"]],
        "settings_system": [{"key": k, "value": v} for k, v in case.user_settings["settings_system"]],
        "tables": counts,
    }

    w.write(f"{GEN2_DB}/bike-info.json", json.dumps(case.bikes, indent=1), "bike-info.json")
    exp["bikes"] = [{
        "serials": {k: b[k] for k in ("frameNumber", "driveUnitSerialNumber", "driveUnitPartNumber",
                                      "remoteControlSerialNumber")},
        "software_version": b["softwareVersion"], "hardware_version": b["hardwareVersion"],
        "battery_packs": b["batteryPacks"], "extras": {"bikeId": b["bikeId"], "productName": b["productName"]},
    } for b in case.bikes]

    _emit_nav(w, case, exp)
    _emit_tracking(w, case, exp)

    rows, events = [], []
    for ts, kind, params in case.analytics:
        raw = json.dumps(params) if params is not None else None
        rows.append((ts, kind, raw))
        events.append({"kind": kind, "timestamp_ms": ts, "params": params, "raw_params": raw,
                       "row_id": len(rows), "extras": {}})
    w.db(ANALYTICS, "analytics.db", [
        ("CREATE TABLE analytics_events (id INTEGER PRIMARY KEY, timestamp INTEGER, event TEXT, params TEXT)", None),
        ("INSERT INTO analytics_events (timestamp, event, params) VALUES (?,?,?)", rows),
    ])
    exp["analytics"] = events

    lines, devices = [], []
    t0 = case.logs["system.log"][0][0] * 1000
    lines.append(f"{iso_ms(t0)} [cef] renderer started pid=311")
    for k, dev in enumerate(case.bluetooth):
        ts = t0 + 1000 * (k + 1)
        lines.append(f'{iso_ms(ts)} [bt] discovered address={dev["address"]} name="{dev["name"]}" rssi=-61')
        devices.append({"address": dev["address"], "name": dev["name"], "trusted": None, "source": "cef_log",
                        "observed_at_ms": ts, "path": CEF_LOG, "extras": {"line": len(lines), "event": "discovered"}})
        if dev["trusted"]:
            ts += 500
            lines.append(f"{iso_ms(ts)} [bt] trusted address={dev['address']} trusted=true")
            devices.append({"address": dev["address"], "name": None, "trusted": True, "source": "cef_log",
                            "observed_at_ms": ts, "path": CEF_LOG, "extras": {"line": len(lines), "event": "trusted"}})
        lines.append(f"{iso_ms(ts + 100)} [cef] page loaded url=app://home")
    w.write(CEF_LOG, "\n".join(lines) + "\n", "cef_debug.log")
    exp["bluetooth"] = devices

    exp["logs"] = _log_files(w, case, GEN2_LOGS)

    wifi_doc = {"version": 2, "networks": [
        {"id": f'"{n["ssid"]}"', "psk": n["psk"], "security": n["security"], "hidden": False, "priority": k}
        for k, n in enumerate(case.wifi)
    ]}
    w.write(WIFI_JSON, json.dumps(wifi_doc, indent=2, ensure_ascii=False), "WifiManagerSettings.json")
    exp["wifi"] = [{
        "ssid": n["ssid"], "passphrase": n["psk"], "security": n["security"],
        "settings": {"hidden": False, "priority": k}, "last_modified_ms": None, "generation": GEN2, "path": WIFI_JSON,
    } for k, n in enumerate(case.wifi)]

    lp = case.last_position
    gnss = {"lastPosition": {k: lp[k] for k in ("latitude", "longitude", "altitude", "speed", "timestamp", "accuracy")},
            "assistedGps": True, "constellations": ["GPS", "GALILEO"]}
    w.write(GNSS_JSON, json.dumps(gnss, indent=2), "gnssSettings.json")
    exp["last_position"] = {
        "latitude": lp["latitude"], "longitude": lp["longitude"], "altitude": lp["altitude"], "speed": lp["speed"],
        "timestamp": lp["timestamp"], "instant": iso_ms(lp["timestamp"]), "extras": {"accuracy": lp["accuracy"]},
        "settings": {"assistedGps": True, "constellations": ["GPS", "GALILEO"]},
    }


def _emit_nav(w: _Writer, case: SyntheticCase, exp: dict) -> None:
    nav = case.nav
    cons = [(json.dumps(v),) for v in nav["consumptions"]]
    locs = [(x["name"], x["lat"], x["lon"], x["modified"]) for x in nav["locations"]]
    routes = [(r["name"], json.dumps(r["points"]), r["modified"]) for r in nav["routes"]]
    recents = [(r["name"], r["lat"], r["lon"], r["timestamp"]) for r in nav["recents"]]
    w.db(f"{GEN2_DB}/NavStorage.sqlite", "NavStorage.sqlite", [
        ("CREATE TABLE Consumptions (id INTEGER PRIMARY KEY, vector TEXT)", None),
        ("INSERT INTO Consumptions (vector) VALUES (?)", cons),
        ("CREATE TABLE Locations (id INTEGER PRIMARY KEY, name TEXT, latitude REAL, longitude REAL, modified INTEGER)",
         None),
        ("INSERT INTO Locations (name, latitude, longitude, modified) VALUES (?,?,?,?)", locs),
        ("CREATE TABLE Routes (id INTEGER PRIMARY KEY, name TEXT, waypoints TEXT, modified INTEGER)", None),
        ("INSERT INTO Routes (name, waypoints, modified) VALUES (?,?,?)", routes),
        ("CREATE TABLE Recents (id INTEGER PRIMARY KEY, name TEXT, latitude REAL, longitude REAL, timestamp INTEGER)",
         None),
        ("INSERT INTO Recents (name, latitude, longitude, timestamp) VALUES (?,?,?,?)", recents),
    ])
    exp["nav"] = {
        "consumptions": [{"id": i, "vector": v, "extras": {}} for i, v in enumerate(nav["consumptions"], 1)],
        "locations": [{"id": i, "name": x["name"], "latitude": x["lat"], "longitude": x["lon"],
                       "modified": x["modified"], "modified_ms": x["modified"] * 1000, "extras": {}}
                      for i, x in enumerate(nav["locations"], 1)],
        "routes": [{"id": i, "name": r["name"], "points": r["points"], "modified": r["modified"],
                    "modified_ms": r["modified"] * 1000, "extras": {}} for i, r in enumerate(nav["routes"], 1)],
        "recents": [{"id": i, "name": r["name"], "latitude": r["lat"], "longitude": r["lon"],
                     "timestamp": r["timestamp"], "timestamp_ms": r["timestamp"] * 1000, "extras": {}}
                    for i, r in enumerate(nav["recents"], 1)],
    }


def _emit_tracking(w: _Writer, case: SyntheticCase, exp: dict) -> None:
    summary, locs, drivers, trips = [], [], [], []
    extra_rows = {t: [] for t in TRACKING_EXTRA_TABLES}
    for trip in case.trips:
        odo = trip["odometer_start"]
        summary.append((trip["id"], trip["start"], trip["end"], trip["distance"], odo, trip["max_speed"],
                        trip["avg_speed"], trip["calories"]))
        points, driver = [], []
        for i, p in enumerate(trip["points"]):
            locs.append((len(locs) + 1, trip["id"], p["t"], p["lat"], p["lon"], p["alt"], p["speed"]))
            points.append(_point(p["lat"], p["lon"], p["alt"], p["t"], p["speed"], None, len(locs)))
            if i % 3 == 0:
                hr, cad = trip["heart_rates"][i], trip["cadences"][i]
                drivers.append((len(drivers) + 1, trip["id"], p["t"], hr, cad))
                driver.append({"timestamp_ms": p["t"], "id": len(drivers), "heart_rate": hr, "cadence": cad})
        trips.append({
            "trip_id": trip["id"], "start_ms": trip["start"], "end_ms": trip["end"], "distance_m": trip["distance"],
            "odometer_m": odo, "points": points, "driver": driver,
            "extras": {"max_speed": trip["max_speed"], "avg_speed": trip["avg_speed"], "calories": trip["calories"]},
        })
        for table, value in (("trip_ambient", trip["temperature"]), ("trip_battery", float(trip["soc_start"]))):
            rows = extra_rows[table]
            rows.append((len(rows) + 1, trip["id"], trip["start"], value, None))
        extra_rows["trip_tags"].append((len(extra_rows["trip_tags"]) + 1, trip["id"], trip["start"], None, "commute"))
    extra_rows["device_info"].append((1, None, None, None, case.bikes[0]["softwareVersion"]))

    stmts = [
        ("CREATE TABLE trip_summary (id INTEGER PRIMARY KEY, start_time INTEGER, end_time INTEGER, distance REAL, "
         "odometer REAL, max_speed REAL, avg_speed REAL, calories INTEGER)", None),
        ("INSERT INTO trip_summary VALUES (?,?,?,?,?,?,?,?)", summary),
        ("CREATE TABLE trip_location (id INTEGER PRIMARY KEY, trip_id INTEGER, timestamp INTEGER, latitude REAL, "
         "longitude REAL, altitude REAL, speed REAL)", None),
        ("INSERT INTO trip_location VALUES (?,?,?,?,?,?,?)", locs),
        ("CREATE TABLE trip_driver (id INTEGER PRIMARY KEY, trip_id INTEGER, timestamp INTEGER, heart_rate INTEGER, "
         "cadence INTEGER)", None),
        ("INSERT INTO trip_driver VALUES (?,?,?,?,?)", drivers),
    ]
    leftovers = {}
    for table in TRACKING_EXTRA_TABLES:
        stmts.append((f"CREATE TABLE {table} (id INTEGER PRIMARY KEY, trip_id INTEGER, timestamp INTEGER, "
                      "value REAL, note TEXT)", None))
        stmts.append((f"INSERT INTO {table} VALUES (?,?,?,?,?)", extra_rows[table]))
        leftovers[table] = {"columns": list(EXTRA_COLUMNS), "row_count": len(extra_rows[table]),
                            "rows": [dict(zip(EXTRA_COLUMNS, r)) for r in extra_rows[table]]}
    rel = f"{GEN2_DB}/tracking.db"
    w.db(rel, "tracking.db", stmts)
    exp["trips"] = sorted(trips, key=lambda t: t["start_ms"])
    exp["raw_leftovers"][rel] = leftovers


# ----------------------------------------------------------------------------- entry point

def emit_tree(case: SyntheticCase, out) -> tuple:
    """Write ``case`` under ``out``; returns (root path, manifest dict).

    The manifest holds the expected bundle (canonical JSON friendly), per-file
    digests and a few counts.
    """
    root = Path(out)
    root.mkdir(parents=True, exist_ok=True)
    w = _Writer(root)
    exp = empty_bundle(case.generation)
    if case.generation == GEN1:
        _emit_gen1(w, case, exp)
    elif case.generation == GEN2:
        _emit_gen2(w, case, exp)
    else:
        raise ValueError(f"unknown generation {case.generation!r}")
    exp["provenance"] = w.provenance()
    manifest = {
        "seed": case.seed,
        "generation": case.generation,
        "expected_bundle": exp,
        "digests": {rel: meta["sha256"] for rel, meta in exp["provenance"].items()},
        "counts": {
            "trips_generated": case.trips_generated,
            "trips_retained": len(case.trips),
            "points": sum(len(t["points"]) for t in case.trips),
            "wifi": len(case.wifi),
            "bluetooth": len(case.bluetooth),
        },
    }
    return root, manifest
