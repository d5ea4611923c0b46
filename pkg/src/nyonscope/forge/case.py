"""Deterministic synthetic cases (the ground truth every fixture is built from)."""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from typing import Optional

GEN1 = "gen1"
GEN2 = "gen2"

# lat_min, lon_min, lat_max, lon_max
DEFAULT_BBOX = (47.6, 8.8, 48.4, 9.8)
BASE_EPOCH_S = 1_672_531_200  # 2023-01-01T00:00:00Z
EARTH_RADIUS_M = 6_371_008.8
MAX_RETAINED_TRIPS = 100

FIRST_NAMES = ("Jane", "John", "Alex", "Maria", "Lena", "Tom", "Sara", "Jonas")
LAST_NAMES = ("Doe", "Miller", "Schmidt", "Weber", "Fischer", "Wagner", "Becker")
STREETS = ("Hauptstrasse", "Bahnhofstrasse", "Gartenweg", "Lindenallee", "Schillerplatz")
CITIES = ("Stuttgart", "Tuebingen", "Esslingen", "Reutlingen", "Boeblingen")
SSIDS = ("HomeNet", "Galaxy Note10+0c95", "CafeFree", "Office-5G", "FritzBox 7590", "iPhone von Jane")
BT_NAMES = ("Pixel 7", "Jane's iPhone", "Garmin HRM", "Galaxy Buds", "Polar H10", "Bose QC")
PLACES = ("Home", "Work", "Bakery", "Lake", "Gym", "Station")
EBIKE_TABLES = ("Activities", "AmbientData", "BikeBattery", "DriveUnit", "Operational", "Driver", "Localization")
ANALYTICS_KINDS = ("BUI350_SYSTEM_WAKEUP", "BUI350_BOOT_INFO", "BUI350_START_NAVIGATION", "BUI350_TRIP_RESET")


def distance_m(lat1, lon1, lat2, lon2) -> float:
    p1, p2 = math.radians(lat1), math.radians(lat2)
    dp, dl = p2 - p1, math.radians(lon2 - lon1)
    a = math.sin(dp / 2) ** 2 + math.cos(p1) * math.cos(p2) * math.sin(dl / 2) ** 2
    return 2 * EARTH_RADIUS_M * math.asin(min(1.0, math.sqrt(a)))


@dataclass
class SyntheticCase:
    seed: int
    generation: str
    user: dict
    bikes: list
    trips: list
    trips_generated: int
    wifi: list
    bluetooth: list
    charts: list = field(default_factory=list)
    settings: dict = field(default_factory=dict)
    routes: list = field(default_factory=list)
    analytics: list = field(default_factory=list)
    nav: dict = field(default_factory=dict)
    user_settings: dict = field(default_factory=dict)
    last_position: Optional[dict] = None
    logs: dict = field(default_factory=dict)
    tamper: Optional[dict] = None
    bbox: tuple = DEFAULT_BBOX

    @property
    def ebike_tables(self) -> tuple:
        """Decoded EBike tables a gen-1 case populates (empty for gen2)."""
        return EBIKE_TABLES if self.generation == GEN1 else ()


def _mac(rng: random.Random) -> str:
    return ":".join(f"{rng.randrange(256):02X}" for _ in range(6))


def _serial(rng: random.Random, prefix: str) -> str:
    return f"{prefix}{rng.randrange(10**9, 10**10)}"


def _trip_points(rng, bbox, start, n, gen):
    """Points moving at 3-8 m/s; gen1 times in whole seconds, gen2 in milliseconds."""
    lat = rng.uniform(bbox[0] + 0.05, bbox[2] - 0.05)
    lon = rng.uniform(bbox[1] + 0.05, bbox[3] - 0.05)
    alt = round(rng.uniform(250, 450), 1)
    heading = rng.uniform(0, 2 * math.pi)
    t = start
    points = []
    for i in range(n):
        if i:
            dt_s = rng.randint(4, 9) if gen == GEN1 else rng.randint(4000, 9000) / 1000
            speed = rng.uniform(3.0, 8.0)
            heading += rng.uniform(-0.3, 0.3)
            step = speed * dt_s
            nlat = round(lat + step * math.cos(heading) / 111_320, 7)
            nlon = round(lon + step * math.sin(heading) / (111_320 * math.cos(math.radians(lat))), 7)
            if not (bbox[0] <= nlat <= bbox[2] and bbox[1] <= nlon <= bbox[3]):
                heading += math.pi
                nlat = round(lat - step * math.cos(heading - math.pi) / 111_320, 7)
                nlon = round(lon - step * math.sin(heading - math.pi) / (111_320 * math.cos(math.radians(lat))), 7)
            real = distance_m(lat, lon, nlat, nlon)
            lat, lon = nlat, nlon
            alt = round(alt + rng.uniform(-2, 2), 1)
            t = t + (int(dt_s) if gen == GEN1 else int(round(dt_s * 1000)))
            rec_speed = round(real / dt_s, 3)
        else:
            rec_speed = 0.0
        points.append({"lat": round(lat, 7), "lon": round(lon, 7), "alt": alt, "t": t, "speed": rec_speed})
    return points


def _path_length(points) -> float:
    return sum((distance_m(a["lat"], a["lon"], b["lat"], b["lon"]) for a, b in zip(points, points[1:])), 0.0)


def forge_case(seed: int, generation: str = GEN1, trips: int = 3, points_per_trip: int = 12,
               wifi: int = 2, bluetooth: int = 2, routes: int = 1, bbox=DEFAULT_BBOX) -> SyntheticCase:
    if generation not in (GEN1, GEN2):
        raise ValueError(f"unknown generation {generation!r}")
    if trips < 0 or points_per_trip < 1:
        raise ValueError("trips must be >= 0 and points_per_trip >= 1")
    rng = random.Random(f"nyonscope-{generation}-{seed}")
    first, last = rng.choice(FIRST_NAMES), rng.choice(LAST_NAMES)
    user = {
        "user_id": str(rng.randrange(10**12, 10**13)),
        "first_name": first,
        "last_name": last,
        "gender": rng.choice(("female", "male", "diverse")),
        "date_of_birth": f"{rng.randint(1950, 2005)}-{rng.randint(1, 12):02d}-{rng.randint(1, 28):02d}",
        "email": f"{first.lower()}{last.lower()}{rng.randint(1, 99)}@example.com",
        "home_address": {
            "street": f"{rng.choice(STREETS)} {rng.randint(1, 120)}",
            "zip": f"{rng.randint(70000, 72999)}",
            "city": rng.choice(CITIES),
            "country": "DE",
        },
        "mobile_phone_number": f"+49170{rng.randrange(10**6, 10**7)}",
        "language": rng.choice(("de", "en")),
    }
    bikes = []
    for b in range(1 if generation == GEN1 else rng.randint(1, 2)):
        bikes.append({
            "bikeId": f"bike-{b + 1}",
            "productName": rng.choice(("Performance Line CX", "Active Line Plus", "Cargo Line")),
            "frameNumber": _serial(rng, "WBF"),
            "driveUnitSerialNumber": _serial(rng, "DU"),
            "driveUnitPartNumber": f"0275007{rng.randint(100, 999)}",
            "remoteControlSerialNumber": _serial(rng, "RC"),
            "softwareVersion": f"{rng.randint(1, 9)}.{rng.randint(0, 20)}.{rng.randint(0, 9)}",
            "hardwareVersion": f"HW{rng.randint(1, 5)}.{rng.randint(0, 9)}",
            "batteryPacks": [
                {"serialNumber": _serial(rng, "BP"), "partNumber": f"0275007{rng.randint(500, 599)}",
                 "capacityWh": rng.choice((400, 500, 625, 750)), "chargeCycles": rng.randint(0, 400)}
                for _ in range(rng.randint(1, 2))
            ],
        })

    trip_list = []
    day = BASE_EPOCH_S + rng.randint(0, 150) * 86400
    odometer = round(rng.uniform(100_000, 2_000_000), 1)
    for i in range(trips):
        day += 86400 + rng.randint(0, 3600 * 6)
        start = day if generation == GEN1 else day * 1000 + rng.randint(0, 999)
        pts = _trip_points(rng, bbox, start, points_per_trip, generation)
        length = round(_path_length(pts), 1)
        trip = {
            "id": i + 1,
            "start": pts[0]["t"],
            "end": pts[-1]["t"],
            "distance": length,
            "odometer_start": odometer,
            "points": pts,
            "calories": rng.randint(20, 900),
            "max_speed": round(max(p["speed"] for p in pts) * 3.6, 2),
            "avg_speed": round(rng.uniform(12, 25), 2),
            "temperature": round(rng.uniform(-5, 32), 1),
            "air_pressure": round(rng.uniform(950, 1040), 1),
            "soc_start": rng.randint(60, 100),
            "soc_end": rng.randint(10, 59),
            "heart_rates": [rng.randint(80, 170) for _ in pts],
            "cadences": [rng.randint(50, 95) for _ in pts],
        }
        # per-point rounding in the drive-unit rows can overshoot the trip length slightly
        odometer = round(odometer + length + 0.1 * len(pts) + rng.uniform(1, 50), 1)
        trip_list.append(trip)
    generated = len(trip_list)
    if generation == GEN2 and generated > MAX_RETAINED_TRIPS:
        trip_list = trip_list[-MAX_RETAINED_TRIPS:]

    wifi_list = []
    for i in range(wifi):
        ssid = SSIDS[(rng.randrange(len(SSIDS)) + i) % len(SSIDS)] + ("" if i < len(SSIDS) else f"-{i}")
        wifi_list.append({
            "ssid": ssid if all(ssid != w["ssid"] for w in wifi_list) else f"{ssid}-{i}",
            "psk": "".join(rng.choice("abcdefghjkmnpqrstuvwxyz23456789") for _ in range(12)),
            "security": "WPA2",
            "bssid": _mac(rng).replace(":", "").lower(),
            "modified_ms": (BASE_EPOCH_S + rng.randint(0, 200 * 86400)) * 1000 + rng.randint(0, 999),
            "frequency": rng.choice((2412, 2437, 2462, 5180, 5240)),
            "last_address": f"192.168.{rng.randint(0, 5)}.{rng.randint(2, 250)}",
        })
    bt_list = []
    for i in range(bluetooth):
        bt_list.append({
            "address": _mac(rng),
            "name": rng.choice(BT_NAMES),
            "trusted": rng.random() < 0.5,
            "seen_s": BASE_EPOCH_S + rng.randint(0, 200 * 86400),
            "class": f"0x{rng.randrange(0x200000, 0x5fffff):06x}",
        })

    case = SyntheticCase(
        seed=seed, generation=generation, user=user, bikes=bikes, trips=trip_list, trips_generated=generated,
        wifi=wifi_list, bluetooth=bt_list, bbox=tuple(bbox),
    )
    log_base = (day + 3600) if trip_list else BASE_EPOCH_S
    case.logs = {
        "system.log": [(log_base + 10 * k, msg) for k, msg in enumerate(
            ("kernel: mmc0 new HS200 MMC card", "systemd: Started Main application", "usb: diagnostics idle"))],
        "wifi.log" if generation == GEN2 else "bluetooth.log": [
            (log_base + 60 + 5 * k, f"link event {k} state={rng.choice(('up', 'down'))}") for k in range(3)],
    }

    if generation == GEN1:
        rows = []
        nt = 25 * rng.randint(2000, 3000)
        for trip in trip_list:
            for _ in range(max(2, len(trip["points"]))):
                rows.append({
                    "nt": nt,
                    "altitude": round(rng.uniform(250, 450), 1),
                    "speed": round(rng.uniform(10, 30), 2),
                    "cadence": rng.randint(50, 95),
                    "heart_rate": rng.randint(80, 170),
                    "soc": rng.randint(10, 100),
                    "consumption": round(rng.uniform(1, 20), 2),
                    "power": rng.randint(50, 400),
                })
                nt += 25
        case.charts = rows
        case.settings = {
            "last_sync": "@Variant(\\0\\0\\0\\x10\\0%\\x83\\x1f\\x2\\x1b\\xe2\\xf8\\0)",
            "wifi_token": "".join(rng.choice("0123456789abcdef") for _ in range(32)),
            "fitness_allowed": BASE_EPOCH_S + rng.randint(0, 86400 * 30),
            "geo_allowed": BASE_EPOCH_S + rng.randint(0, 86400 * 30),
            "brightness": rng.randint(10, 100),
        }
        for r in range(routes):
            pts = _trip_points(rng, bbox, 0, 5, GEN1)
            case.routes.append({"name": f"Planned route {r + 1}", "points": [(p["lat"], p["lon"]) for p in pts]})
    else:
        events = []
        for trip in trip_list:
            events.append((trip["start"] - 30_000, "BUI350_SYSTEM_WAKEUP", None))
            events.append((trip["start"] - 20_000, "BUI350_BOOT_INFO", {"sw": case.bikes[0]["softwareVersion"]}))
            if rng.random() < 0.5:
                events.append((trip["start"] - 10_000, "BUI350_START_NAVIGATION", None))
            mins = (trip["end"] - trip["start"]) // 60_000
            secs = ((trip["end"] - trip["start"]) // 1000) % 60
            events.append((trip["end"] + 5_000, "BUI350_TRIP_RESET", {"duration": f"{mins}:{secs:02d}"}))
        case.analytics = events
        locs = []
        for k in range(rng.randint(1, 3)):
            locs.append({
                "name": PLACES[k],
                "lat": round(rng.uniform(bbox[0], bbox[2]), 6),
                "lon": round(rng.uniform(bbox[1], bbox[3]), 6),
                "modified": BASE_EPOCH_S + rng.randint(0, 200 * 86400),
            })
        route_pts = _trip_points(rng, bbox, 0, 4, GEN1)
        case.nav = {
            "consumptions": [[round(rng.uniform(0, 30), 3) for _ in range(4)] for _ in range(2)],
            "locations": locs,
            "routes": [{"name": "To " + locs[0]["name"], "points": [[p["lat"], p["lon"]] for p in route_pts],
                        "modified": BASE_EPOCH_S + rng.randint(0, 200 * 86400)}],
            "recents": [{"name": locs[-1]["name"], "lat": locs[-1]["lat"], "lon": locs[-1]["lon"],
                         "timestamp": BASE_EPOCH_S + rng.randint(0, 200 * 86400)}],
        }
        case.user_settings = {
            "settings_app": [("battery_level", str(rng.randint(5, 100))), ("developer_mode", rng.choice(("true", "false"))),
                             ("brightness", str(rng.randint(10, 100)))],
            "settings_system": [("language", user["language"]), ("unit_system", "metric"),
                                ("goal_weekly_km", str(rng.choice((50, 75, 100, 150)))),
                                ("goal_monthly_kcal", str(rng.choice((2000, 5000, 8000))))],
        }
        if trip_list:
            lp = trip_list[-1]["points"][-1]
            case.last_position = {"latitude": lp["lat"], "longitude": lp["lon"], "altitude": lp["alt"],
                                  "speed": lp["speed"], "timestamp": trip_list[-1]["end"] + 1000,
                                  "accuracy": round(rng.uniform(2, 15), 1)}
        else:
            case.last_position = {"latitude": round(rng.uniform(bbox[0], bbox[2]), 6),
                                  "longitude": round(rng.uniform(bbox[1], bbox[3]), 6),
                                  "altitude": 311.0, "speed": 0.0,
                                  "timestamp": (BASE_EPOCH_S + 86400) * 1000, "accuracy": 5.0}
    return case
