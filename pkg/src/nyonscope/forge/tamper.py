"""Tampered variants of gen-1 trees: forged trips and odometer rollbacks.

Each function edits the EBike database in place and returns a diff manifest
listing every row it inserted (with its rowid), so the change can be checked
against the actual row-set difference.
"""

from __future__ import annotations

import math
import random
import sqlite3
from pathlib import Path
from typing import Optional, Sequence

from nyonscope.forge.case import distance_m
from nyonscope.forge.tree import GEN1_SETTINGS

MODES = ("plausible", "reversed", "duplicate")
PLAUSIBLE_SPEED_MPS = 5.0
FALLBACK_EPOCH_S = 1_700_000_000


class TamperError(RuntimeError):
    pass


def find_ebike_db(tree_root) -> Path:
    base = Path(tree_root) / GEN1_SETTINGS
    hits = sorted(base.glob("*/EBike")) if base.is_dir() else []
    if not hits:
        raise TamperError(f"no EBike database under {base}")
    return hits[0]


def _columns(conn, table: str) -> list[str]:
    return [r[1] for r in conn.execute(f'PRAGMA table_info("{table}")')]


def _insert(conn, table: str, values: dict) -> dict:
    cols = [c for c in _columns(conn, table) if c in values]
    cur = conn.execute(
        f'INSERT INTO "{table}" ({", ".join(cols)}) VALUES ({", ".join("?" for _ in cols)})',
        [values[c] for c in cols],
    )
    row = conn.execute(f'SELECT rowid, * FROM "{table}" WHERE rowid = ?', (cur.lastrowid,)).fetchone()
    names = ["rowid"] + _columns(conn, table)
    return dict(zip(names, row))


def _last(conn, table: str) -> Optional[dict]:
    row = conn.execute(f'SELECT rowid, * FROM "{table}" ORDER BY TimeStamp DESC, rowid DESC LIMIT 1').fetchone()
    if row is None:
        return None
    return dict(zip(["rowid"] + _columns(conn, table), row))


def auto_waypoints(tree_root, count: int = 5, seed: int = 0) -> list[tuple]:
    """A short walk of ``count`` points starting 30-60 m from the last recorded position."""
    with sqlite3.connect(find_ebike_db(tree_root)) as conn:
        last = _last(conn, "Localization")
    conn.close()
    rng = random.Random(f"waypoints-{seed}")
    lat, lon = (last["Latitude"], last["Longitude"]) if last else (48.0, 9.2)
    out = []
    heading = rng.uniform(0, 2 * math.pi)
    for _ in range(count):
        step = rng.uniform(30, 60)
        heading += rng.uniform(-0.4, 0.4)
        lat = round(lat + step * math.cos(heading) / 111_320, 7)
        lon = round(lon + step * math.sin(heading) / (111_320 * math.cos(math.radians(lat))), 7)
        out.append((lat, lon))
    return out


def _timestamps(mode: str, last_ts: int, waypoints, unit: int) -> list[int]:
    if mode == "duplicate":
        return [last_ts] * len(waypoints)
    if mode == "reversed":
        return [last_ts - 60 * unit * (i + 1) for i in range(len(waypoints))]
    ts = [last_ts + 86400 * unit]
    for a, b in zip(waypoints, waypoints[1:]):
        gap = max(1, math.ceil(distance_m(a[0], a[1], b[0], b[1]) / PLAUSIBLE_SPEED_MPS))
        ts.append(ts[-1] + gap * unit)
    return ts


def forge_trip(tree_root, waypoints: Sequence, timestamp_mode: str = "plausible") -> dict:
    """Append ``waypoints`` (lat, lon[, alt]) to Localization plus one Activities summary row."""
    if timestamp_mode not in MODES:
        raise ValueError(f"timestamp_mode must be one of {MODES}")
    db = find_ebike_db(tree_root)
    diff = {"database": db.relative_to(tree_root).as_posix(), "mode": timestamp_mode,
            "inserted": {"Localization": [], "Activities": []}}
    if not waypoints:
        return diff
    conn = sqlite3.connect(db)
    try:
        with conn:
            last = _last(conn, "Localization")
            last_ts = last["TimeStamp"] if last else FALLBACK_EPOCH_S
            unit = 1000 if last_ts >= 10 ** 12 else 1
            user = last["UserId"] if last else None
            alt = last["SensorAltitude"] if last else None
            stamps = _timestamps(timestamp_mode, last_ts, waypoints, unit)
            for wp, ts in zip(waypoints, stamps):
                if len(wp) > 2 and wp[2] is not None:
                    alt = wp[2]
                diff["inserted"]["Localization"].append(_insert(conn, "Localization", {
                    "UserId": user, "TimeStamp": ts, "Latitude": wp[0], "Longitude": wp[1], "SensorAltitude": alt,
                }))
            length = sum(distance_m(a[0], a[1], b[0], b[1]) for a, b in zip(waypoints, waypoints[1:]))
            diff["inserted"]["Activities"].append(_insert(conn, "Activities", {
                "UserId": user, "TimeStamp": min(stamps), "StopTime": max(stamps), "Distance": round(length, 1),
            }))
    finally:
        conn.close()
    return diff


def forge_odometer_rollback(tree_root, rollback_m: float = 500.0) -> dict:
    """Add a DriveUnit row, one minute after the latest, whose odometer is ``rollback_m`` lower."""
    db = find_ebike_db(tree_root)
    diff = {"database": db.relative_to(tree_root).as_posix(), "mode": "odometer-rollback",
            "inserted": {"DriveUnit": []}}
    conn = sqlite3.connect(db)
    try:
        with conn:
            last = _last(conn, "DriveUnit")
            if last is None:
                values = {"TimeStamp": FALLBACK_EPOCH_S, "IsMoving": 1, "Odometer": 1000.0}
                diff["inserted"]["DriveUnit"].append(_insert(conn, "DriveUnit", values))
                last = _last(conn, "DriveUnit")
            top = conn.execute("SELECT MAX(Odometer) FROM DriveUnit").fetchone()[0]
            unit = 1000 if last["TimeStamp"] >= 10 ** 12 else 1
            values = {k: v for k, v in last.items() if k != "rowid"}
            values.update(TimeStamp=last["TimeStamp"] + 60 * unit, Odometer=round(max(0.0, top - rollback_m), 1))
            diff["inserted"]["DriveUnit"].append(_insert(conn, "DriveUnit", values))
    finally:
        conn.close()
    return diff
