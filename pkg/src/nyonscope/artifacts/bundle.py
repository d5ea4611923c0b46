"""Assemble every artifact of one extracted tree into a :class:`CaseBundle`."""

from __future__ import annotations

import logging
from typing import Callable, Optional

from nyonscope.artifacts import gen1, gen2
from nyonscope.artifacts.gpx import GpxError, parse_gpx
from nyonscope.artifacts.records import CaseBundle, LogFile
from nyonscope.artifacts.sqlite_util import CorruptDatabase
from nyonscope.artifacts.tree import GEN1, GEN1_SETTINGS, GEN2, FileTree, detect_generation, gen1_user_dirs

log = logging.getLogger(__name__)

GEN2_DB = "users/buiowner/data/system/db"

GEN1_ARTIFACTS = ("userObject.json", "Settings.ini", "EBike", "EBikeCharts", "gpx", "connman", "bluego", "logs")
GEN2_ARTIFACTS = (
    "active-account.json", "user-settings.db", "bike-info.json", "NavStorage.sqlite", "tracking.db",
    "analytics.db", "cef_debug.log", "logs", "WifiManagerSettings.json", "gnssSettings.json",
)

GEN2_CANONICAL = {
    "active-account.json": f"{GEN2_DB}/active-account.json",
    "user-settings.db": f"{GEN2_DB}/user-settings.db",
    "bike-info.json": f"{GEN2_DB}/bike-info.json",
    "NavStorage.sqlite": f"{GEN2_DB}/NavStorage.sqlite",
    "tracking.db": f"{GEN2_DB}/tracking.db",
    "analytics.db": "system/db/analytics.db",
    "cef_debug.log": "system/webfs/logs/cef_debug.log",
    "logs": "system/webfs/logs/log",
    "WifiManagerSettings.json": "system/settings/WifiManagerSettings.json",
    "gnssSettings.json": "system/settings/gnssSettings.json",
}
# located by basename anywhere in the tree when not at the canonical path
SEARCHABLE = ("WifiManagerSettings.json", "gnssSettings.json")


class _Assembler:
    def __init__(self, tree: FileTree, generation: str, overrides: Optional[dict], profile: Optional[dict] = None):
        self.tree = tree
        self.profile = profile
        self.overrides = dict(overrides or {})
        self.bundle = CaseBundle(generation=generation, labels=dict(tree.labels))

    def note(self, msg: str) -> None:
        log.info(msg)
        self.bundle.diagnostics.append(msg)

    def record(self, rel: str, kind: str) -> None:
        self.bundle.provenance[rel] = {
            "artifact": kind,
            "sha256": self.tree.sha256(rel),
            "size": self.tree.path(rel).stat().st_size,
        }

    def locate(self, kind: str, canonical: Optional[str], want_dir: bool = False) -> Optional[str]:
        rel = self.overrides.get(kind, canonical)
        if rel is None:
            return None
        ok = self.tree.is_dir(rel) if want_dir else self.tree.is_file(rel)
        if not ok and not want_dir and kind in SEARCHABLE and kind not in self.overrides:
            found = self.tree.find(kind)
            return found
        return rel if ok else None

    def single(self, kind: str, canonical: Optional[str], fn: Callable[[str], None]) -> None:
        rel = self.locate(kind, canonical)
        if rel is None:
            self.bundle.absent.append(kind)
            return
        self.record(rel, kind)
        try:
            fn(rel)
        except (CorruptDatabase, LookupError, ValueError, GpxError, UnicodeDecodeError) as exc:
            self.note(f"{kind} ({rel}): {exc}")

    def files_in(self, kind: str, canonical: Optional[str]) -> Optional[list[str]]:
        rel = self.locate(kind, canonical, want_dir=True)
        if rel is None:
            self.bundle.absent.append(kind)
            return None
        return [f"{rel}/{name}" for name in self.tree.listdir(rel)]

    def logs(self, canonical: str) -> None:
        paths = self.files_in("logs", canonical)
        for rel in paths or []:
            if not self.tree.is_file(rel):
                continue
            self.record(rel, "logs")
            self.bundle.logs.append(LogFile(path=rel, lines=gen1.parse_log(self.tree.read(rel))))


def _assemble_gen1(a: _Assembler) -> None:
    b = a.bundle
    users = gen1_user_dirs(a.tree)
    if len(users) > 1:
        a.note(f"{len(users)} user directories found; using {users[0]}")
    udir = users[0] if users else None

    def canon(name):
        return f"{udir}/{name}" if udir else None

    def profile(rel):
        b.profile = gen1.parse_user_profile(a.tree.read(rel), GEN1, b.diagnostics)

    def settings(rel):
        b.settings = gen1.parse_settings_ini(a.tree.read(rel), b.diagnostics)

    def ebike(rel):
        leftovers = {}
        b.ebike = gen1.parse_ebike_db(a.tree.path(rel), b.diagnostics, leftovers)
        if leftovers:
            b.raw_leftovers[rel] = leftovers

    def charts(rel):
        b.charts = gen1.parse_charts_db(a.tree.path(rel))

    a.single("userObject.json", canon("userObject.json"), profile)
    a.single("Settings.ini", canon("Settings.ini"), settings)
    a.single("EBike", canon("EBike"), ebike)
    a.single("EBikeCharts", canon("EBikeCharts"), charts)

    for rel in a.files_in("gpx", canon("gpx")) or []:
        if not rel.lower().endswith(".gpx") or not a.tree.is_file(rel):
            continue
        a.record(rel, "gpx")
        try:
            b.planned_routes.append(parse_gpx(a.tree.read(rel), path=rel))
        except GpxError as exc:
            a.note(f"gpx ({rel}): {exc}")

    wifi, bt = parse_connectivity(a.tree, GEN1, a.overrides, b.diagnostics, on_file=a.record, absent=b.absent)
    b.wifi, b.bluetooth = wifi, bt
    a.logs("home/appdata/var/log")


def _assemble_gen2(a: _Assembler) -> None:
    b = a.bundle
    c = GEN2_CANONICAL

    def profile(rel):
        b.profile = gen1.parse_user_profile(a.tree.read(rel), GEN2, b.diagnostics)

    def user_settings(rel):
        b.user_settings = gen2.parse_user_settings_db(a.tree.path(rel))

    def bikes(rel):
        b.bikes = gen2.parse_bike_info(a.tree.read(rel))

    def nav(rel):
        b.nav = gen2.parse_nav_storage(a.tree.path(rel), b.diagnostics)

    def tracking(rel):
        leftovers = {}
        b.trips = gen2.parse_tracking_db(a.tree.path(rel), profile=a.profile, diagnostics=b.diagnostics,
                                         leftovers=leftovers)
        if leftovers:
            b.raw_leftovers[rel] = leftovers

    def analytics(rel):
        b.analytics = gen2.parse_analytics_db(a.tree.path(rel), b.diagnostics)

    def gnss(rel):
        b.last_position = gen2.parse_gnss_settings(a.tree.read(rel), b.diagnostics)

    a.single("active-account.json", c["active-account.json"], profile)
    a.single("user-settings.db", c["user-settings.db"], user_settings)
    a.single("bike-info.json", c["bike-info.json"], bikes)
    a.single("NavStorage.sqlite", c["NavStorage.sqlite"], nav)
    a.single("tracking.db", c["tracking.db"], tracking)
    a.single("analytics.db", c["analytics.db"], analytics)
    a.single("gnssSettings.json", c["gnssSettings.json"], gnss)
    wifi, bt = parse_connectivity(a.tree, GEN2, a.overrides, b.diagnostics, on_file=a.record, absent=b.absent)
    b.wifi, b.bluetooth = wifi, bt
    a.logs(c["logs"])


def parse_connectivity(tree: FileTree, generation: str, overrides: Optional[dict] = None,
                       warnings: Optional[list] = None, on_file: Optional[Callable] = None,
                       absent: Optional[list] = None):
    """Known Wi-Fi networks and Bluetooth devices of either generation."""
    overrides = overrides or {}
    warnings = warnings if warnings is not None else []
    absent = absent if absent is not None else []
    on_file = on_file or (lambda rel, kind: None)
    wifi, bt = [], []
    if generation == GEN1:
        connman = overrides.get("connman", "var/lib/connman")
        if tree.is_dir(connman):
            for service in tree.listdir(connman):
                rel = f"{connman}/{service}/settings"
                if not tree.is_file(rel):
                    continue
                on_file(rel, "connman")
                net = gen1.parse_connman_settings(tree.read(rel), service, rel, warnings)
                if net:
                    wifi.append(net)
        else:
            absent.append("connman")
        bluego = overrides.get("bluego", "var/lib/bluego")
        if tree.is_dir(bluego):
            for name in tree.listdir(bluego):
                rel = f"{bluego}/{name}"
                if not tree.is_file(rel):
                    continue
                on_file(rel, "bluego")
                dev = gen1.parse_bluego_file(tree.read(rel), name, rel, warnings)
                if dev:
                    bt.append(dev)
        else:
            absent.append("bluego")
    elif generation == GEN2:
        rel = overrides.get("WifiManagerSettings.json", GEN2_CANONICAL["WifiManagerSettings.json"])
        if not tree.is_file(rel):
            rel = tree.find("WifiManagerSettings.json") if "WifiManagerSettings.json" not in overrides else None
        if rel:
            on_file(rel, "WifiManagerSettings.json")
            try:
                wifi = gen2.parse_wifi_manager(tree.read(rel), rel, warnings)
            except ValueError as exc:
                warnings.append(f"WifiManagerSettings.json ({rel}): {exc}")
        else:
            absent.append("WifiManagerSettings.json")
        rel = overrides.get("cef_debug.log", GEN2_CANONICAL["cef_debug.log"])
        if tree.is_file(rel):
            on_file(rel, "cef_debug.log")
            bt = gen2.scan_cef_log(tree.read(rel), path=rel, warnings=warnings)
        else:
            absent.append("cef_debug.log")
    return wifi, bt


def assemble_bundle(tree, generation: Optional[str] = None, overrides: Optional[dict] = None,
                    schema_profile: Optional[dict] = None) -> CaseBundle:
    """Parse every known artifact of ``tree``; missing ones are listed in ``absent``.

    ``overrides`` maps an artifact kind to a tree-relative path, for layouts that
    differ from the canonical one. ``schema_profile`` replaces the tracking.db
    profile (otherwise $NYONSCOPE_SCHEMA_PROFILE or the bundled one).
    """
    if not isinstance(tree, FileTree):
        tree = FileTree(tree)
    if generation in (None, "auto"):
        generation = detect_generation(tree)
    a = _Assembler(tree, generation, overrides, schema_profile)
    if generation == GEN1:
        _assemble_gen1(a)
    elif generation == GEN2:
        _assemble_gen2(a)
    else:
        a.note("generation could not be detected; no artifacts parsed")
    a.bundle.absent.sort()
    return a.bundle
