"""Artifact parsers for both device generations."""

from nyonscope.artifacts.bundle import assemble_bundle, parse_connectivity
from nyonscope.artifacts.gen1 import (
    parse_bluego_file,
    parse_charts_db,
    parse_connman_settings,
    parse_ebike_db,
    parse_log,
    parse_settings_ini,
    parse_user_profile,
)
from nyonscope.artifacts.gen2 import (
    parse_analytics_db,
    parse_bike_info,
    parse_gnss_settings,
    parse_nav_storage,
    parse_tracking_db,
    parse_user_settings_db,
    parse_wifi_manager,
    scan_cef_log,
)
from nyonscope.artifacts.gpx import parse_gpx
from nyonscope.artifacts.records import CaseBundle
from nyonscope.artifacts.tree import FileTree, detect_generation

__all__ = [
    "CaseBundle", "FileTree", "assemble_bundle", "detect_generation", "parse_analytics_db",
    "parse_bike_info", "parse_bluego_file", "parse_charts_db", "parse_connectivity",
    "parse_connman_settings", "parse_ebike_db", "parse_gnss_settings", "parse_gpx", "parse_log",
    "parse_nav_storage", "parse_settings_ini", "parse_tracking_db", "parse_user_profile",
    "parse_user_settings_db", "parse_wifi_manager", "scan_cef_log",
]
