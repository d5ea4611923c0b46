"""Deterministic fixtures with ground-truth manifests."""

from nyonscope.forge.case import SyntheticCase, forge_case
from nyonscope.forge.image import emit_image, extract_tar
from nyonscope.forge.tamper import auto_waypoints, forge_odometer_rollback, forge_trip
from nyonscope.forge.tree import emit_tree

__all__ = ["SyntheticCase", "auto_waypoints", "emit_image", "emit_tree", "extract_tar", "forge_case",
           "forge_odometer_rollback", "forge_trip"]
