"""GPX 1.0/1.1 reading (namespace tolerant)."""

from __future__ import annotations

import xml.etree.ElementTree as ET
from typing import Optional

from nyonscope.artifacts.records import PlannedRoute, TrackPoint, iso_to_ms, valid_coordinates


class GpxError(ValueError):
    pass


def _local(tag: str) -> str:
    return tag.rsplit("}", 1)[-1]


def _child_text(el, name: str) -> Optional[str]:
    for child in el:
        if _local(child.tag) == name:
            return (child.text or "").strip()
    return None


def parse_gpx(data, path: Optional[str] = None) -> PlannedRoute:
    """Waypoints, route points and track points in document order."""
    try:
        root = ET.fromstring(data)
    except ET.ParseError as exc:
        raise GpxError(f"malformed GPX: {exc}") from None
    name = None
    points = []
    for el in root.iter():
        tag = _local(el.tag)
        if tag in ("rte", "trk", "metadata") and name is None:
            name = _child_text(el, "name") or None
        if tag not in ("wpt", "rtept", "trkpt"):
            continue
        try:
            lat = float(el.attrib["lat"])
            lon = float(el.attrib["lon"])
        except (KeyError, ValueError):
            raise GpxError(f"{tag} without numeric lat/lon") from None
        if not valid_coordinates(lat, lon):
            raise GpxError(f"{tag} coordinates out of range: ({lat}, {lon})")
        ele = _child_text(el, "ele")
        when = _child_text(el, "time")
        points.append(TrackPoint(
            latitude=lat,
            longitude=lon,
            altitude=float(ele) if ele else None,
            timestamp_ms=iso_to_ms(when) if when else None,
        ))
    if not points:
        raise GpxError("GPX contains no points")
    return PlannedRoute(name=name, points=points, path=path)
