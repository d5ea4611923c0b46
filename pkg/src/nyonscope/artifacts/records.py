"""Typed records produced by the artifact parsers, plus (de)serialization helpers."""

from __future__ import annotations

import dataclasses
import json
import re
import typing
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from typing import Any, Optional

EPOCH = datetime(1970, 1, 1, tzinfo=timezone.utc)
MS_THRESHOLD = 10 ** 12


def epoch_to_ms(value) -> Optional[int]:
    """Normalize an epoch value to integer milliseconds.

    Magnitudes of 10**12 and above are taken as milliseconds, smaller ones as
    seconds. Non-numeric input yields None.
    """
    if value is None or isinstance(value, bool):
        return None
    if isinstance(value, str):
        try:
            value = float(value) if any(c in value for c in ".eE") else int(value)
        except ValueError:
            return None
    if not isinstance(value, (int, float)):
        return None
    if abs(value) >= MS_THRESHOLD:
        return int(round(value))
    return int(round(value * 1000))


def ms_to_iso(ms: Optional[int]) -> Optional[str]:
    if ms is None:
        return None
    dt = EPOCH + timedelta(milliseconds=ms)
    return dt.strftime("%Y-%m-%dT%H:%M:%S.") + f"{dt.microsecond // 1000:03d}Z"


_ISO_RE = re.compile(
    r"^(\d{4})-(\d{2})-(\d{2})[T ](\d{2}):(\d{2}):(\d{2})(?:\.(\d{1,9}))?\s*(Z|[+-]\d{2}:?\d{2})?$"
)


def iso_to_ms(text: str) -> Optional[int]:
    """Parse an ISO-8601 instant (naive values are taken as UTC)."""
    m = _ISO_RE.match(text.strip())
    if not m:
        return None
    y, mo, d, h, mi, s, frac, tz = m.groups()
    try:
        dt = datetime(int(y), int(mo), int(d), int(h), int(mi), int(s), tzinfo=timezone.utc)
    except ValueError:
        return None
    ms = int((dt - EPOCH).total_seconds()) * 1000
    if frac:
        ms += int((frac + "00")[:3])
    if tz and tz != "Z":
        sign = 1 if tz[0] == "+" else -1
        hh, mm = int(tz[1:3]), int(tz[-2:])
        ms -= sign * (hh * 3600 + mm * 60) * 1000
    return ms


def snake(name: str) -> str:
    s = re.sub(r"([A-Z]+)([A-Z][a-z])", r"\1_\2", name)
    s = re.sub(r"([a-z0-9])([A-Z])", r"\1_\2", s)
    return re.sub(r"[^0-9a-zA-Z]+", "_", s).strip("_").lower()


def valid_coordinates(lat, lon) -> bool:
    try:
        return -90.0 <= float(lat) <= 90.0 and -180.0 <= float(lon) <= 180.0
    except (TypeError, ValueError):
        return False


def jsonable(value):
    """SQLite/JSON scalar to a JSON-safe value; blobs become ``hex:`` strings."""
    if isinstance(value, (bytes, bytearray, memoryview)):
        return "hex:" + bytes(value).hex()
    return value


@dataclass
class TrackPoint:
    latitude: float
    longitude: float
    altitude: Optional[float] = None
    timestamp_ms: Optional[int] = None
    speed: Optional[float] = None
    user_id: Optional[str] = None
    row_id: Optional[int] = None

    def __post_init__(self):
        if not valid_coordinates(self.latitude, self.longitude):
            raise ValueError(f"invalid coordinates ({self.latitude}, {self.longitude})")


@dataclass
class UserProfile:
    user_id: Optional[str] = None
    first_name: Optional[str] = None
    last_name: Optional[str] = None
    gender: Optional[str] = None
    date_of_birth: Optional[str] = None
    email: Optional[str] = None
    home_address: Optional[dict] = None
    mobile_phone_number: Optional[str] = None
    social: dict = field(default_factory=dict)
    extras: dict = field(default_factory=dict)


@dataclass
class ChartsSample:
    user_id: Optional[str]
    nt_distance: float
    altitude: Optional[float] = None
    speed: Optional[float] = None
    driver_cadence: Optional[float] = None
    heart_rate: Optional[float] = None
    state_of_charge: Optional[float] = None
    consumption: Optional[float] = None
    power: Optional[float] = None
    row_id: Optional[int] = None
    extras: dict = field(default_factory=dict)


@dataclass
class EBikeData:
    activities: list = field(default_factory=list)
    ambient: list = field(default_factory=list)
    bike_battery: list = field(default_factory=list)
    drive_unit: list = field(default_factory=list)
    operational: list = field(default_factory=list)
    driver: list = field(default_factory=list)
    localization: list[TrackPoint] = field(default_factory=list)
    tables: dict = field(default_factory=dict)


@dataclass
class BikeSettings:
    serials: dict = field(default_factory=dict)
    consent: dict = field(default_factory=dict)
    wifi_token: Optional[str] = None
    last_sync_raw: Optional[str] = None
    extras: dict = field(default_factory=dict)


@dataclass
class WifiNetwork:
    ssid: str
    passphrase: Optional[str] = None
    security: Optional[str] = None
    settings: dict = field(default_factory=dict)
    last_modified_ms: Optional[int] = None
    generation: str = "gen1"
    path: Optional[str] = None

    def __post_init__(self):
        if not self.ssid:
            raise ValueError("empty SSID")


MAC_RE = re.compile(r"^[0-9A-Fa-f]{2}(?::[0-9A-Fa-f]{2}){5}$")


@dataclass
class BluetoothDevice:
    address: Optional[str]
    name: Optional[str] = None
    trusted: Optional[bool] = None
    source: str = "bluego"
    observed_at_ms: Optional[int] = None
    path: Optional[str] = None
    extras: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.address is not None:
            if not MAC_RE.match(self.address):
                raise ValueError(f"malformed Bluetooth address {self.address!r}")
            self.address = self.address.upper()


@dataclass
class LastPosition:
    latitude: Optional[float] = None
    longitude: Optional[float] = None
    altitude: Optional[float] = None
    speed: Optional[float] = None
    timestamp: Optional[int] = None
    instant: Optional[str] = None
    extras: dict = field(default_factory=dict)
    settings: dict = field(default_factory=dict)


@dataclass
class AnalyticsEvent:
    kind: str
    timestamp_ms: Optional[int] = None
    params: Optional[dict] = None
    raw_params: Optional[str] = None
    row_id: Optional[int] = None
    extras: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.kind:
            raise ValueError("empty analytics event kind")


@dataclass
class BikeInfo:
    serials: dict = field(default_factory=dict)
    software_version: Optional[str] = None
    hardware_version: Optional[str] = None
    battery_packs: list = field(default_factory=list)
    extras: dict = field(default_factory=dict)


@dataclass
class NavData:
    consumptions: list = field(default_factory=list)
    locations: list = field(default_factory=list)
    routes: list = field(default_factory=list)
    recents: list = field(default_factory=list)


@dataclass
class TripRecord:
    trip_id: Any
    start_ms: Optional[int] = None
    end_ms: Optional[int] = None
    distance_m: Optional[float] = None
    odometer_m: Optional[float] = None
    points: list[TrackPoint] = field(default_factory=list)
    driver: list = field(default_factory=list)
    extras: dict = field(default_factory=dict)


@dataclass
class PlannedRoute:
    name: Optional[str]
    points: list[TrackPoint] = field(default_factory=list)
    path: Optional[str] = None


@dataclass
class LogFile:
    path: str
    lines: list = field(default_factory=list)


@dataclass
class CaseBundle:
    generation: str = "unknown"
    labels: dict = field(default_factory=dict)
    profile: Optional[UserProfile] = None
    bikes: list[BikeInfo] = field(default_factory=list)
    settings: Optional[BikeSettings] = None
    user_settings: Optional[dict] = None
    wifi: list[WifiNetwork] = field(default_factory=list)
    bluetooth: list[BluetoothDevice] = field(default_factory=list)
    charts: list[ChartsSample] = field(default_factory=list)
    ebike: Optional[EBikeData] = None
    trips: list[TripRecord] = field(default_factory=list)
    nav: Optional[NavData] = None
    analytics: list[AnalyticsEvent] = field(default_factory=list)
    last_position: Optional[LastPosition] = None
    planned_routes: list[PlannedRoute] = field(default_factory=list)
    logs: list[LogFile] = field(default_factory=list)
    raw_leftovers: dict = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)
    absent: list[str] = field(default_factory=list)
    diagnostics: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def to_json(self) -> str:
        return canonical_json(self.to_dict())

    @classmethod
    def from_dict(cls, data: dict) -> "CaseBundle":
        if not isinstance(data, dict) or "generation" not in data:
            raise ValueError("not a case bundle: expected an object with a 'generation' key")
        return from_dict(cls, data)

    def artifact_path(self, kind: str) -> Optional[str]:
        """Relative path of the first artifact of ``kind`` recorded in provenance."""
        for path, meta in sorted(self.provenance.items()):
            if meta.get("artifact") == kind:
                return path
        return None


def canonical_json(data) -> str:
    return json.dumps(data, sort_keys=True, separators=(",", ":"), ensure_ascii=False, allow_nan=False)


def from_dict(cls, data):
    """Rebuild a (nested) dataclass instance from its ``asdict`` form."""
    if data is None:
        return None
    if not isinstance(data, dict):
        raise TypeError(f"{cls.__name__}: expected an object, got {type(data).__name__}")
    hints = typing.get_type_hints(cls)
    kwargs = {}
    for f in dataclasses.fields(cls):
        if f.name in data:
            kwargs[f.name] = _convert(hints[f.name], data[f.name])
    return cls(**kwargs)


def _convert(tp, value):
    if value is None:
        return None
    origin = typing.get_origin(tp)
    args = typing.get_args(tp)
    if origin is typing.Union:
        inner = [a for a in args if a is not type(None)]
        return _convert(inner[0], value) if len(inner) == 1 else value
    if origin is list and args and dataclasses.is_dataclass(args[0]):
        return [from_dict(args[0], v) for v in value]
    if dataclasses.is_dataclass(tp):
        return from_dict(tp, value)
    return value
