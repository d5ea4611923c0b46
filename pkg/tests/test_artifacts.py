import json
import sqlite3

import pytest
from hypothesis import given, settings, strategies as st

from nyonscope.artifacts import assemble_bundle, detect_generation, parse_gpx
from nyonscope.artifacts import gen1, gen2, lenient_json
from nyonscope.artifacts.gpx import GpxError
from nyonscope.artifacts.records import CaseBundle, epoch_to_ms, iso_to_ms, ms_to_iso
from nyonscope.artifacts.tree import FileTree

from conftest import load_data


def test_lenient_json_passthrough_and_repair():
    assert lenient_json.loads('{"a": 1}') == ({"a": 1}, False)
    doc, repaired = lenient_json.loads('{"a": [REDACTED], "b": "[REDACTED]", [...]}')
    assert repaired and doc == {"a": None, "b": "[REDACTED]"}
    assert lenient_json.loads('"k": {"x": 1, [...]}')[0] == {"k": {"x": 1}}
    with pytest.raises(json.JSONDecodeError):
        lenient_json.loads("{not json")


@settings(max_examples=60, deadline=None)
@given(st.recursive(st.none() | st.booleans() | st.integers() | st.text(),
                    lambda c: st.lists(c, max_size=4) | st.dictionaries(st.text(), c, max_size=4), max_leaves=20))
def test_lenient_json_is_identity_on_valid_json(value):
    assert lenient_json.loads(json.dumps(value)) == (value, False)


def test_redacted_user_object():
    warnings = []
    p = gen1.parse_user_profile(load_data("redacted_userObject.json"), "gen1", warnings)
    assert (p.first_name, p.last_name, p.user_id) == ("Jane", "Doe", "1234567890123")
    assert p.social == {"facebook": None, "twitter": None}
    assert warnings


def test_redacted_wifi_manager():
    nets = gen2.parse_wifi_manager(load_data("redacted_WifiManagerSettings.json"))
    assert [(n.ssid, n.security) for n in nets] == [("Galaxy Note10+0c95", "WPA2")]


def test_redacted_gnss():
    pos = gen2.parse_gnss_settings(load_data("redacted_gnssSettings.json"))
    assert pos.altitude == 311.0 and pos.timestamp == 1686737311649
    assert pos.latitude is None and pos.instant == "2023-06-14T10:08:31.649Z"


def test_gnss_missing_and_bad_coordinates():
    with pytest.raises(LookupError):
        gen2.parse_gnss_settings('{"other": 1}')
    with pytest.raises(ValueError):
        gen2.parse_gnss_settings('{"lastPosition": {"latitude": 91, "longitude": 0}}')


def test_epoch_magnitudes():
    assert epoch_to_ms(1_686_737_311) == 1_686_737_311_000
    assert epoch_to_ms(1_686_737_311_649) == 1_686_737_311_649
    assert epoch_to_ms(None) is None


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 4_102_444_800_000))
def test_iso_round_trip(ms):
    assert iso_to_ms(ms_to_iso(ms)) == ms


def test_settings_ini_sections():
    s = gen1.parse_settings_ini(b"[General]\nLastSync=abc\nnoise\n[Bike]\nDriveUnitSerialNumber=42\n"
                                b"[Consent]\nGeoDataAllowed=1600000000\n")
    assert s.last_sync_raw == "abc"
    assert s.serials == {"DriveUnitSerialNumber": "42"}
    assert s.consent["GeoDataAllowed"]["timestamp_ms"] == 1_600_000_000_000


def test_connman_and_bluego():
    n = gen1.parse_connman_settings(b"[wifi_abc_managed_psk]\nName=Home\nPassphrase=pw\n"
                                    b"Modified=2022-03-01T10:00:00.000000Z\n", "wifi_abc_managed_psk")
    assert (n.ssid, n.passphrase, n.security, n.last_modified_ms) == ("Home", "pw", "psk", 1646128800000)
    hexed = gen1.parse_connman_settings(b"[wifi_x_none]\nSSID=4142\n", "wifi_x_none")
    assert hexed.ssid == "AB"
    d = gen1.parse_bluego_file(b"[General]\nName=Phone\nTrusted=true\n", "AA_BB_CC_DD_EE_FF")
    assert (d.address, d.name, d.trusted) == ("AA:BB:CC:DD:EE:FF", "Phone", True)


def test_cef_log_skips_malformed_mac():
    warnings = []
    log = (b"2023-06-01T10:00:00.000Z bt: paired address=AA:BB:CC:DD:EE:01 name=\"Phone\" trusted=true\n"
           b"2023-06-01T10:00:01.000Z bt: discovered address=ZZ:BB name=\"x\"\n"
           b"nothing to see\n")
    devs = gen2.scan_cef_log(log, warnings=warnings)
    assert [(d.address, d.name, d.trusted) for d in devs] == [("AA:BB:CC:DD:EE:01", "Phone", True)]
    assert devs[0].observed_at_ms == 1685613600000
    assert len(warnings) == 1 and "malformed MAC" in warnings[0]


def test_gpx_parse_and_errors():
    doc = (b'<gpx xmlns="http://www.topografix.com/GPX/1/1"><rte><name>r</name>'
           b'<rtept lat="48.1" lon="9.2"><ele>300</ele></rtept><rtept lat="48.2" lon="9.3"/></rte></gpx>')
    route = parse_gpx(doc)
    assert route.name == "r" and [(p.latitude, p.altitude) for p in route.points] == [(48.1, 300.0), (48.2, None)]
    for bad in (b"<gpx", b"<gpx/>", b'<gpx><wpt lat="95" lon="0"/></gpx>', b'<gpx><wpt lat="x"/></gpx>'):
        with pytest.raises(GpxError):
            parse_gpx(bad)


def test_log_lines():
    entries = gen1.parse_log(b"2023-01-01T00:00:00.000Z boot\n\nplain line\n")
    assert entries == [{"line": 1, "timestamp_ms": 1672531200000, "message": "boot"},
                       {"line": 3, "timestamp_ms": None, "message": "plain line"}]


def test_corrupt_database_is_diagnosed(gen1_tree):
    _, root, _ = gen1_tree
    db = next(p for p in root.rglob("EBike*") if p.is_file() and "Charts" not in p.name)
    db.write_bytes(b"this is not sqlite" * 100)
    bundle = assemble_bundle(root)
    assert bundle.ebike is None
    assert "EBike" not in bundle.absent  # present but unreadable is not absent
    assert any("EBike" in d for d in bundle.diagnostics)


def test_only_user_object_tree(tmp_path):
    udir = tmp_path / "home/appdata/Main/Apps/Settings/1234567890123"
    udir.mkdir(parents=True)
    (udir / "userObject.json").write_bytes(load_data("redacted_userObject.json"))
    tree = FileTree(tmp_path)
    assert detect_generation(tree) == "gen1"
    bundle = assemble_bundle(tree)
    assert bundle.profile.first_name == "Jane"
    assert set(bundle.absent) >= {"Settings.ini", "EBike", "EBikeCharts", "connman", "bluego"}
    assert bundle.trips == [] and bundle.wifi == []


def test_unknown_tree(tmp_path):
    bundle = assemble_bundle(tmp_path)
    assert bundle.generation == "unknown" and bundle.diagnostics


def _renamed_profile(tmp_path):
    profile = gen2.load_schema_profile()
    profile["roles"]["trip"]["tables"] = ["journeys"]
    path = tmp_path / "profile.json"
    path.write_text(json.dumps(profile))
    return profile, path


def _rename_trip_table(root):
    db = next(root.rglob("tracking.db"))
    con = sqlite3.connect(db)
    con.execute("ALTER TABLE trip_summary RENAME TO journeys")
    con.commit()
    con.close()


def test_schema_profile_argument_and_env(gen2_tree, tmp_path, monkeypatch):
    _, root, manifest = gen2_tree
    _rename_trip_table(root)
    default = assemble_bundle(root)
    assert any("no trip summary table" in d for d in default.diagnostics)
    profile, path = _renamed_profile(tmp_path)
    expected_ids = [t["trip_id"] for t in manifest["expected_bundle"]["trips"]]
    assert [t.trip_id for t in assemble_bundle(root, schema_profile=profile).trips] == expected_ids
    monkeypatch.setenv(gen2.PROFILE_ENV, str(path))
    assert [t.trip_id for t in assemble_bundle(root).trips] == expected_ids


def test_override_path(gen2_tree):
    _, root, manifest = gen2_tree
    src = root / "system/settings/WifiManagerSettings.json"
    moved = root / "elsewhere.json"
    src.rename(moved)
    # located by basename when not at the canonical path, or by explicit override
    bundle = assemble_bundle(root, overrides={"WifiManagerSettings.json": "elsewhere.json"})
    expected = [w["ssid"] for w in manifest["expected_bundle"]["wifi"]]
    assert [w.ssid for w in bundle.wifi] == expected
    assert "elsewhere.json" in bundle.provenance


def test_bundle_dict_round_trip(gen2_tree):
    _, root, manifest = gen2_tree
    bundle = assemble_bundle(root)
    again = CaseBundle.from_dict(json.loads(bundle.to_json()))
    assert again.to_json() == bundle.to_json()
