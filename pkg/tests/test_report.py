import json

from nyonscope import chronicle
from nyonscope.artifacts import assemble_bundle
from nyonscope.artifacts.records import CaseBundle
from nyonscope.forge import auto_waypoints, emit_tree, forge_case, forge_trip
from nyonscope.report import TOOLKIT_CONVENTION_FIELDS, render_report
from nyonscope.sentry import run_checks


def _report(root):
    bundle = assemble_bundle(root)
    return bundle, render_report(bundle, chronicle.build_timeline(bundle), run_checks(bundle))


def test_report_is_deterministic(gen2_tree):
    _, root, _ = gen2_tree
    assert _report(root)[1].to_json() == _report(root)[1].to_json()
    assert _report(root)[1].to_markdown() == _report(root)[1].to_markdown()


def test_every_datum_cites_a_digest(gen2_tree):
    _, root, _ = gen2_tree
    bundle, report = _report(root)
    d = report.data
    for section in ("bikes", "wifi", "bluetooth", "trips"):
        assert d[section]
        for item in d[section]:
            assert item["provenance"]["sha256"] == bundle.provenance[item["provenance"]["path"]]["sha256"]
    assert d["profile"]["provenance"]["sha256"]
    assert d["toolkit_convention_fields"] == list(TOOLKIT_CONVENTION_FIELDS)


def test_timeline_reference_hash(gen2_tree):
    import hashlib
    import io

    _, root, _ = gen2_tree
    bundle, report = _report(root)
    buf = io.StringIO()
    chronicle.write_jsonl(chronicle.build_timeline(bundle), buf)
    assert report.data["timeline"]["jsonl_sha256"] == hashlib.sha256(buf.getvalue().encode()).hexdigest()


def test_markdown_lists_findings(tmp_path):
    root, _ = emit_tree(forge_case(4, "gen1"), tmp_path)
    forge_trip(root, auto_waypoints(root, 4), "reversed")
    md = _report(root)[1].to_markdown()
    assert "MONOTONIC_TIME" in md and "Toolkit-convention fields" in md


def test_empty_bundle_minimal_report():
    r = render_report(CaseBundle())
    assert r.data["trips"] == [] and r.data["findings"] == [] and r.data["profile"] is None
    md = r.to_markdown()
    assert "No findings." in md and "No profile recovered." in md
    assert json.loads(r.to_json())["timeline"]["events"] == 0
