import hashlib
import json
import subprocess
import sys

import pytest

from nyonscope.cli import main


def _sha(path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


@pytest.fixture
def gen1_bundle(tmp_path):
    assert main(["forge", "--seed", "2", "--generation", "gen1", "--tamper", "reversed", "--out",
                 str(tmp_path / "case")]) == 0
    assert main(["parse", str(tmp_path / "case" / "tree"), "--out", str(tmp_path / "b.json")]) == 0
    return tmp_path / "b.json"


def test_usage_errors(capsys, tmp_path):
    assert main([]) == 1
    assert main(["bogus"]) == 1
    assert main(["forge", "--seed", "1"]) == 1
    assert main(["forge", "--seed", "1", "--generation", "gen1", "--image", "--out", str(tmp_path)]) == 1


def test_parse_failures(tmp_path):
    assert main(["parse", str(tmp_path / "missing")]) == 2
    assert main(["timeline", str(tmp_path / "missing.json")]) == 2
    (tmp_path / "junk.json").write_text("[1, 2]")
    assert main(["timeline", str(tmp_path / "junk.json")]) == 2
    (tmp_path / "nogen.json").write_text('{"trips": []}')
    assert main(["report", str(tmp_path / "nogen.json")]) == 2
    (tmp_path / "img.raw").write_bytes(b"")
    assert main(["partitions", str(tmp_path / "img.raw")]) == 2
    (tmp_path / "empty").mkdir()
    assert main(["parse", str(tmp_path / "empty")]) == 2


def test_bundle_commands(gen1_bundle, tmp_path, capsys):
    assert main(["timeline", str(gen1_bundle), "--out", str(tmp_path / "t.jsonl")]) == 0
    assert (tmp_path / "t.jsonl").read_text().count("\n") > 10
    assert main(["tamper-check", str(gen1_bundle), "--out", str(tmp_path / "f.json")]) == 0
    assert "MONOTONIC_TIME" in {f["rule"] for f in json.loads((tmp_path / "f.json").read_text())}
    assert main(["export-gpx", str(gen1_bundle), "--trip", "1", "--out", str(tmp_path / "1.gpx")]) == 0
    assert (tmp_path / "1.gpx").read_bytes().startswith(b"<?xml")
    assert main(["export-gpx", str(gen1_bundle), "--trip", "999", "--out", str(tmp_path / "x.gpx")]) == 1
    assert not (tmp_path / "x.gpx").exists()
    (tmp_path / "bad.json").write_text('{"nope": 1}')
    assert main(["tamper-check", str(gen1_bundle), "--config", str(tmp_path / "bad.json")]) == 1


def test_report_byte_identical(gen1_bundle, tmp_path):
    for n in (1, 2):
        assert main(["report", str(gen1_bundle), "--out", str(tmp_path / f"r{n}.json")]) == 0
        assert main(["report", str(gen1_bundle), "--out", str(tmp_path / f"r{n}.md")]) == 0
    assert (tmp_path / "r1.json").read_bytes() == (tmp_path / "r2.json").read_bytes()
    assert (tmp_path / "r1.md").read_bytes() == (tmp_path / "r2.md").read_bytes()
    assert "MONOTONIC_TIME" in (tmp_path / "r1.md").read_text()


def test_image_commands(default_image, tmp_path, capsys):
    out, manifest = default_image
    img = out / "image.raw"
    before = _sha(img)
    assert main(["partitions", str(img), "--json", "--out", str(tmp_path / "p.json")]) == 0
    rows = json.loads((tmp_path / "p.json").read_text())["partitions"]
    assert [r["offset"] for r in rows] == [r["offset"] for r in manifest["layout"]]
    decoy = out / "partitions" / "keymaterial" / manifest["decoys"][0]
    assert main(["unlock", str(img), "--keyfile", str(decoy), "--out", str(tmp_path / "u.bin")]) == 3
    assert not (tmp_path / "u.bin").exists()
    assert main(["unlock", str(img), "--hunt", str(tmp_path / "nothing"), "--out", str(tmp_path / "u.bin")]) == 3
    assert main(["unlock", str(img), "--keyfile", str(decoy), "--out", str(img)]) == 1
    trees = [str(out / t) for t in manifest["partition_trees"].values()]
    argv = ["unlock", str(img), "--out", str(tmp_path / "u.bin")]
    for t in trees:
        argv += ["--hunt", t]
    capsys.readouterr()
    assert main(argv) == 0
    result = json.loads(capsys.readouterr().out)
    assert result["sha256"] == manifest["plaintext_sha256"] == _sha(tmp_path / "u.bin")
    assert _sha(img) == before


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "nyonscope.cli", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0 and "tamper-check" in proc.stdout
