import hashlib

import pytest
from hypothesis import given, settings, strategies as st

from nyonscope.image import (
    DescriptorError, EvidenceImage, ImageError, PartitionEntry, Role, REFERENCE_LAYOUT, open_image,
    parse_descriptor_text, parse_partition_table, parse_verity_descriptor, read_region, region_sha256,
)

SECTOR = 512


def _doc(**fields):
    text = "".join(f"{k}={v}\n" for k, v in fields.items()).encode()
    return text + bytes(SECTOR - len(text))


def _image(tmp_path, size, writes):
    path = tmp_path / "disk.raw"
    with open(path, "wb") as fh:
        fh.truncate(size)
        for off, data in writes:
            fh.seek(off)
            fh.write(data)
    return open_image(path)


def test_descriptor_text_ignores_comments_and_blanks():
    assert parse_descriptor_text(b"name=a\n\n# note\noffset = 0x10\0junk") == {"name": "a", "offset": "0x10"}


def test_descriptor_text_rejects_garbage_line():
    with pytest.raises(DescriptorError):
        parse_descriptor_text("name=a\nnot a pair\n")


def test_verity_descriptor_fields_and_extras():
    d = parse_verity_descriptor("name=bui3xx-image\noffset=0x2800000\nsize=1000\nhash=AB\nsalt=cd\nversion=1\n")
    assert (d.target, d.offset, d.size, d.root_hash, d.salt) == ("bui3xx-image", 0x2800000, 1000, "ab", "cd")
    assert d.extras == {"version": "1"}


@pytest.mark.parametrize("text", [
    "offset=0\nsize=10\nhash=aa\n",             # no salt
    "offset=0\nsize=0\nhash=aa\nsalt=bb\n",     # zero size
    "offset=-1\nsize=10\nhash=aa\nsalt=bb\n",   # negative
    "offset=0\nsize=ten\nhash=aa\nsalt=bb\n",   # not a number
    "offset=0\nsize=10\nhash=zz\nsalt=bb\n",    # not hex
])
def test_verity_descriptor_errors(text):
    with pytest.raises(DescriptorError):
        parse_verity_descriptor(text)


@settings(max_examples=50, deadline=None)
@given(offset=st.integers(0, 2 ** 40), size=st.integers(1, 2 ** 40), salt=st.binary(min_size=1, max_size=32),
       decimal=st.booleans())
def test_verity_descriptor_number_forms(offset, size, salt, decimal):
    off = str(offset) if decimal else hex(offset)
    d = parse_verity_descriptor(f"name=x\noffset={off}\nsize={size}\nhash={salt.hex()}\nsalt={salt.hex()}\n")
    assert (d.offset, d.size, d.salt) == (offset, size, salt.hex())


def test_open_image_errors(tmp_path):
    with pytest.raises(ImageError):
        open_image(tmp_path / "missing.raw")
    with pytest.raises(ImageError):
        open_image(tmp_path)
    (tmp_path / "empty.raw").write_bytes(b"")
    with pytest.raises(ImageError):
        open_image(tmp_path / "empty.raw")


def test_read_region_bounds(tmp_path):
    img = _image(tmp_path, 4096, [(0, b"abc")])
    with pytest.raises(ImageError):
        list(read_region(img, PartitionEntry(4000, 200)))
    assert b"".join(read_region(img, PartitionEntry(0, 3))) == b"abc"
    assert region_sha256(img, PartitionEntry(0, 3)) == hashlib.sha256(b"abc").hexdigest()


def test_descriptors_gaps_and_luks_tail(tmp_path):
    docs = _doc(name="descriptors", offset=0x1000, size=0x1000, role="descriptor") + \
        _doc(name="bui3xx-image", offset=0x3000, size=0x1000, hash="aa", salt="bb") + \
        _doc(name="store", offset=0x4000, size=0x800, role="maps")
    img = _image(tmp_path, 0x10000, [(0x1000, docs), (0x6000, b"LUKS\xba\xbe\x00\x01")])
    pmap = parse_partition_table(img)
    got = [(e.offset, e.size, e.role) for e in pmap.entries]
    assert got == [
        (0, 0x1000, Role.UNKNOWN),
        (0x1000, 0x1000, Role.DESCRIPTOR),
        (0x2000, 0x1000, Role.UNKNOWN),
        (0x3000, 0x1000, Role.SYSTEM),
        (0x4000, 0x800, Role.MAPS),
        (0x4800, 0x1800, Role.UNALLOCATED),
        (0x6000, 0xA000, Role.USERDATA_ENCRYPTED),
    ]
    assert pmap.source == "descriptors" and pmap.warnings == []
    assert pmap.by_role(Role.SYSTEM)[0].verity_hash == "aa"
    # entries tile the image exactly
    assert sum(e.size for e in pmap.entries) == img.size


def test_overlapping_and_oversized_descriptors_are_skipped(tmp_path):
    docs = _doc(name="a", offset=0x2000, size=0x1000, role="maps") + \
        _doc(name="b", offset=0x2800, size=0x1000, role="keymaterial") + \
        _doc(name="c", offset=0x8000, size=0x100000, role="maps") + \
        _doc(name="d", offset=0x5000, size=0x100, role="nonsense")
    img = _image(tmp_path, 0x10000, [(0x1000, docs)])
    pmap = parse_partition_table(img)
    names = [e.name for e in pmap.entries if e.name]
    assert names == ["a"]
    assert len(pmap.warnings) == 3
    assert pmap.entries[-1].role == Role.UNALLOCATED


def test_missing_descriptor_role_is_synthesized(tmp_path):
    img = _image(tmp_path, 0x8000, [(0x400, _doc(name="maps", offset=0x2000, size=0x1000, role="maps"))])
    pmap = parse_partition_table(img)
    desc = pmap.by_role(Role.DESCRIPTOR)
    assert desc and desc[0].offset == 0x400


@pytest.mark.parametrize("size", [8 << 30, 8_000_000_000])
def test_static_fallback_for_known_sizes(tmp_path, size):
    img = _image(tmp_path, size, [])
    pmap = parse_partition_table(img)
    assert pmap.source == "static"
    described = [e for e in pmap.entries if e.role not in (Role.UNKNOWN, Role.UNALLOCATED)]
    assert [e.offset for e in described] == [e.offset for e in REFERENCE_LAYOUT]
    assert sum(e.size for e in pmap.entries) == size


def test_static_fallback_unknown_size(tmp_path):
    img = _image(tmp_path, 0x10000, [])
    pmap = parse_partition_table(img)
    assert [(e.offset, e.size, e.role) for e in pmap.entries] == [(0, 0x10000, Role.UNKNOWN)]
    assert pmap.warnings


def test_default_fixture_layout_matches_manifest(default_image):
    out, manifest = default_image
    img = open_image(out / "image.raw")
    got = [{k: d[k] for k in ("name", "role", "offset", "size")} for d in parse_partition_table(img).to_json()]
    assert got == manifest["layout"]
    assert img.digest == manifest["image"]["sha256"]


def test_digest_is_lazy(tmp_path):
    img = _image(tmp_path, 1024, [(0, b"x")])
    assert "digest" not in img.__dict__
    assert img.digest == hashlib.sha256(b"x" + bytes(1023)).hexdigest()
    assert "digest" in img.__dict__


def test_evidence_image_read_outside(tmp_path):
    img = EvidenceImage(path=tmp_path / "x", size=10)
    with pytest.raises(ImageError):
        img.read_at(5, 10)
