import hashlib
import os
import struct
from dataclasses import replace

import pytest
from hypothesis import given, settings, strategies as st

from nyonscope.artifacts.tree import FileTree
from nyonscope.forge import luks_ref
from nyonscope.image import PartitionEntry, Role, open_image, parse_partition_table
from nyonscope.luks import (
    BadMagic, LuksError, NoActiveSlot, TruncatedPayload, UnsupportedCipher, UnsupportedVersion, UnverifiedKey,
    WrongKey, MasterKey, decrypt_payload, hunt_keyfiles, parse_luks_header, read_luks_head, unlock,
    unlock_with_candidates,
)

pytestmark = pytest.mark.skipif(not luks_ref.available(), reason="reference encryptor needs cryptography")

KEYFILE = bytes(range(32))


def _volume(plain=None, **kw):
    plain = plain if plain is not None else os.urandom(8 * 512)
    return plain, luks_ref.build_luks1(plain, KEYFILE, seed=1, slot_iterations=10, mk_iterations=10,
                                       align_sectors=8, **kw)


def _region_image(tmp_path, blob, lead=0):
    path = tmp_path / "vol.raw"
    path.write_bytes(bytes(lead) + blob)
    img = open_image(path)
    return img, PartitionEntry(lead, len(blob), None, Role.USERDATA_ENCRYPTED)


def test_header_round_trip():
    _, vol = _volume()
    hdr = parse_luks_header(vol.header_bytes)
    assert hdr.to_bytes() == vol.header_bytes
    assert (hdr.cipher_name, hdr.cipher_mode, hdr.hash_spec, hdr.key_bytes) == ("aes", "xts-plain64", "sha256", 32)
    assert hdr.active_slots == [0]


def test_bad_magic_and_versions():
    _, vol = _volume()
    with pytest.raises(BadMagic):
        parse_luks_header(b"\0" * 592)
    v2 = vol.header_bytes[:6] + struct.pack(">H", 2) + vol.header_bytes[8:]
    with pytest.raises(UnsupportedVersion, match="LUKS2"):
        parse_luks_header(v2)
    v3 = vol.header_bytes[:6] + struct.pack(">H", 3) + vol.header_bytes[8:]
    with pytest.raises(UnsupportedVersion):
        parse_luks_header(v3)
    with pytest.raises(LuksError):
        parse_luks_header(vol.header_bytes[:100])


def test_unlock_and_decrypt(tmp_path):
    plain, vol = _volume()
    img, entry = _region_image(tmp_path, vol.blob, lead=4096)
    head = read_luks_head(img, entry)
    mk = unlock(parse_luks_header(head), KEYFILE, head)
    assert mk.verified and mk.key == vol.master_key and mk.slot == 0
    out, sha = decrypt_payload(img, entry, mk, tmp_path / "plain.bin")
    assert out.read_bytes() == plain
    assert sha == hashlib.sha256(plain).hexdigest()


@pytest.mark.parametrize("kw", [{"hash_name": "sha1"}, {"key_bytes": 64}, {"active_slots": (3, 5)}])
def test_variants(tmp_path, kw):
    plain, vol = _volume(**kw)
    img, entry = _region_image(tmp_path, vol.blob)
    head = read_luks_head(img, entry)
    mk = unlock(parse_luks_header(head), KEYFILE, head)
    assert mk.key == vol.master_key
    assert mk.slot == kw.get("active_slots", (0,))[0]
    assert decrypt_payload(img, entry, mk, tmp_path / "p")[0].read_bytes() == plain


def test_wrong_key(tmp_path):
    _, vol = _volume()
    img, entry = _region_image(tmp_path, vol.blob)
    head = read_luks_head(img, entry)
    with pytest.raises(WrongKey):
        unlock(parse_luks_header(head), b"\xff" * 32, head)
    with pytest.raises(ValueError):
        unlock(parse_luks_header(head), b"", head)


def test_unsupported_cipher_and_no_slots():
    _, vol = _volume()
    hdr = parse_luks_header(vol.header_bytes)
    with pytest.raises(UnsupportedCipher):
        unlock(replace(hdr, cipher_name="twofish"), KEYFILE, b"")
    with pytest.raises(UnsupportedCipher):
        unlock(replace(hdr, hash_spec="md5"), KEYFILE, b"")
    dead = tuple(replace(s, active=False) for s in hdr.slots)
    with pytest.raises(NoActiveSlot):
        unlock(replace(hdr, slots=dead), KEYFILE, b"")


def test_unverified_key_refused(tmp_path):
    _, vol = _volume()
    img, entry = _region_image(tmp_path, vol.blob)
    mk = MasterKey(key=vol.master_key, verified=False, header=parse_luks_header(vol.header_bytes))
    with pytest.raises(UnverifiedKey):
        decrypt_payload(img, entry, mk, tmp_path / "p")
    assert not (tmp_path / "p").exists()


def test_truncated_region(tmp_path):
    _, vol = _volume()
    img, entry = _region_image(tmp_path, vol.blob[:2048])
    with pytest.raises(TruncatedPayload):
        read_luks_head(img, entry)


def test_refuses_to_overwrite_image(tmp_path):
    _, vol = _volume()
    img, entry = _region_image(tmp_path, vol.blob)
    head = read_luks_head(img, entry)
    mk = unlock(parse_luks_header(head), KEYFILE, head)
    before = img.path.read_bytes()
    with pytest.raises(LuksError):
        decrypt_payload(img, entry, mk, img.path)
    assert img.path.read_bytes() == before


def test_no_partial_output_on_failure(tmp_path):
    _, vol = _volume()
    img, entry = _region_image(tmp_path, vol.blob)
    head = read_luks_head(img, entry)
    mk = unlock(parse_luks_header(head), KEYFILE, head)
    # region claims more bytes than the image holds
    bad = PartitionEntry(entry.offset, entry.size + 4096, None, Role.USERDATA_ENCRYPTED)
    with pytest.raises(TruncatedPayload):
        decrypt_payload(img, bad, mk, tmp_path / "out.bin")
    assert sorted(p.name for p in tmp_path.iterdir()) == ["vol.raw"]


def test_hunt_ranking(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    (a / "deep" / "er").mkdir(parents=True)
    b.mkdir()
    (a / "deep" / "er" / "crypto_keyfile.bin").write_bytes(os.urandom(32))
    (a / "z.bin").write_bytes(os.urandom(32))
    (a / "deep" / "y.bin").write_bytes(os.urandom(32))
    (a / "big.bin").write_bytes(os.urandom(33))
    (b / "crypto_keyfile.bin").write_bytes(os.urandom(32))
    (b / "link.bin").symlink_to(a / "z.bin")
    got = hunt_keyfiles([a, FileTree(b)])
    rel = [p.relative_to(tmp_path).as_posix() for p in got]
    assert rel == ["b/crypto_keyfile.bin", "a/deep/er/crypto_keyfile.bin", "a/z.bin", "a/deep/y.bin"]
    assert hunt_keyfiles(str(a), key_bytes=33) == [a / "big.bin"]


def test_hunt_on_fixture_then_unlock(default_image):
    out, manifest = default_image
    img = open_image(out / "image.raw")
    entry = parse_partition_table(img).by_role(Role.USERDATA_ENCRYPTED)[0]
    head = read_luks_head(img, entry)
    cands = hunt_keyfiles([out / t for t in manifest["partition_trees"].values()])
    assert cands[0].name == "crypto_keyfile.bin"
    mk, used = unlock_with_candidates(parse_luks_header(head), cands, head)
    assert used == cands[0]
    assert hashlib.sha256(mk.key).hexdigest() == manifest["luks"]["master_key_sha256"]
    decoy = out / "partitions" / "keymaterial" / manifest["decoys"][0]
    with pytest.raises(WrongKey):
        unlock_with_candidates(parse_luks_header(head), [decoy], head)


@settings(max_examples=10, deadline=None)
@given(sectors=st.integers(1, 6), seed=st.integers(0, 10 ** 6))
def test_decrypt_matches_reference_property(tmp_path_factory, sectors, seed):
    plain = os.urandom(sectors * 512)
    vol = luks_ref.build_luks1(plain, KEYFILE, seed=seed, slot_iterations=2, mk_iterations=2, align_sectors=8)
    d = tmp_path_factory.mktemp("p")
    img, entry = _region_image(d, vol.blob)
    head = read_luks_head(img, entry)
    mk = unlock(parse_luks_header(head), KEYFILE, head)
    assert decrypt_payload(img, entry, mk, d / "o")[1] == hashlib.sha256(plain).hexdigest()
