"""Raw eMMC-style images: descriptor region, plaintext partitions and a LUKS1 userdata region."""

from __future__ import annotations

import hashlib
import io
import json
import random
import tarfile
from pathlib import Path

from nyonscope.forge import luks_ref
from nyonscope.forge.case import GEN2, SyntheticCase
from nyonscope.forge.tree import emit_tree

SECTOR = 512
DEFAULT_IMAGE_SIZE = 64 << 20
FULL_IMAGE_SIZE = 8 << 30
SCALE = 128

# offset, size, descriptor name, role written in the descriptor (None: implied by name)
FULL_LAYOUT = (
    (0x400000, 16_000_000, "descriptors", "descriptor"),
    (0x2800000, 1_000_000_000, "bui3xx-image", None),
    (0x42900000, 192_000_000, "bui3xx-systemconfig", None),
    (0x4EA00000, 336_000_000, "bui3xx-recovery", None),
    (0x6AC00000, 5_000_000_000, "maps", "maps"),
    (0x1AC900000, 50_000_000, "keymaterial", "keymaterial"),
)
USERDATA_OFFSET = 0x1AF900200
VERITY = ("bui3xx-image", "bui3xx-systemconfig", "bui3xx-recovery")
NAME_ROLES = {"bui3xx-image": "system", "bui3xx-systemconfig": "systemconfig", "bui3xx-recovery": "recovery"}
KEYFILE_NAME = "crypto_keyfile.bin"


def _scaled(value: int) -> int:
    # keep the sub-MiB remainder so the userdata start stays off a MiB boundary
    return (value & ~0xFFFFF) // SCALE + (value & 0xFFFFF)


def layout_for(scale: str) -> tuple[list[tuple], int, int]:
    """(partitions, userdata offset, image size) for ``default`` or ``full`` scale."""
    if scale == "full":
        return list(FULL_LAYOUT), USERDATA_OFFSET, FULL_IMAGE_SIZE
    if scale != "default":
        raise ValueError("scale must be 'default' or 'full'")
    parts = []
    for off, size, name, role in FULL_LAYOUT:
        parts.append((_scaled(off), size // SCALE // SECTOR * SECTOR, name, role))
    return parts, _scaled(USERDATA_OFFSET), DEFAULT_IMAGE_SIZE


def tar_bytes(files: dict) -> bytes:
    """Deterministic tar (sorted names, zeroed ownership and times)."""
    buf = io.BytesIO()
    with tarfile.open(fileobj=buf, mode="w", format=tarfile.GNU_FORMAT) as tar:
        dirs = set()
        for name in sorted(files):
            parts = name.split("/")[:-1]
            for i in range(1, len(parts) + 1):
                d = "/".join(parts[:i])
                if d not in dirs:
                    dirs.add(d)
                    info = tarfile.TarInfo(d)
                    info.type, info.mode, info.mtime = tarfile.DIRTYPE, 0o755, 0
                    tar.addfile(info)
            data = files[name]
            info = tarfile.TarInfo(name)
            info.size, info.mode, info.mtime = len(data), 0o644, 0
            tar.addfile(info, io.BytesIO(data))
    return buf.getvalue()


def tree_files(root) -> dict:
    root = Path(root)
    return {p.relative_to(root).as_posix(): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def extract_tar(source, dest, offset: int = 0) -> Path:
    """Out-of-band extraction of a tar stream starting at ``offset`` of ``source``."""
    dest = Path(dest)
    dest.mkdir(parents=True, exist_ok=True)
    with open(source, "rb") as fh:
        fh.seek(offset)
        with tarfile.open(fileobj=fh, mode="r:") as tar:
            for member in tar.getmembers():
                target = (dest / member.name).resolve()
                if not str(target).startswith(str(dest.resolve())) or not (member.isfile() or member.isdir()):
                    raise ValueError(f"refusing tar member {member.name!r}")
            tar.extractall(dest)
    return dest


def keymaterial_files(seed: int, decoys: int) -> tuple[dict, bytes, list[str]]:
    rng = random.Random(f"keymaterial-{seed}")
    keyfile = rng.randbytes(32)
    files = {
        KEYFILE_NAME: keyfile,
        "test_images/pattern.bin": rng.randbytes(4096),
        "README": b"Key material partition. Files in keys/ are provisioning leftovers and are not in use.\n",
    }
    decoy_paths = []
    for i in range(decoys):
        path = f"keys/decoy_{i + 1}.bin"
        files[path] = rng.randbytes(32)
        decoy_paths.append(path)
    return files, keyfile, decoy_paths


def _descriptor(fields: list[tuple]) -> bytes:
    text = "".join(f"{k}={v}\n" for k, v in fields).encode()
    if len(text) >= SECTOR:
        raise ValueError("descriptor does not fit a sector")
    return text + b"\0" * (SECTOR - len(text))


def emit_image(case: SyntheticCase, out, scale: str = "default", decoys: int = 1) -> dict:
    """Build ``out/image.raw`` around the case's gen-2 tree; returns (and writes) the manifest."""
    if case.generation != GEN2:
        raise ValueError("images are only modelled for gen2 cases")
    luks_ref._require()
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    _, tree_manifest = emit_tree(case, out / "tree")
    rng = random.Random(f"image-{case.seed}")
    parts, ud_offset, size = layout_for(scale)

    contents = {
        "bui3xx-image": rng.randbytes(64 << 10),
        "bui3xx-systemconfig": tar_bytes({
            "etc/hostname": b"bui350\n",
            "etc/sw-version": case.bikes[0]["softwareVersion"].encode() + b"\n",
            "var/log/update.log": b"2023-01-01T00:00:00.000Z update: none pending\n",
        }),
        "bui3xx-recovery": rng.randbytes(16 << 10),
        "maps": tar_bytes({"maps/skobbler/index.txt": b"region=DE-BW\ntiles=0\n"}),
    }
    key_files, keyfile, decoy_paths = keymaterial_files(case.seed, decoys)
    contents["keymaterial"] = tar_bytes(key_files)

    docs, layout = [], []
    cursor = 0
    for off, psize, name, role in parts:
        if off > cursor:
            layout.append({"name": None, "role": "unknown", "offset": cursor, "size": off - cursor})
        fields = [("name", name), ("offset", hex(off)), ("size", psize)]
        if role:
            fields.append(("role", role))
        if name in VERITY:
            salt = rng.randbytes(32)
            fields += [("hash", hashlib.sha256(salt + contents[name]).hexdigest()), ("salt", salt.hex()),
                       ("version", 1)]
        docs.append(_descriptor(fields))
        layout.append({"name": name, "role": role or NAME_ROLES[name], "offset": off, "size": psize})
        cursor = off + psize
    if ud_offset > cursor:
        layout.append({"name": None, "role": "unallocated", "offset": cursor, "size": ud_offset - cursor})
    layout.append({"name": None, "role": "userdata-encrypted", "offset": ud_offset, "size": size - ud_offset})

    # plaintext fills the userdata region exactly at default scale; full scale keeps it small
    plain = tar_bytes(tree_files(out / "tree"))
    head_bytes = 4096 * SECTOR
    if scale == "default":
        room = size - ud_offset - head_bytes
        if len(plain) > room:
            raise ValueError(f"gen2 tree ({len(plain)} bytes) does not fit the userdata region ({room})")
        plain += bytes(room - len(plain))
    else:
        plain += bytes(-len(plain) % (1 << 20))
    volume = luks_ref.build_luks1(plain, keyfile, seed=case.seed)
    if volume.payload_offset * SECTOR != head_bytes:
        raise AssertionError("unexpected LUKS payload offset")

    img = out / "image.raw"
    with open(img, "wb") as fh:
        fh.truncate(size)
        fh.seek(parts[0][0])
        fh.write(b"".join(docs))
        for off, _, name, _ in parts[1:]:
            fh.seek(off)
            fh.write(contents[name])
        fh.seek(ud_offset)
        fh.write(volume.blob)

    # plaintext partitions unpacked out-of-band, so keyfile hunting has trees to search
    trees = {}
    for off, _, name, _ in parts:
        if name in ("bui3xx-systemconfig", "maps", "keymaterial"):
            extract_tar(img, out / "partitions" / name, off)
            trees[name] = f"partitions/{name}"

    image_sha = None
    if scale == "default":
        h = hashlib.sha256()
        with open(img, "rb") as fh:
            for block in iter(lambda: fh.read(1 << 20), b""):
                h.update(block)
        image_sha = h.hexdigest()
    manifest = {
        "seed": case.seed,
        "scale": scale,
        "image": {"path": "image.raw", "size": size, "sha256": image_sha},
        "layout": layout,
        "plaintext_sha256": hashlib.sha256(plain).hexdigest(),
        "plaintext_size": len(plain),
        "keyfile": {"path": KEYFILE_NAME, "sha256": hashlib.sha256(keyfile).hexdigest()},
        "decoys": decoy_paths,
        "partition_trees": trees,
        "luks": {"payload_offset": volume.payload_offset, "key_bytes": 32,
                 "master_key_sha256": hashlib.sha256(volume.master_key).hexdigest()},
        "tree": tree_manifest,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=1, sort_keys=True))
    return manifest
