"""LUKS1 header parsing, keyfile hunting, key-slot unlock and payload decryption."""

from __future__ import annotations

import hashlib
import logging
import os
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Union

from nyonscope import kernels
from nyonscope.image import SECTOR, EvidenceImage, PartitionEntry, Role
from nyonscope.artifacts.tree import FileTree

log = logging.getLogger(__name__)

MAGIC = b"LUKS\xba\xbe"
PHDR_SIZE = 592
SLOT_ACTIVE = 0x00AC71F3
SLOT_INACTIVE = 0x0000DEAD
NUM_SLOTS = 8
AF_STRIPES = 4000
MK_DIGEST_LEN = 20
KEYFILE_NAME = "crypto_keyfile.bin"

_PHDR = struct.Struct(">6sH32s32s32sII20s32sI40s")
_SLOT = struct.Struct(">II32sII")

SUPPORTED_HASHES = ("sha256", "sha1")


class LuksError(Exception):
    pass


class BadMagic(LuksError):
    pass


class UnsupportedVersion(LuksError):
    pass


class UnsupportedCipher(LuksError):
    pass


class NoActiveSlot(LuksError):
    pass


class WrongKey(LuksError):
    pass


class UnverifiedKey(LuksError):
    pass


class TruncatedPayload(LuksError):
    pass


@dataclass(frozen=True)
class KeySlot:
    active: bool
    iterations: int
    salt: bytes
    key_material_offset: int
    stripes: int
    state: int = SLOT_INACTIVE


@dataclass(frozen=True)
class LuksHeader:
    version: int
    cipher_name: str
    cipher_mode: str
    hash_spec: str
    payload_offset: int
    key_bytes: int
    mk_digest: bytes
    mk_digest_salt: bytes
    mk_digest_iter: int
    uuid: str
    slots: tuple[KeySlot, ...]

    def to_bytes(self) -> bytes:
        def pad(s: str, n: int) -> bytes:
            raw = s.encode("ascii")
            if len(raw) > n:
                raise ValueError(f"{s!r} longer than {n} bytes")
            return raw.ljust(n, b"\0")

        out = _PHDR.pack(
            MAGIC, self.version, pad(self.cipher_name, 32), pad(self.cipher_mode, 32), pad(self.hash_spec, 32),
            self.payload_offset, self.key_bytes, self.mk_digest, self.mk_digest_salt, self.mk_digest_iter,
            pad(self.uuid, 40),
        )
        for s in self.slots:
            out += _SLOT.pack(s.state, s.iterations, s.salt, s.key_material_offset, s.stripes)
        return out

    @property
    def active_slots(self) -> list[int]:
        return [i for i, s in enumerate(self.slots) if s.active]

    def key_material_length(self, slot: KeySlot) -> int:
        """Bytes occupied by a slot's striped key material, rounded to sectors."""
        raw = self.key_bytes * slot.stripes
        return -(-raw // SECTOR) * SECTOR


@dataclass(frozen=True)
class MasterKey:
    key: bytes = field(repr=False)
    verified: bool
    header: LuksHeader = field(repr=False)
    slot: Optional[int] = None


def _cstr(raw: bytes) -> str:
    return raw.split(b"\0", 1)[0].decode("ascii", errors="replace")


def parse_luks_header(data: bytes) -> LuksHeader:
    if len(data) < 8 or data[:6] != MAGIC:
        raise BadMagic("no LUKS magic at region start")
    version = struct.unpack_from(">H", data, 6)[0]
    if version == 2:
        raise UnsupportedVersion("LUKS2 unsupported: only LUKS1 headers can be parsed")
    if version != 1:
        raise UnsupportedVersion(f"unsupported LUKS version {version}")
    if len(data) < PHDR_SIZE:
        raise LuksError(f"header needs {PHDR_SIZE} bytes, got {len(data)}")
    (_, _, cipher_name, cipher_mode, hash_spec, payload_offset, key_bytes,
     mk_digest, mk_salt, mk_iter, uuid) = _PHDR.unpack_from(data, 0)
    slots = []
    for i in range(NUM_SLOTS):
        state, iterations, salt, km_offset, stripes = _SLOT.unpack_from(data, _PHDR.size + i * _SLOT.size)
        slots.append(KeySlot(state == SLOT_ACTIVE, iterations, salt, km_offset, stripes, state))
    return LuksHeader(
        version=version,
        cipher_name=_cstr(cipher_name),
        cipher_mode=_cstr(cipher_mode),
        hash_spec=_cstr(hash_spec),
        payload_offset=payload_offset,
        key_bytes=key_bytes,
        mk_digest=mk_digest,
        mk_digest_salt=mk_salt,
        mk_digest_iter=mk_iter,
        uuid=_cstr(uuid),
        slots=tuple(slots),
    )


def _check_cipher(header: LuksHeader) -> None:
    if header.cipher_name != "aes" or header.cipher_mode != "xts-plain64":
        raise UnsupportedCipher(f"unsupported cipher {header.cipher_name}-{header.cipher_mode}")
    if header.hash_spec not in SUPPORTED_HASHES:
        raise UnsupportedCipher(f"unsupported hash {header.hash_spec!r}; expected one of {SUPPORTED_HASHES}")
    if header.key_bytes not in (32, 64):
        raise UnsupportedCipher(f"unsupported key size {header.key_bytes}")


def read_luks_head(image: EvidenceImage, entry: PartitionEntry) -> bytes:
    """Header plus key-slot areas: the first ``payload_offset`` sectors of the region."""
    header = parse_luks_header(image.read_at(entry.offset, min(PHDR_SIZE, entry.size)))
    length = header.payload_offset * SECTOR
    if length > entry.size:
        raise TruncatedPayload(f"payload offset {length:#x} beyond region size {entry.size:#x}")
    return image.read_at(entry.offset, length)


def _slot_key_candidate(header: LuksHeader, slot: KeySlot, key_material: bytes, region_head: bytes) -> bytes:
    slot_key = hashlib.pbkdf2_hmac(header.hash_spec, key_material, slot.salt, slot.iterations, header.key_bytes)
    start = slot.key_material_offset * SECTOR
    length = header.key_material_length(slot)
    if start + length > len(region_head):
        raise TruncatedPayload("key material area beyond available header bytes")
    split = kernels.xts_decrypt(slot_key, region_head[start:start + length], 0, SECTOR)
    return kernels.af_merge(split, header.key_bytes, slot.stripes, header.hash_spec)


def verify_master_key(header: LuksHeader, candidate: bytes) -> bool:
    digest = hashlib.pbkdf2_hmac(header.hash_spec, candidate, header.mk_digest_salt, header.mk_digest_iter, MK_DIGEST_LEN)
    return digest == header.mk_digest


def unlock(header: LuksHeader, key_material: bytes, region_head: bytes) -> MasterKey:
    """Try every active slot in index order; the lowest verifying slot wins."""
    if not key_material:
        raise ValueError("empty key material")
    _check_cipher(header)
    active = header.active_slots
    if not active:
        raise NoActiveSlot("header has no active key slot")
    for index in active:
        slot = header.slots[index]
        if slot.iterations <= 0 or slot.stripes <= 0:
            log.warning("slot %d: invalid iterations/stripes, skipped", index)
            continue
        candidate = _slot_key_candidate(header, slot, key_material, region_head)
        if verify_master_key(header, candidate):
            return MasterKey(key=candidate, verified=True, header=header, slot=index)
    raise WrongKey("key material does not open any active slot")


def decrypt_payload(image: EvidenceImage, entry: PartitionEntry, master_key: MasterKey, out_path,
                    chunk_sectors: int = 2048) -> tuple[Path, str]:
    """Decrypt the payload of ``entry`` into ``out_path``; returns (path, sha256)."""
    if not master_key.verified:
        raise UnverifiedKey("refusing to decrypt with an unverified master key")
    if entry.role != Role.USERDATA_ENCRYPTED:
        raise LuksError(f"region role {entry.role.value} is not encrypted userdata")
    header = master_key.header
    start = header.payload_offset * SECTOR
    if entry.size < start:
        raise TruncatedPayload("region smaller than the payload offset")
    length = entry.size - start
    if length % SECTOR:
        raise TruncatedPayload(f"payload of {length} bytes is not sector aligned")
    if entry.end > image.size:
        raise TruncatedPayload("region extends beyond the image")
    out_path = Path(out_path)
    if out_path.exists() and os.path.samefile(out_path, image.path):
        raise LuksError("output would overwrite the evidence image")
    h = hashlib.sha256()
    sector = 0
    total = length // SECTOR
    # written beside the target and renamed only once complete: no partial output on failure
    tmp = out_path.with_name(f".{out_path.name}.partial")
    try:
        with open(image.path, "rb") as src, open(tmp, "wb") as dst:
            src.seek(entry.offset + start)
            while sector < total:
                n = min(chunk_sectors, total - sector)
                block = src.read(n * SECTOR)
                if len(block) != n * SECTOR:
                    raise TruncatedPayload("image ended inside the payload")
                plain = kernels.xts_decrypt(master_key.key, block, sector, SECTOR)
                h.update(plain)
                dst.write(plain)
                sector += n
        os.replace(tmp, out_path)
    finally:
        if tmp.exists():
            tmp.unlink()
    return out_path, h.hexdigest()


def _tree_root(tree) -> Path:
    # Path objects also carry a ``root`` attribute ("/"), so only FileTree is unwrapped
    if isinstance(tree, FileTree):
        return Path(tree.root)
    return Path(tree)


def hunt_keyfiles(trees: Union[Iterable, str, os.PathLike], key_bytes: int = 32) -> list[Path]:
    """Regular files of exactly ``key_bytes`` bytes, best candidates first.

    Ranking: files named ``crypto_keyfile.bin`` first, then shallower paths,
    then lexicographic relative path, then tree order.
    """
    if isinstance(trees, (str, os.PathLike, FileTree)):
        trees = [trees]
    ranked = []
    for tree_index, tree in enumerate(trees):
        root = _tree_root(tree)
        for dirpath, dirnames, filenames in os.walk(root):
            dirnames.sort()
            for name in filenames:
                path = Path(dirpath) / name
                if path.is_symlink() or not path.is_file():
                    continue
                if path.stat().st_size != key_bytes:
                    continue
                rel = path.relative_to(root)
                ranked.append(((name != KEYFILE_NAME, len(rel.parts), rel.as_posix(), tree_index), path))
    ranked.sort(key=lambda item: item[0])
    return [p for _, p in ranked]


def unlock_with_candidates(header: LuksHeader, candidates: Iterable[Path], region_head: bytes) -> tuple[MasterKey, Path]:
    """First candidate file that verifies; raises WrongKey when none does."""
    tried = 0
    for path in candidates:
        tried += 1
        try:
            return unlock(header, Path(path).read_bytes(), region_head), Path(path)
        except WrongKey:
            log.info("candidate %s: wrong key", path)
    raise WrongKey(f"none of {tried} candidate keyfile(s) opened the header")
