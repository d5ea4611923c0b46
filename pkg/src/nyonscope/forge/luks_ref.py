"""Reference LUKS1 encryptor used only to build fixtures.

Cipher work goes through OpenSSL (``cryptography``) so that the decryptor in
:mod:`nyonscope.luks` is checked against an implementation it shares no code
with. The anti-forensic splitter is written here independently as well.
"""

from __future__ import annotations

import hashlib
import random
import struct
import uuid as uuidlib
from dataclasses import dataclass

try:
    from cryptography.hazmat.primitives.ciphers import Cipher, algorithms, modes
except ImportError:  # pragma: no cover - exercised only without the reference tool
    Cipher = None

SECTOR = 512
STRIPES = 4000
ENABLED = 0x00AC71F3
DISABLED = 0x0000DEAD


class ReferenceToolMissing(RuntimeError):
    pass


def available() -> bool:
    return Cipher is not None


def _require():
    if Cipher is None:
        raise ReferenceToolMissing("reference LUKS1 encryptor needs the 'cryptography' package (OpenSSL); fixture skipped")


def xts_encrypt(key: bytes, data: bytes, first_sector: int = 0) -> bytes:
    _require()
    out = bytearray()
    for n in range(len(data) // SECTOR):
        tweak = (first_sector + n).to_bytes(16, "little")
        enc = Cipher(algorithms.AES(key), modes.XTS(tweak)).encryptor()
        out += enc.update(data[n * SECTOR:(n + 1) * SECTOR]) + enc.finalize()
    return bytes(out)


def _hash_blocks(buf: bytes, hash_name: str) -> bytes:
    size = hashlib.new(hash_name).digest_size
    pieces = []
    for index, start in enumerate(range(0, len(buf), size)):
        part = buf[start:start + size]
        pieces.append(hashlib.new(hash_name, struct.pack(">I", index) + part).digest()[:len(part)])
    return b"".join(pieces)


def af_split(secret: bytes, stripes: int, hash_name: str, rng: random.Random) -> bytes:
    state = bytes(len(secret))
    out = []
    for _ in range(stripes - 1):
        noise = rng.randbytes(len(secret))
        out.append(noise)
        state = _hash_blocks(bytes(x ^ y for x, y in zip(state, noise)), hash_name)
    out.append(bytes(x ^ y for x, y in zip(state, secret)))
    return b"".join(out)


@dataclass
class LuksVolume:
    blob: bytes            # header + key material + encrypted payload
    master_key: bytes
    payload_offset: int    # sectors
    header_bytes: bytes    # the 592-byte phdr


def _align(n: int, to: int) -> int:
    return -(-n // to) * to


def build_luks1(plaintext: bytes, keyfile: bytes, seed: int, key_bytes: int = 32, hash_name: str = "sha256",
                slot_iterations: int = 1000, mk_iterations: int = 1000, active_slots: tuple[int, ...] = (0,),
                align_sectors: int = 4096) -> LuksVolume:
    """Encrypt ``plaintext`` (whole sectors) into a LUKS1 volume opened by ``keyfile``."""
    _require()
    if len(plaintext) % SECTOR:
        raise ValueError("plaintext must be sector aligned")
    rng = random.Random(f"luks-{seed}")
    master_key = rng.randbytes(key_bytes)
    mk_salt = rng.randbytes(32)
    mk_digest = hashlib.pbkdf2_hmac(hash_name, master_key, mk_salt, mk_iterations, 20)
    km_sectors = _align(_align(key_bytes * STRIPES, SECTOR) // SECTOR, 8)
    slots = []
    areas = []
    offset = _align(592, 4096) // SECTOR
    for i in range(8):
        if i in active_slots:
            salt = rng.randbytes(32)
            slot_key = hashlib.pbkdf2_hmac(hash_name, keyfile, salt, slot_iterations, key_bytes)
            split = af_split(master_key, STRIPES, hash_name, rng)
            split += bytes(km_sectors * SECTOR - len(split))
            areas.append((offset, xts_encrypt(slot_key, split, 0)))
            slots.append(struct.pack(">II32sII", ENABLED, slot_iterations, salt, offset, STRIPES))
        else:
            slots.append(struct.pack(">II32sII", DISABLED, 0, bytes(32), offset, STRIPES))
        offset += km_sectors
    payload_offset = _align(offset, align_sectors)
    phdr = struct.pack(
        ">6sH32s32s32sII20s32sI40s",
        b"LUKS\xba\xbe", 1, b"aes", b"xts-plain64", hash_name.encode(), payload_offset, key_bytes,
        mk_digest, mk_salt, mk_iterations, str(uuidlib.UUID(bytes=rng.randbytes(16), version=4)).encode(),
    ) + b"".join(slots)
    head = bytearray(payload_offset * SECTOR)
    head[:len(phdr)] = phdr
    for start, data in areas:
        head[start * SECTOR:start * SECTOR + len(data)] = data
    blob = bytes(head) + xts_encrypt(master_key, plaintext, 0)
    return LuksVolume(blob=blob, master_key=master_key, payload_offset=payload_offset, header_bytes=phdr)
