"""Read-only access to raw eMMC dumps: partition discovery, region reads, hashing.

Descriptor files are stored in the first descriptor region as NUL-terminated
``key=value`` text documents, each starting on a 512-byte sector boundary and
beginning with a ``name=`` line. Offsets and sizes accept ``0x`` hex or decimal.
"""

from __future__ import annotations

import hashlib
import logging
import os
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from pathlib import Path
from typing import Iterator, Optional

log = logging.getLogger(__name__)

SECTOR = 512
CHUNK = 1 << 20
EMPTY_SHA256 = "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
LUKS_MAGIC = b"LUKS\xba\xbe"
DESCRIPTOR_SIGNATURE = b"name="
# bytes scanned for the descriptor region / for a LUKS header inside trailing space
SCAN_LIMIT = 64 << 20


class ImageError(Exception):
    pass


class DescriptorError(ValueError):
    pass


class Role(str, Enum):
    DESCRIPTOR = "descriptor"
    SYSTEM = "system"
    SYSTEMCONFIG = "systemconfig"
    RECOVERY = "recovery"
    MAPS = "maps"
    KEYMATERIAL = "keymaterial"
    USERDATA_ENCRYPTED = "userdata-encrypted"
    UNALLOCATED = "unallocated"
    UNKNOWN = "unknown"


NAME_ROLES = {
    "bui3xx-image": Role.SYSTEM,
    "bui3xx-systemconfig": Role.SYSTEMCONFIG,
    "bui3xx-recovery": Role.RECOVERY,
}


@dataclass(frozen=True)
class EvidenceImage:
    path: Path
    size: int

    @cached_property
    def digest(self) -> str:
        """SHA-256 of the whole image, computed on first access."""
        return sha256_file(self.path)

    def read_at(self, offset: int, length: int) -> bytes:
        if offset < 0 or length < 0 or offset + length > self.size:
            raise ImageError(f"read [{offset:#x}, +{length:#x}) outside image of {self.size:#x} bytes")
        with open(self.path, "rb") as fh:
            fh.seek(offset)
            return fh.read(length)


@dataclass(frozen=True)
class PartitionEntry:
    offset: int
    size: int
    name: Optional[str] = None
    role: Role = Role.UNKNOWN
    verity_hash: Optional[str] = None
    verity_salt: Optional[str] = None

    @property
    def end(self) -> int:
        return self.offset + self.size


@dataclass
class PartitionMap:
    image_size: int
    entries: list[PartitionEntry]
    source: str
    warnings: list[str] = field(default_factory=list)

    def by_role(self, role: Role) -> list[PartitionEntry]:
        return [e for e in self.entries if e.role == role]

    def to_json(self, image: Optional[EvidenceImage] = None) -> list[dict]:
        """Array of ``{name, role, offset, size, sha256}``; sha256 is null without an image."""
        out = []
        for e in self.entries:
            out.append({
                "name": e.name,
                "role": e.role.value,
                "offset": e.offset,
                "size": e.size,
                "sha256": region_sha256(image, e) if image is not None else None,
            })
        return out


@dataclass
class VerityDescriptor:
    target: str
    offset: int
    size: int
    root_hash: str
    salt: str
    extras: dict[str, str] = field(default_factory=dict)


# Reference layout of an 8 GB unit; sizes are the decimal MB/GB figures.
REFERENCE_LAYOUT = (
    PartitionEntry(0x400000, 16_000_000, None, Role.DESCRIPTOR),
    PartitionEntry(0x2800000, 1_000_000_000, "bui3xx-image", Role.SYSTEM),
    PartitionEntry(0x42900000, 192_000_000, "bui3xx-systemconfig", Role.SYSTEMCONFIG),
    PartitionEntry(0x4EA00000, 336_000_000, "bui3xx-recovery", Role.RECOVERY),
    PartitionEntry(0x6AC00000, 5_000_000_000, None, Role.MAPS),
    PartitionEntry(0x1AC900000, 50_000_000, None, Role.KEYMATERIAL),
    PartitionEntry(0x1AF900200, 550_000_000, None, Role.USERDATA_ENCRYPTED),
)
STATIC_LAYOUTS = {
    8 << 30: REFERENCE_LAYOUT,
    8_000_000_000: REFERENCE_LAYOUT,
}


def sha256_file(path, chunk_size: int = CHUNK) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(chunk_size), b""):
            h.update(block)
    return h.hexdigest()


def open_image(path) -> EvidenceImage:
    path = Path(path)
    if not path.exists():
        raise ImageError(f"image not found: {path}")
    if not path.is_file():
        raise ImageError(f"not a regular file: {path}")
    if not os.access(path, os.R_OK):
        raise ImageError(f"image not readable: {path}")
    size = path.stat().st_size
    if size == 0:
        raise ImageError(f"zero-length image: {path}")
    return EvidenceImage(path=path, size=size)


def read_region(image: EvidenceImage, entry: PartitionEntry, chunk_size: int = CHUNK) -> Iterator[bytes]:
    """Yield the bytes of ``[entry.offset, entry.end)`` in bounded chunks."""
    if entry.offset < 0 or entry.size < 0 or entry.end > image.size:
        raise ImageError(f"region [{entry.offset:#x}, {entry.end:#x}) exceeds image size {image.size:#x}")
    remaining = entry.size
    with open(image.path, "rb") as fh:
        fh.seek(entry.offset)
        while remaining:
            block = fh.read(min(chunk_size, remaining))
            if not block:
                raise ImageError("image truncated while reading region")
            remaining -= len(block)
            yield block


def region_sha256(image: EvidenceImage, entry: PartitionEntry) -> str:
    h = hashlib.sha256()
    for block in read_region(image, entry):
        h.update(block)
    return h.hexdigest()


def parse_descriptor_text(data) -> dict[str, str]:
    """Split ``key=value`` lines; blank lines and ``#`` comments are ignored."""
    if isinstance(data, (bytes, bytearray)):
        data = bytes(data).split(b"\0", 1)[0].decode("utf-8")
    fields: dict[str, str] = {}
    for lineno, raw in enumerate(data.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise DescriptorError(f"line {lineno}: expected key=value, got {raw!r}")
        key, value = line.split("=", 1)
        fields[key.strip()] = value.strip()
    return fields


def _int(value: str, key: str) -> int:
    try:
        n = int(value, 0)
    except ValueError:
        raise DescriptorError(f"{key}: not an integer: {value!r}") from None
    if n < 0:
        raise DescriptorError(f"{key}: negative value {value!r}")
    return n


def _hex(value: str, key: str) -> str:
    try:
        bytes.fromhex(value)
    except ValueError:
        raise DescriptorError(f"{key}: not hex: {value!r}") from None
    return value.lower()


def parse_verity_descriptor(data) -> VerityDescriptor:
    fields = parse_descriptor_text(data)
    missing = [k for k in ("offset", "size", "hash", "salt") if k not in fields]
    if missing:
        raise DescriptorError(f"descriptor missing mandatory key(s): {', '.join(missing)}")
    size = _int(fields["size"], "size")
    if size == 0:
        raise DescriptorError("size must be > 0")
    extras = {k: v for k, v in fields.items() if k not in ("name", "offset", "size", "hash", "salt")}
    return VerityDescriptor(
        target=fields.get("name", ""),
        offset=_int(fields["offset"], "offset"),
        size=size,
        root_hash=_hex(fields["hash"], "hash"),
        salt=_hex(fields["salt"], "salt"),
        extras=extras,
    )


def _entry_from_fields(fields: dict[str, str]) -> PartitionEntry:
    for key in ("offset", "size"):
        if key not in fields:
            raise DescriptorError(f"descriptor missing {key}")
    name = fields.get("name") or None
    role_value = fields.get("role")
    if role_value:
        try:
            role = Role(role_value)
        except ValueError:
            raise DescriptorError(f"unknown role {role_value!r}") from None
    else:
        role = NAME_ROLES.get(name or "", Role.UNKNOWN)
    return PartitionEntry(
        offset=_int(fields["offset"], "offset"),
        size=_int(fields["size"], "size"),
        name=name,
        role=role,
        verity_hash=_hex(fields["hash"], "hash") if "hash" in fields else None,
        verity_salt=_hex(fields["salt"], "salt") if "salt" in fields else None,
    )


def find_descriptor_region(image: EvidenceImage, limit: int = SCAN_LIMIT) -> Optional[int]:
    """Offset of the first sector that starts a descriptor document, if any."""
    end = min(image.size, limit)
    with open(image.path, "rb") as fh:
        pos = 0
        while pos < end:
            block = fh.read(min(CHUNK, end - pos))
            if not block:
                break
            for off in range(0, len(block), SECTOR):
                if block.startswith(DESCRIPTOR_SIGNATURE, off):
                    return pos + off
            pos += len(block)
    return None


def read_descriptor_documents(image: EvidenceImage, start: int) -> tuple[list[bytes], int]:
    """Consecutive descriptor documents from ``start``; returns (docs, end offset)."""
    docs = []
    pos = start
    with open(image.path, "rb") as fh:
        while pos < image.size:
            fh.seek(pos)
            head = fh.read(min(8 * SECTOR, image.size - pos))
            if not head.startswith(DESCRIPTOR_SIGNATURE):
                break
            doc = head.split(b"\0", 1)[0]
            docs.append(doc)
            pos += (len(doc) // SECTOR + 1) * SECTOR
    return docs, pos


def _find_magic(image: EvidenceImage, start: int, end: int, magic: bytes, limit: int = SCAN_LIMIT) -> Optional[int]:
    """First sector-aligned occurrence of ``magic`` in ``[start, end)``."""
    first = -(-start // SECTOR) * SECTOR
    stop = min(end, first + limit)
    with open(image.path, "rb") as fh:
        pos = first
        while pos < stop:
            fh.seek(pos)
            block = fh.read(min(CHUNK, stop - pos))
            if not block:
                break
            for off in range(0, len(block), SECTOR):
                if block.startswith(magic, off):
                    return pos + off
            pos += len(block)
    return None


def _fill_gaps(image: EvidenceImage, described: list[PartitionEntry]) -> list[PartitionEntry]:
    entries: list[PartitionEntry] = []
    cursor = 0
    for e in described:
        if e.offset > cursor:
            entries.append(PartitionEntry(cursor, e.offset - cursor, None, Role.UNKNOWN))
        entries.append(e)
        cursor = e.end
    if cursor < image.size:
        luks_at = _find_magic(image, cursor, image.size, LUKS_MAGIC)
        if luks_at is None:
            entries.append(PartitionEntry(cursor, image.size - cursor, None, Role.UNALLOCATED))
        else:
            if luks_at > cursor:
                entries.append(PartitionEntry(cursor, luks_at - cursor, None, Role.UNALLOCATED))
            entries.append(PartitionEntry(luks_at, image.size - luks_at, None, Role.USERDATA_ENCRYPTED))
    return entries


def _non_overlapping(image: EvidenceImage, candidates: list[PartitionEntry], warnings: list[str]) -> list[PartitionEntry]:
    kept: list[PartitionEntry] = []
    for e in sorted(candidates, key=lambda x: (x.offset, x.size)):
        if e.size == 0:
            warnings.append(f"descriptor {e.name or hex(e.offset)}: zero size, skipped")
        elif e.end > image.size:
            warnings.append(f"descriptor {e.name or hex(e.offset)}: extends past image end, skipped")
        elif kept and e.offset < kept[-1].end:
            warnings.append(f"descriptor {e.name or hex(e.offset)}: overlaps {kept[-1].name or hex(kept[-1].offset)}, skipped")
        else:
            kept.append(e)
    return kept


def static_layout(image: EvidenceImage) -> PartitionMap:
    layout = STATIC_LAYOUTS.get(image.size)
    if layout is None:
        msg = f"no static layout for image size {image.size}; whole image reported as unknown"
        log.warning(msg)
        return PartitionMap(image.size, [PartitionEntry(0, image.size, None, Role.UNKNOWN)], "static", [msg])
    entries: list[PartitionEntry] = []
    cursor = 0
    for e in layout:
        if e.offset > cursor:
            entries.append(PartitionEntry(cursor, e.offset - cursor, None, Role.UNKNOWN))
        entries.append(e)
        cursor = e.end
    if cursor < image.size:
        entries.append(PartitionEntry(cursor, image.size - cursor, None, Role.UNALLOCATED))
    return PartitionMap(image.size, entries, "static", ["descriptor region not found; static layout used"])


def parse_partition_table(image: EvidenceImage) -> PartitionMap:
    start = find_descriptor_region(image)
    if start is None:
        log.info("no descriptor region in %s, using static layout", image.path)
        return static_layout(image)
    docs, docs_end = read_descriptor_documents(image, start)
    warnings: list[str] = []
    candidates: list[PartitionEntry] = []
    for i, doc in enumerate(docs):
        try:
            candidates.append(_entry_from_fields(parse_descriptor_text(doc)))
        except (DescriptorError, UnicodeDecodeError) as exc:
            msg = f"descriptor #{i} at region {start:#x}: {exc}"
            log.warning(msg)
            warnings.append(msg)
    if not any(c.role == Role.DESCRIPTOR for c in candidates):
        following = [c.offset for c in candidates if c.offset >= docs_end]
        region_end = min(following, default=docs_end)
        candidates.append(PartitionEntry(start, region_end - start, None, Role.DESCRIPTOR))
    described = _non_overlapping(image, candidates, warnings)
    for w in warnings:
        log.warning(w)
    return PartitionMap(image.size, _fill_gaps(image, described), "descriptors", warnings)
