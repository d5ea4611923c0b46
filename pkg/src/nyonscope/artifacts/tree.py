"""Extracted file trees and generation detection."""

from __future__ import annotations

import hashlib
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Optional

GEN1 = "gen1"
GEN2 = "gen2"
UNKNOWN = "unknown"

GEN1_SETTINGS = "home/appdata/Main/Apps/Settings"
GEN2_USERDATA = "users/buiowner/data"


@dataclass(frozen=True)
class FileTree:
    """Read-only view of an extracted directory; all paths are posix-relative."""

    root: Path
    labels: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "root", Path(self.root))

    def files(self) -> Iterator[str]:
        for dirpath, dirnames, filenames in os.walk(self.root):
            dirnames.sort()
            for name in sorted(filenames):
                full = Path(dirpath) / name
                if full.is_file() and not full.is_symlink():
                    yield full.relative_to(self.root).as_posix()

    def path(self, rel: str) -> Path:
        return self.root / rel

    def exists(self, rel: str) -> bool:
        return (self.root / rel).exists()

    def is_file(self, rel: str) -> bool:
        return (self.root / rel).is_file()

    def is_dir(self, rel: str) -> bool:
        return (self.root / rel).is_dir()

    def read(self, rel: str) -> bytes:
        return (self.root / rel).read_bytes()

    def listdir(self, rel: str) -> list[str]:
        d = self.root / rel
        if not d.is_dir():
            return []
        return sorted(p.name for p in d.iterdir())

    def sha256(self, rel: str) -> str:
        h = hashlib.sha256()
        with open(self.root / rel, "rb") as fh:
            for block in iter(lambda: fh.read(1 << 20), b""):
                h.update(block)
        return h.hexdigest()

    def find(self, name: str) -> Optional[str]:
        """First file (sorted walk order) with the given basename."""
        for rel in self.files():
            if rel.rsplit("/", 1)[-1] == name:
                return rel
        return None


def gen1_user_dirs(tree: FileTree) -> list[str]:
    return [
        f"{GEN1_SETTINGS}/{uid}"
        for uid in tree.listdir(GEN1_SETTINGS)
        if tree.is_file(f"{GEN1_SETTINGS}/{uid}/userObject.json")
    ]


def detect_generation(tree: FileTree) -> str:
    if not tree.root.is_dir():
        return UNKNOWN
    if gen1_user_dirs(tree):
        return GEN1
    if tree.is_dir(GEN2_USERDATA):
        return GEN2
    return UNKNOWN
