"""Read-only SQLite access for evidence databases."""

from __future__ import annotations

import sqlite3
from contextlib import contextmanager
from pathlib import Path


class CorruptDatabase(Exception):
    pass


@contextmanager
def open_ro(path):
    uri = Path(path).resolve().as_uri() + "?mode=ro&immutable=1"
    try:
        conn = sqlite3.connect(uri, uri=True)
    except sqlite3.Error as exc:
        raise CorruptDatabase(f"{path}: {exc}") from exc
    try:
        conn.row_factory = sqlite3.Row
        try:
            conn.execute("SELECT count(*) FROM sqlite_master").fetchone()
        except sqlite3.DatabaseError as exc:
            raise CorruptDatabase(f"{path}: {exc}") from exc
        yield conn
    finally:
        conn.close()


def tables(conn) -> list[str]:
    rows = conn.execute("SELECT name FROM sqlite_master WHERE type='table' AND name NOT LIKE 'sqlite_%' ORDER BY name")
    return [r[0] for r in rows]


def columns(conn, table: str) -> list[str]:
    return [r[1] for r in conn.execute(f'PRAGMA table_info("{table}")')]


def has_rowid(conn, table: str) -> bool:
    try:
        conn.execute(f'SELECT rowid FROM "{table}" LIMIT 1')
        return True
    except sqlite3.OperationalError:
        return False


def rows(conn, table: str) -> list[dict]:
    """All rows in storage order, with ``__rowid__`` when the table has one."""
    try:
        if has_rowid(conn, table):
            cur = conn.execute(f'SELECT rowid AS __rowid__, * FROM "{table}" ORDER BY rowid')
        else:
            cur = conn.execute(f'SELECT * FROM "{table}"')
        return [dict(r) for r in cur]
    except sqlite3.DatabaseError as exc:
        raise CorruptDatabase(f"table {table}: {exc}") from exc


def find_table(conn, name: str):
    """Case-insensitive table lookup."""
    for t in tables(conn):
        if t.lower() == name.lower():
            return t
    return None
