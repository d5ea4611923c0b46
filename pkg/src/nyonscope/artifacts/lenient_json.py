"""JSON loading that tolerates redaction placeholders found in evidence excerpts.

Outside string literals, ``[...]`` elisions are dropped, ``[REDACTED]`` becomes
``null``, dangling commas are removed, and a bare ``"key": value`` fragment is
wrapped in an object.
"""

from __future__ import annotations

import json

ELISION = "[...]"
REDACTED = "[REDACTED]"


def _strip_placeholders(text: str) -> str:
    out = []
    i, n = 0, len(text)
    in_str = False
    while i < n:
        c = text[i]
        if in_str:
            out.append(c)
            if c == "\\" and i + 1 < n:
                out.append(text[i + 1])
                i += 2
                continue
            if c == '"':
                in_str = False
            i += 1
            continue
        if c == '"':
            in_str = True
        elif text.startswith(ELISION, i):
            i += len(ELISION)
            continue
        elif text.startswith(REDACTED, i):
            out.append("null")
            i += len(REDACTED)
            continue
        out.append(c)
        i += 1
    return "".join(out)


def _drop_dangling_commas(text: str) -> str:
    out = []
    in_str = False
    i, n = 0, len(text)
    while i < n:
        c = text[i]
        if in_str:
            out.append(c)
            if c == "\\" and i + 1 < n:
                out.append(text[i + 1])
                i += 2
                continue
            if c == '"':
                in_str = False
            i += 1
            continue
        if c == '"':
            in_str = True
        elif c == ",":
            j = i + 1
            while j < n and text[j].isspace():
                j += 1
            prev = "".join(out).rstrip()[-1:]
            if j >= n or text[j] in "}],":
                i += 1
                continue
            if prev in ("{", "[", ","):
                i += 1
                continue
        out.append(c)
        i += 1
    return "".join(out)


def repair(text: str) -> str:
    fixed = _drop_dangling_commas(_strip_placeholders(text)).strip()
    if fixed.startswith('"'):
        fixed = "{" + fixed + "}"
    return fixed


def loads(text) -> tuple[object, bool]:
    """Return ``(value, repaired)``; raises ``json.JSONDecodeError`` if unrecoverable."""
    if isinstance(text, (bytes, bytearray)):
        text = bytes(text).decode("utf-8-sig")
    try:
        return json.loads(text), False
    except json.JSONDecodeError:
        return json.loads(repair(text)), True
