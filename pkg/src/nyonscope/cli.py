"""``nyonscope`` command line.

Exit codes: 0 success, 1 usage error, 2 parse failure, 3 crypto failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sqlite3
import sys
from pathlib import Path

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_PARSE = 2
EXIT_CRYPTO = 3

log = logging.getLogger("nyonscope")


class UsageError(Exception):
    pass


class Failure(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _write(out, text: str) -> None:
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(out).write_text(text, encoding="utf-8")


def _load_bundle(path):
    from nyonscope.artifacts.records import CaseBundle

    try:
        return CaseBundle.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
    except FileNotFoundError:
        raise Failure(EXIT_PARSE, f"{path}: no such file") from None
    except (ValueError, TypeError, KeyError, AttributeError) as exc:
        raise Failure(EXIT_PARSE, f"{path}: not a bundle: {exc}") from None


def _open_image(path):
    from nyonscope.image import ImageError, open_image

    try:
        return open_image(path)
    except ImageError as exc:
        raise Failure(EXIT_PARSE, str(exc)) from None


def cmd_partitions(args) -> int:
    from nyonscope.image import parse_partition_table

    image = _open_image(args.image)
    pmap = parse_partition_table(image)
    rows = pmap.to_json(None if args.no_hash else image)
    if args.json:
        _write(args.out, json.dumps({"image": str(args.image), "size": image.size, "source": pmap.source,
                                     "warnings": pmap.warnings, "partitions": rows}, indent=2) + "\n")
    else:
        lines = [f"{image.path} ({image.size} bytes, layout from {pmap.source})"]
        for r in rows:
            lines.append(f"{r['offset']:#014x} {r['size']:>14} {r['role']:<20} {r['name'] or '-'}"
                         + (f"  {r['sha256']}" if r["sha256"] else ""))
        lines += [f"warning: {w}" for w in pmap.warnings]
        _write(args.out, "\n".join(lines) + "\n")
    return EXIT_OK


def cmd_unlock(args) -> int:
    from nyonscope import luks
    from nyonscope.image import Role, parse_partition_table

    image = _open_image(args.image)
    out = Path(args.out)
    if out.resolve() == image.path.resolve():
        raise UsageError("--out must not be the evidence image")
    regions = parse_partition_table(image).by_role(Role.USERDATA_ENCRYPTED)
    if not regions:
        raise Failure(EXIT_PARSE, "no encrypted userdata region found")
    entry = regions[0]
    try:
        head = luks.read_luks_head(image, entry)
        header = luks.parse_luks_header(head)
        if args.keyfile:
            candidates = [Path(k) for k in args.keyfile]
        else:
            candidates = luks.hunt_keyfiles(args.hunt, key_bytes=args.key_bytes or header.key_bytes)
            if not candidates:
                raise luks.WrongKey(f"no {args.key_bytes or header.key_bytes}-byte candidate files in the hunted trees")
        for c in candidates:
            if not c.is_file():
                raise UsageError(f"keyfile {c} not found")
        master, used = luks.unlock_with_candidates(header, candidates, head)
        path, digest = luks.decrypt_payload(image, entry, master, out)
    except luks.LuksError as exc:
        raise Failure(EXIT_CRYPTO, str(exc)) from None
    _write(None, json.dumps({"out": str(path), "sha256": digest, "keyfile": str(used), "slot": master.slot,
                             "region_offset": entry.offset}, indent=2) + "\n")
    return EXIT_OK


def cmd_parse(args) -> int:
    from nyonscope.artifacts import assemble_bundle
    from nyonscope.artifacts.gen2 import load_schema_profile
    from nyonscope.artifacts.sqlite_util import CorruptDatabase

    tree = Path(args.tree)
    if not tree.is_dir():
        raise Failure(EXIT_PARSE, f"{tree}: not a directory")
    overrides = {}
    for item in args.override or []:
        kind, sep, rel = item.partition("=")
        if not sep:
            raise UsageError(f"--override expects KIND=PATH, got {item!r}")
        overrides[kind] = rel
    try:
        profile = load_schema_profile(args.schema_profile) if args.schema_profile else None
    except (OSError, ValueError) as exc:
        raise Failure(EXIT_PARSE, f"schema profile: {exc}") from None
    generation = None if args.generation == "auto" else args.generation
    try:
        bundle = assemble_bundle(tree, generation=generation, overrides=overrides, schema_profile=profile)
    except (CorruptDatabase, sqlite3.Error, OSError) as exc:
        raise Failure(EXIT_PARSE, str(exc)) from None
    if bundle.generation not in ("gen1", "gen2"):
        raise Failure(EXIT_PARSE, f"{tree}: generation could not be detected")
    _write(args.out, bundle.to_json() + "\n")
    for d in bundle.diagnostics:
        log.warning(d)
    return EXIT_OK


def cmd_timeline(args) -> int:
    from nyonscope import chronicle

    bundle = _load_bundle(args.bundle)
    quarantine: list = []
    events = chronicle.build_timeline(bundle, quarantine)
    if args.out in (None, "-"):
        chronicle.write_jsonl(events, sys.stdout)
    else:
        with open(args.out, "w", encoding="utf-8") as fh:
            chronicle.write_jsonl(events, fh)
    log.info("%d events, %d without a usable timestamp", len(events), len(quarantine))
    return EXIT_OK


def cmd_export_gpx(args) -> int:
    from nyonscope import chronicle

    bundle = _load_bundle(args.bundle)
    tracks = chronicle.tracks_from_bundle(bundle, args.gap)
    match = [t for t in tracks if str(t.trip_id) == str(args.trip)]
    if not match:
        known = ", ".join(str(t.trip_id) for t in tracks) or "none"
        raise UsageError(f"no trip {args.trip!r} (available: {known})")
    data = chronicle.export_gpx(match[0])
    if args.out in (None, "-"):
        sys.stdout.buffer.write(data)
    else:
        Path(args.out).write_bytes(data)
    return EXIT_OK


def _sentry_config(path):
    from nyonscope.sentry import SentryConfig

    if not path:
        return SentryConfig()
    try:
        return SentryConfig.load(path)
    except (OSError, ValueError, TypeError) as exc:
        raise UsageError(f"--config {path}: {exc}") from None


def cmd_tamper_check(args) -> int:
    from nyonscope.sentry import findings_to_json, run_checks

    cfg = _sentry_config(args.config)
    findings = run_checks(_load_bundle(args.bundle), cfg)
    _write(args.out, json.dumps(findings_to_json(findings), indent=2, sort_keys=True) + "\n")
    return EXIT_OK


def cmd_forge(args) -> int:
    from nyonscope.forge import (auto_waypoints, emit_image, emit_tree, forge_case, forge_odometer_rollback,
                                 forge_trip)
    from nyonscope.forge.luks_ref import ReferenceToolMissing

    if args.image and args.generation != "gen2":
        raise UsageError("--image needs --generation gen2")
    if args.tamper and args.generation != "gen1":
        raise UsageError("--tamper applies to gen1 trees")
    out = Path(args.out)
    case = forge_case(args.seed, args.generation, trips=args.trips, points_per_trip=args.points)
    if args.image:
        try:
            manifest = emit_image(case, out, scale=args.scale, decoys=args.decoys)
        except ReferenceToolMissing as exc:
            raise Failure(EXIT_CRYPTO, f"skipped: {exc}") from None
    else:
        _, manifest = emit_tree(case, out / "tree")
        if args.tamper == "odometer":
            manifest["tamper"] = forge_odometer_rollback(out / "tree")
        elif args.tamper:
            waypoints = auto_waypoints(out / "tree", count=5, seed=args.seed)
            manifest["tamper"] = forge_trip(out / "tree", waypoints, args.tamper)
        (out / "manifest.json").write_text(json.dumps(manifest, indent=1, sort_keys=True))
    print(out / "manifest.json")
    return EXIT_OK


def cmd_report(args) -> int:
    from nyonscope import chronicle
    from nyonscope.report import render_report
    from nyonscope.sentry import run_checks

    bundle = _load_bundle(args.bundle)
    findings = run_checks(bundle, _sentry_config(args.config))
    report = render_report(bundle, chronicle.build_timeline(bundle), findings, gap_threshold=args.gap)
    fmt = args.format or ("md" if str(args.out or "").endswith(".md") else "json")
    _write(args.out, report.to_markdown() if fmt == "md" else report.to_json())
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="nyonscope", description="Forensic toolkit for e-bike board-computer evidence.")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)

    s = sub.add_parser("partitions", help="list partitions of a raw image")
    s.add_argument("image")
    s.add_argument("--json", action="store_true")
    s.add_argument("--no-hash", action="store_true", help="skip per-partition SHA-256")
    s.add_argument("--out")
    s.set_defaults(func=cmd_partitions)

    s = sub.add_parser("unlock", help="unlock and decrypt the LUKS1 userdata region")
    s.add_argument("image")
    g = s.add_mutually_exclusive_group(required=True)
    g.add_argument("--keyfile", action="append")
    g.add_argument("--hunt", action="append", metavar="TREE", help="directory to search for keyfiles (repeatable)")
    s.add_argument("--key-bytes", type=int, help="candidate size (defaults to the header key size)")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_unlock)

    s = sub.add_parser("parse", help="assemble a bundle from an extracted tree")
    s.add_argument("tree")
    s.add_argument("--generation", choices=("auto", "gen1", "gen2"), default="auto")
    s.add_argument("--override", action="append", metavar="KIND=PATH")
    s.add_argument("--schema-profile", help="tracking.db schema profile (overrides $NYONSCOPE_SCHEMA_PROFILE)")
    s.add_argument("--out")
    s.set_defaults(func=cmd_parse)

    s = sub.add_parser("timeline", help="write the ordered timeline as JSON lines")
    s.add_argument("bundle")
    s.add_argument("--out")
    s.set_defaults(func=cmd_timeline)

    s = sub.add_parser("export-gpx", help="export one trip as GPX 1.1")
    s.add_argument("bundle")
    s.add_argument("--trip", required=True)
    s.add_argument("--gap", type=float, default=300.0, help="gen-1 track split threshold in seconds")
    s.add_argument("--out")
    s.set_defaults(func=cmd_export_gpx)

    s = sub.add_parser("tamper-check", help="run consistency checks on a bundle")
    s.add_argument("bundle")
    s.add_argument("--config")
    s.add_argument("--out")
    s.set_defaults(func=cmd_tamper_check)

    s = sub.add_parser("forge", help="generate a synthetic fixture with its manifest")
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--generation", choices=("gen1", "gen2"), required=True)
    s.add_argument("--trips", type=int, default=3)
    s.add_argument("--points", type=int, default=12)
    s.add_argument("--image", action="store_true")
    s.add_argument("--scale", choices=("default", "full"), default="default")
    s.add_argument("--decoys", type=int, default=1)
    s.add_argument("--tamper", choices=("reversed", "plausible", "duplicate", "odometer"))
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_forge)

    s = sub.add_parser("report", help="render a JSON or Markdown report")
    s.add_argument("bundle")
    s.add_argument("--config")
    s.add_argument("--gap", type=float, default=300.0)
    s.add_argument("--format", choices=("json", "md"))
    s.add_argument("--out")
    s.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if not getattr(args, "func", None):
            parser.print_help(sys.stderr)
            return EXIT_USAGE
        logging.basicConfig(level=logging.DEBUG if args.verbose > 1 else logging.INFO if args.verbose else
                            logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
        return args.func(args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except Failure as exc:
        print(f"nyonscope: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
