"""Case report: a JSON document (machine contract) and a Markdown rendering."""

from __future__ import annotations

import hashlib
import io
from collections import Counter
from dataclasses import dataclass, field
from typing import Optional

from nyonscope import chronicle
from nyonscope.artifacts.records import CaseBundle, canonical_json, ms_to_iso

REPORT_VERSION = 1

# values that rest on toolkit policy rather than on observed device behaviour
TOOLKIT_CONVENTION_FIELDS = (
    "trips[].tracks: gen-1 tracks are cut at time gaps above the configured threshold (default 300 s)",
    "timeline: ties on equal instants broken by a fixed source priority",
    "findings[].threshold: tamper thresholds are configuration (25 m/s, factor 3, step 25)",
    "findings STEP25: charts cadence heuristic, warn-only",
    "partitions: descriptor key=value format and fallback static layout",
    "wifi[]/bluetooth[]: gen-2 file locations and cef_debug.log line patterns are assumed",
    "logs[]: leading ISO-8601 timestamps on log lines are assumed",
    "epoch values: magnitudes of 10^12 and above read as milliseconds, smaller as seconds",
)


@dataclass
class Report:
    data: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return canonical_json(self.data) + "\n"

    def to_markdown(self) -> str:
        return _markdown(self.data)


def _cite(bundle: CaseBundle, path: Optional[str]) -> Optional[dict]:
    if not path:
        return None
    meta = bundle.provenance.get(path, {})
    return {"path": path, "sha256": meta.get("sha256")}


def _cite_kind(bundle: CaseBundle, kind: str) -> Optional[dict]:
    return _cite(bundle, bundle.artifact_path(kind))


def render_report(bundle: CaseBundle, timeline=None, findings=None, gap_threshold: float = chronicle.DEFAULT_GAP_S,
                  case_meta: Optional[dict] = None) -> Report:
    """Deterministic report over an assembled bundle, its timeline and tamper findings."""
    timeline = list(timeline) if timeline is not None else chronicle.build_timeline(bundle)
    findings = list(findings or [])
    profile = None
    if bundle.profile is not None:
        p = bundle.profile
        profile = {
            "user_id": p.user_id, "first_name": p.first_name, "last_name": p.last_name, "email": p.email,
            "date_of_birth": p.date_of_birth, "gender": p.gender, "home_address": p.home_address,
            "mobile_phone_number": p.mobile_phone_number,
            "provenance": _cite_kind(bundle, "userObject.json") or _cite_kind(bundle, "active-account.json"),
        }
    bikes = [{
        "serials": b.serials, "software_version": b.software_version, "hardware_version": b.hardware_version,
        "battery_packs": len(b.battery_packs), "provenance": _cite_kind(bundle, "bike-info.json"),
    } for b in bundle.bikes]
    if bundle.settings is not None and bundle.settings.serials:
        bikes.append({"serials": bundle.settings.serials, "software_version": None, "hardware_version": None,
                      "battery_packs": None, "provenance": _cite_kind(bundle, "Settings.ini")})
    wifi = [{"ssid": n.ssid, "security": n.security, "passphrase": n.passphrase,
             "last_modified": ms_to_iso(n.last_modified_ms), "provenance": _cite(bundle, n.path)}
            for n in bundle.wifi]
    bluetooth = [{"address": d.address, "name": d.name, "trusted": d.trusted, "source": d.source,
                  "observed_at": ms_to_iso(d.observed_at_ms), "provenance": _cite(bundle, d.path)}
                 for d in bundle.bluetooth]
    track_prov = _cite_kind(bundle, "tracking.db") if bundle.trips else _cite_kind(bundle, "EBike")
    trips = []
    for t in chronicle.tracks_from_bundle(bundle, gap_threshold):
        trips.append({
            "trip_id": t.trip_id, "points": len(t.points),
            "start": ms_to_iso(t.points[0].timestamp_ms) if t.points else None,
            "end": ms_to_iso(t.points[-1].timestamp_ms) if t.points else None,
            "distance_m": round(t.distance_m, 3), "duration_s": t.duration_s, "max_gap_s": t.max_gap_s,
            "provenance": track_prov,
        })
    buf = io.StringIO()
    chronicle.write_jsonl(timeline, buf)
    by_source = Counter(ev.source for ev in timeline)
    timeline_ref = {
        "events": len(timeline),
        "first": timeline[0].instant if timeline else None,
        "last": timeline[-1].instant if timeline else None,
        "by_source": dict(sorted(by_source.items())),
        "jsonl_sha256": hashlib.sha256(buf.getvalue().encode("utf-8")).hexdigest(),
    }
    data = {
        "report_version": REPORT_VERSION,
        "case": dict(case_meta or {}, generation=bundle.generation, labels=bundle.labels,
                     absent=list(bundle.absent), diagnostics=list(bundle.diagnostics)),
        "generation": bundle.generation,
        "profile": profile,
        "bikes": bikes,
        "wifi": wifi,
        "bluetooth": bluetooth,
        "trips": trips,
        "timeline": timeline_ref,
        "findings": [f.to_dict() for f in findings],
        "provenance": [dict(path=path, **meta) for path, meta in sorted(bundle.provenance.items())],
        "toolkit_convention_fields": list(TOOLKIT_CONVENTION_FIELDS),
    }
    return Report(data)


def _md_cell(value) -> str:
    text = "" if value is None else str(value)
    return text.replace("|", "\\|").replace("\n", " ")


def _md_table(headers, rows) -> list[str]:
    out = ["| " + " | ".join(headers) + " |", "|" + "---|" * len(headers)]
    out += ["| " + " | ".join(_md_cell(c) for c in row) + " |" for row in rows]
    return out


def _src(prov: Optional[dict]) -> str:
    if not prov:
        return ""
    return f"{prov['path']} ({(prov.get('sha256') or '')[:12]})"


def _markdown(d: dict) -> str:
    lines = [f"# Case report ({d['generation']})", ""]
    lines.append("> **Toolkit-convention fields.** The values below depend on toolkit policy, "
                 "not on observed device behaviour:")
    for item in d["toolkit_convention_fields"]:
        lines.append(f"> - {item}")
    lines.append("")
    case = d["case"]
    if case.get("absent"):
        lines += [f"Absent artifacts: {', '.join(case['absent'])}", ""]
    if case.get("diagnostics"):
        lines += ["Diagnostics:", ""] + [f"- {_md_cell(x)}" for x in case["diagnostics"]] + [""]

    lines += ["## Profile", ""]
    p = d["profile"]
    if p:
        lines += _md_table(["field", "value"], [
            ["user_id", p["user_id"]], ["name", f"{p['first_name'] or ''} {p['last_name'] or ''}".strip()],
            ["email", p["email"]], ["date_of_birth", p["date_of_birth"]],
            ["mobile_phone_number", p["mobile_phone_number"]], ["source", _src(p["provenance"])],
        ])
    else:
        lines.append("No profile recovered.")
    lines.append("")

    lines += ["## Bikes", ""]
    lines += _md_table(["serials", "software", "source"],
                       [[", ".join(f"{k}={v}" for k, v in sorted(b["serials"].items())), b["software_version"],
                         _src(b["provenance"])] for b in d["bikes"]]) if d["bikes"] else ["None."]
    lines.append("")

    lines += ["## Wi-Fi networks", ""]
    lines += _md_table(["ssid", "security", "passphrase", "last modified", "source"],
                       [[n["ssid"], n["security"], n["passphrase"], n["last_modified"], _src(n["provenance"])]
                        for n in d["wifi"]]) if d["wifi"] else ["None."]
    lines.append("")

    lines += ["## Bluetooth devices", ""]
    lines += _md_table(["address", "name", "trusted", "observed", "source"],
                       [[b["address"], b["name"], b["trusted"], b["observed_at"], _src(b["provenance"])]
                        for b in d["bluetooth"]]) if d["bluetooth"] else ["None."]
    lines.append("")

    lines += ["## Trips", ""]
    lines += _md_table(["trip", "points", "start", "end", "distance m", "duration s", "max gap s", "source"],
                       [[t["trip_id"], t["points"], t["start"], t["end"], t["distance_m"], t["duration_s"],
                         t["max_gap_s"], _src(t["provenance"])] for t in d["trips"]]) if d["trips"] else ["None."]
    lines.append("")

    tl = d["timeline"]
    lines += ["## Timeline", "",
              f"{tl['events']} events from {tl['first']} to {tl['last']}; JSONL sha256 {tl['jsonl_sha256']}", ""]

    lines += ["## Findings", ""]
    if d["findings"]:
        lines += _md_table(["rule", "severity", "subject", "detail"],
                           [[f["rule"], f["severity"],
                             f"{f['subject'].get('path')} {f['subject'].get('locator') or ''}".strip(), f["detail"]]
                            for f in d["findings"]])
    else:
        lines.append("No findings.")
    lines.append("")

    lines += ["## Provenance", ""]
    lines += _md_table(["path", "artifact", "size", "sha256"],
                       [[p["path"], p["artifact"], p["size"], p["sha256"]] for p in d["provenance"]]) \
        if d["provenance"] else ["No artifacts recorded."]
    lines.append("")
    return "\n".join(lines)
