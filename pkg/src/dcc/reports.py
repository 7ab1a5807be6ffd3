"""Reports and CSV exports computed purely from an event log."""

from __future__ import annotations

import csv
import io
from fractions import Fraction
from typing import Iterable

from dcc.econ import MetricsTracker
from dcc.errors import UnknownKind

KINDS = ("metrics", "credit", "settlements", "assembly")

COLUMNS = {
    "metrics": ["epoch", "token_supply", "total_information", "invalid_information", "valid_ratio",
                "absorbed_tokens", "circulation_ratio", "inflation_ratio"],
    "credit": ["epoch", "subject", "score", "cause"],
    "settlements": ["epoch", "project", "outcome", "target", "raised", "marketing_pool", "production_fund",
                    "capital_returned", "labor_refunded", "labor_burned"],
    "assembly": ["epoch", "seat", "role", "holder", "party", "party_seat"],
}


def _num(value) -> str:
    if isinstance(value, Fraction):
        return f"{float(value):.6f}"
    return str(value)


def metrics_rows(events: list[dict]) -> list[dict]:
    tracker = MetricsTracker()
    for ev in events:
        tracker.feed(ev)
    if not tracker.by_epoch:
        return []
    return [tracker.window(e, e).as_row() for e in range(min(tracker.by_epoch), max(tracker.by_epoch) + 1)]


def credit_rows(events: Iterable[dict]) -> list[dict]:
    return [
        {"epoch": ev["epoch"], "subject": subject, "score": score, "cause": cause}
        for ev in events
        for subject, score, _applied, cause in ev["payload"].get("credit", [])
    ]


def settlement_rows(events: Iterable[dict]) -> list[dict]:
    out = []
    for ev in events:
        if ev["op"] != "settle":
            continue
        r = ev["payload"]["result"]
        out.append({
            "epoch": ev["epoch"],
            "project": r["project"],
            "outcome": r["outcome"],
            "target": r["target"],
            "raised": r["raised"],
            "marketing_pool": r["marketing_pool"],
            "production_fund": r["production_fund"],
            "capital_returned": sum(r["capital_returned"].values()),
            "labor_refunded": sum(r["labor_refunded"].values()),
            "labor_burned": r["labor_burned"],
        })
    return out


def assembly_rows(events: Iterable[dict]) -> list[dict]:
    out = []
    for ev in events:
        if ev["op"] not in ("hold_election", "impeach_chief"):
            continue
        for seat, role, holder, party, party_seat in ev["payload"]["result"]["roster"]:
            out.append({"epoch": ev["epoch"], "seat": seat, "role": role, "holder": holder,
                        "party": party, "party_seat": party_seat})
    return out


_ROWS = {"metrics": metrics_rows, "credit": credit_rows, "settlements": settlement_rows, "assembly": assembly_rows}


def to_csv(events: list[dict], kind: str) -> str:
    if kind not in _ROWS:
        raise UnknownKind(f"unknown report kind {kind!r}; expected one of {', '.join(KINDS)}")
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(COLUMNS[kind])
    for row in _ROWS[kind](events):
        writer.writerow([_num(row[c]) for c in COLUMNS[kind]])
    return buf.getvalue()


def build_report(events: list[dict], final_hash: str) -> dict:
    """Run summary: final hash plus the per-epoch series the CSV exports carry."""
    metrics = [{k: _num(v) for k, v in row.items()} for row in metrics_rows(events)]
    return {
        "events": len(events),
        "final_state_hash": final_hash,
        "metrics": metrics,
        "settlements": settlement_rows(events),
        "assemblies": assembly_rows(events),
        "credit": credit_rows(events),
    }
