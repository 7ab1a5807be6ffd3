"""Event-log persistence, replay and audit.

A log is JSON lines, one canonical record per line. :func:`replay`
re-executes a log on a fresh :class:`~dcc.system.Ecosystem` and fails at the
first record whose regenerated form differs from what was written.
:func:`verify` audits a log without re-executing it: token conservation per
record, election rosters against their seeds and snapshots, settlement
arithmetic and credit clamps.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

from dcc.canonical import dumps
from dcc.credit import SCORE_MAX, SCORE_MIN
from dcc.crowdfunding import settlement_violations
from dcc.errors import CorruptLog, DCCError
from dcc.governance import GovernanceConfig, elect_from_snapshot, epoch_seed
from dcc.ledger import KINDS
from dcc.system import COMMANDS, Ecosystem, Params, apply

HOLDER_PREFIXES = ("acct:", "escrow:", "pool:", "lock:")
COUNTERS = ("minted", "burned")


def parse_events(lines: Iterable[str]) -> Iterator[dict]:
    for seq, line in enumerate(lines):
        line = line.strip()
        if not line:
            continue
        try:
            event = json.loads(line)
        except json.JSONDecodeError as exc:
            raise CorruptLog(seq, f"not valid JSON: {exc.msg}") from None
        if not isinstance(event, dict) or not {"seq", "epoch", "op", "payload", "state_hash"} <= set(event):
            raise CorruptLog(seq, "record lacks one of seq/epoch/op/payload/state_hash")
        if event["seq"] != seq:
            raise CorruptLog(seq, f"record carries seq {event['seq']}")
        yield event


def read_events(path: str | Path) -> list[dict]:
    with open(path, encoding="utf-8") as fh:
        return list(parse_events(fh))


def write_events(path: str | Path, events: Iterable[dict]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for ev in events:
            fh.write(dumps(ev) + "\n")


def genesis_hash() -> str:
    return Ecosystem().last_hash


# -- replay --------------------------------------------------------------------


def replay(events: Iterable[dict]) -> str:
    """Re-apply every record on a fresh ecosystem; returns the final state hash."""
    eco = Ecosystem()
    for ev in events:
        seq = ev["seq"]
        if ev["op"] not in COMMANDS:
            raise CorruptLog(seq, f"unknown operation {ev['op']!r}")
        payload = ev.get("payload")
        if not isinstance(payload, dict) or not isinstance(payload.get("args"), dict):
            raise CorruptLog(seq, "payload has no args object")
        try:
            apply(eco, ev["op"], payload["args"])
        except (DCCError, TypeError, ValueError, KeyError, AttributeError) as exc:
            raise CorruptLog(seq, f"operation no longer applies: {exc}") from None
        regenerated = eco.events[-1]
        if dumps(regenerated) != dumps(ev):
            what = "state hash" if regenerated["state_hash"] != ev["state_hash"] else "record"
            raise CorruptLog(seq, f"{what} differs from re-execution")
    return eco.last_hash


# -- static audit ------------------------------------------------------------------


@dataclass(frozen=True)
class Violation:
    seq: int
    check: str
    message: str

    def __str__(self) -> str:
        return f"seq {self.seq}: [{self.check}] {self.message}"


@dataclass
class AuditReport:
    events: int = 0
    final_hash: str = ""
    violations: list[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def counts(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for v in self.violations:
            out[v.check] = out.get(v.check, 0) + 1
        return out


class _Auditor:
    def __init__(self):
        self.report = AuditReport(final_hash=genesis_hash())
        self.holdings: dict[tuple[str, str], int] = {}
        self.params = Params()
        self.scores: dict[str, int] = {}

    def flag(self, seq: int, check: str, message: str) -> None:
        self.report.violations.append(Violation(seq, check, message))

    def conservation(self, seq: int, effects) -> None:
        net = {k.value: 0 for k in KINDS}
        for entry in effects:
            if not (isinstance(entry, list) and len(entry) == 3):
                self.flag(seq, "conservation", f"malformed effect {entry!r}")
                continue
            holder, kind, delta = entry
            if kind not in net or not isinstance(delta, int):
                self.flag(seq, "conservation", f"malformed effect {entry!r}")
                continue
            if holder == "minted":
                net[kind] -= delta
            elif holder == "burned":
                net[kind] += delta
            elif holder.startswith(HOLDER_PREFIXES):
                net[kind] += delta
                key = (holder, kind)
                self.holdings[key] = self.holdings.get(key, 0) + delta
                if self.holdings[key] < 0:
                    self.flag(seq, "conservation", f"{holder} {kind} holding went negative")
            else:
                self.flag(seq, "conservation", f"unknown holder {holder!r}")
        for kind, diff in net.items():
            if diff:
                self.flag(seq, "conservation", f"{kind}: holdings changed by {diff} more than minted minus burned")

    def election(self, seq: int, ev: dict, prev_hash: str) -> None:
        result = ev["payload"]["result"]
        try:
            seed, snapshot, roster = result["seed"], result["snapshot"], result["roster"]
        except (KeyError, TypeError):
            self.flag(seq, "election", "election record lacks seed/snapshot/roster")
            return
        if seed != epoch_seed(prev_hash, ev["epoch"]):
            self.flag(seq, "election", "seed is not derived from the previous state hash")
        for party, members in snapshot.get("members", {}).items():
            held = sum(self.holdings.get(("acct:" + m, "governance"), 0) for m in members)
            if snapshot.get("tokens", {}).get(party) != held:
                self.flag(seq, "election", f"{party} token snapshot disagrees with recorded balances")
        try:
            expected = elect_from_snapshot(snapshot, seed, ev["epoch"], self.params.governance).roster()
        except (DCCError, KeyError, TypeError, ValueError) as exc:
            self.flag(seq, "election", f"election cannot be recomputed: {exc}")
            return
        if expected != roster:
            self.flag(seq, "election", "recorded roster differs from the recomputed election")

    def credit(self, seq: int, changes) -> None:
        for subject, score, applied, _cause in changes:
            if not SCORE_MIN <= score <= SCORE_MAX:
                self.flag(seq, "credit", f"{subject} score {score} outside [{SCORE_MIN}, {SCORE_MAX}]")
            before = self.scores.get(subject, self.params.initial_credit)
            if before + applied != score:
                self.flag(seq, "credit", f"{subject}: {before} + {applied} != {score}")
            self.scores[subject] = score

    def feed(self, ev: dict, prev_hash: str) -> None:
        seq, op, payload = ev["seq"], ev["op"], ev["payload"]
        if op not in COMMANDS:
            self.flag(seq, "operation", f"unknown operation {op!r}")
        if op == "configure":
            if seq != 0:
                self.flag(seq, "operation", "configure after the first record")
            else:
                try:
                    self.params = Params.from_dict(payload["args"]["params"])
                except (DCCError, KeyError, TypeError, ValueError) as exc:
                    self.flag(seq, "operation", f"unreadable configuration: {exc}")
        self.conservation(seq, payload.get("effects", []))
        self.credit(seq, payload.get("credit", []))
        if op == "hold_election":
            self.election(seq, ev, prev_hash)
        elif op == "settle":
            for msg in settlement_violations(payload["result"]):
                self.flag(seq, "settlement", msg)


def verify(events: Iterable[dict], *, deep: bool = False) -> AuditReport:
    """Audit a log; ``deep`` additionally replays it (raising CorruptLog on divergence)."""
    auditor = _Auditor()
    prev = auditor.report.final_hash
    seen = []
    for ev in events:
        try:
            auditor.feed(ev, prev)
        except (KeyError, TypeError, ValueError) as exc:
            auditor.flag(ev.get("seq", -1), "format", f"malformed record: {exc}")
        prev = ev["state_hash"]
        auditor.report.events += 1
        if deep:
            seen.append(ev)
    auditor.report.final_hash = prev
    if deep:
        replay(seen)
    return auditor.report
