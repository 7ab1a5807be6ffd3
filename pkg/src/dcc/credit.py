"""Credit scores for accounts and projects, clamped to [0, 100]."""

from __future__ import annotations

from dataclasses import dataclass, field

SCORE_MIN = 0
SCORE_MAX = 100


def account_subject(account: str) -> str:
    return "acct:" + account


def project_subject(project_id: str) -> str:
    return "proj:" + project_id


@dataclass
class CreditRecord:
    subject: str
    score: int
    # (epoch, applied delta, cause); kept in memory, the event log is the durable copy
    history: list[tuple[int, int, str]] = field(default_factory=list)


class CreditBook:
    def __init__(self, initial: int = 60):
        if not SCORE_MIN <= initial <= SCORE_MAX:
            raise ValueError("initial credit outside [0, 100]")
        self.initial = initial
        self.records: dict[str, CreditRecord] = {}
        self._changes: list[list] = []

    def open(self, subject: str, score: int | None = None) -> CreditRecord:
        if subject not in self.records:
            self.records[subject] = CreditRecord(subject, self.initial if score is None else score)
        return self.records[subject]

    def score(self, subject: str) -> int:
        rec = self.records.get(subject)
        return self.initial if rec is None else rec.score

    def adjust(self, subject: str, delta: int, cause: str, epoch: int) -> int:
        """Apply ``delta`` with clamping; returns the delta actually applied."""
        rec = self.open(subject)
        new = min(SCORE_MAX, max(SCORE_MIN, rec.score + delta))
        applied = new - rec.score
        rec.score = new
        rec.history.append((epoch, applied, cause))
        self._changes.append([subject, new, applied, cause])
        return applied

    def take_changes(self) -> list[list]:
        """Return and clear ``[subject, new score, applied delta, cause]`` since the last call."""
        out, self._changes = self._changes, []
        return out

    def to_state(self) -> dict:
        return {s: r.score for s, r in self.records.items()}
