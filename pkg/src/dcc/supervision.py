"""Distributed supervision: content audits, tip-offs, satisfaction and credit escalation.

Arbitral votes accumulate over an evaluation interval and are tallied only
once the interval has closed. A tip-off passes a preliminary audit, gives
the accused a rebuttal window, and then ends in exactly one of
``RefutedSuccessfully``, ``Upheld`` or ``Dismissed``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction

from dcc.canonical import RecordCache, dumps
from dcc.credit import CreditBook, account_subject, project_subject
from dcc.crowdfunding import TERMINAL, Crowdfunding, ProjectState, SuspendCause
from dcc.errors import (
    ChallengeWindowClosed,
    CreditTooLow,
    DuplicateRating,
    DuplicateVote,
    InsufficientBalance,
    IntervalOpen,
    NotAFunder,
    NotArbitral,
    NotTheTarget,
    PastDeadline,
    UnknownCase,
    WrongState,
)
from dcc.governance import Governance
from dcc.ledger import Ledger, MintReason, TokenKind


class ContentStatus(str, Enum):
    PENDING_AUDIT = "PendingAudit"
    ACCEPTED = "Accepted"
    REVOKED = "Revoked"


class TipOffState(str, Enum):
    PENDING_AUDIT = "PendingAudit"
    PUBLISHED = "Published"
    AWAITING_REBUTTAL = "AwaitingRebuttal"
    REFUTED = "RefutedSuccessfully"
    UPHELD = "Upheld"
    DISMISSED = "Dismissed"


TIPOFF_TERMINAL = frozenset({TipOffState.REFUTED, TipOffState.UPHELD, TipOffState.DISMISSED})


class Category(str, Enum):
    PLAGIARISM = "Plagiarism"
    FAKE = "Fake"
    FRAUD = "Fraud"
    LOW_CREATIVITY = "LowCreativity"


@dataclass
class SupervisionConfig:
    tipoff_credit_floor: int = 60
    delta_guilty: int = 15
    delta_false: int = 10
    delta_investigation: int = 5
    warning_line: int = 30
    hard_floor: int = 15
    content_reward: int = 50
    whistleblower_reward: int = 20
    deposit_min: int = 10
    satisfaction_weight: int = 5
    audit_interval: int = 1
    rebuttal_window: int = 2
    arbitration_interval: int = 1
    challenge_window: int = 8


@dataclass
class EvaluationInterval:
    start: int
    length: int
    votes: dict[str, bool] = field(default_factory=dict)

    @property
    def closes(self) -> int:
        return self.start + self.length

    def is_open(self, epoch: int) -> bool:
        return epoch < self.closes

    def approval(self) -> Fraction:
        """Cumulative approval over every vote cast; no votes means no approval."""
        if not self.votes:
            return Fraction(0)
        return Fraction(sum(self.votes.values()), len(self.votes))

    def to_state(self) -> list:
        return [self.start, self.length, self.votes]


@dataclass
class ContentRecord:
    id: str
    creator: str
    digest: str
    status: ContentStatus
    audit: EvaluationInterval
    reward_paid: int = 0
    accepted_epoch: int | None = None
    open_case: str | None = None

    def to_state(self) -> list:
        return [self.creator, self.digest, self.status.value, self.audit.to_state(), self.reward_paid,
                self.accepted_epoch, self.open_case]


@dataclass
class TipOff:
    id: str
    reporter: str
    target_kind: str
    target_id: str
    category: Category
    deposit: int
    submitted: int
    audit: EvaluationInterval
    state: TipOffState = TipOffState.PENDING_AUDIT
    rebuttal_deadline: int | None = None
    rebuttal: str | None = None
    arbitration: EvaluationInterval | None = None
    trace: list[str] = field(default_factory=list)

    @property
    def deposit_escrow(self) -> str:
        return self.id + ".deposit"

    def to_state(self) -> dict:
        return {
            "arbitration": self.arbitration.to_state() if self.arbitration else None,
            "audit": self.audit.to_state(),
            "category": self.category.value,
            "deposit": self.deposit,
            "deadline": self.rebuttal_deadline,
            "rebuttal": self.rebuttal,
            "reporter": self.reporter,
            "state": self.state.value,
            "submitted": self.submitted,
            "target": [self.target_kind, self.target_id],
        }


def _content_key(c: ContentRecord):
    return (c.status, len(c.audit.votes), c.open_case, c.reward_paid)


def _tipoff_key(t: TipOff):
    return (t.state, len(t.audit.votes), t.rebuttal, t.rebuttal_deadline,
            len(t.arbitration.votes) if t.arbitration else -1)


class Supervision:
    def __init__(self, ledger: Ledger, credit: CreditBook, governance: Governance, crowdfunding: Crowdfunding,
                 config: SupervisionConfig | None = None):
        self.ledger = ledger
        self.credit = credit
        self.governance = governance
        self.crowdfunding = crowdfunding
        self.config = config or SupervisionConfig()
        self.contents: dict[str, ContentRecord] = {}
        self.tipoffs: dict[str, TipOff] = {}
        self.ratings: set[tuple[str, int, str]] = set()
        self.investigating: set[str] = set()
        self.archived = {"accepted": 0, "revoked": 0, "dropped": 0, "tipoffs": 0}
        self._next_content = 1
        self._next_tipoff = 1
        self._content_json = RecordCache(_content_key, ContentRecord.to_state)
        self._tipoff_json = RecordCache(_tipoff_key, TipOff.to_state)

    # -- lookup ------------------------------------------------------------

    def content(self, content_id: str) -> ContentRecord:
        try:
            return self.contents[content_id]
        except KeyError:
            raise UnknownCase(content_id) from None

    def tipoff(self, tipoff_id: str) -> TipOff:
        try:
            return self.tipoffs[tipoff_id]
        except KeyError:
            raise UnknownCase(tipoff_id) from None

    def _interval_for(self, case_id: str) -> EvaluationInterval:
        if case_id in self.contents:
            rec = self.contents[case_id]
            if rec.status != ContentStatus.PENDING_AUDIT:
                raise WrongState(f"{case_id} is no longer under audit")
            return rec.audit
        t = self.tipoff(case_id)
        if t.state == TipOffState.PENDING_AUDIT:
            return t.audit
        if t.state == TipOffState.AWAITING_REBUTTAL and t.arbitration is not None:
            return t.arbitration
        raise WrongState(f"{case_id} has no interval accepting votes")

    def open_cases(self, epoch: int) -> list[str]:
        """Case ids with an interval open for voting, in deterministic order."""
        out = [cid for cid, c in self.contents.items() if c.status == ContentStatus.PENDING_AUDIT and c.audit.is_open(epoch)]
        for tid, t in self.tipoffs.items():
            if t.state == TipOffState.PENDING_AUDIT and t.audit.is_open(epoch):
                out.append(tid)
            elif t.state == TipOffState.AWAITING_REBUTTAL and t.arbitration and t.arbitration.is_open(epoch):
                out.append(tid)
        return out

    # -- voting ------------------------------------------------------------

    def cast_vote(self, voter: str, case_id: str, verdict: bool, epoch: int) -> None:
        if voter not in self.governance.arbitral_nodes():
            raise NotArbitral(f"{voter} holds no arbitral seat this epoch")
        interval = self._interval_for(case_id)
        if not interval.is_open(epoch):
            raise WrongState(f"{case_id} interval closed at epoch {interval.closes}")
        if voter in interval.votes:
            raise DuplicateVote(f"{voter} already voted on {case_id}")
        interval.votes[voter] = bool(verdict)

    # -- content -----------------------------------------------------------

    def submit_content(self, creator: str, digest: str, epoch: int) -> ContentRecord:
        self.ledger._require(creator)
        cid = f"cont-{self._next_content:06d}"
        self._next_content += 1
        rec = ContentRecord(cid, creator, digest, ContentStatus.PENDING_AUDIT,
                            EvaluationInterval(epoch, self.config.audit_interval))
        self.contents[cid] = rec
        return rec

    def close_content_audit(self, content_id: str, epoch: int, reward: int) -> dict:
        rec = self.content(content_id)
        if rec.status != ContentStatus.PENDING_AUDIT:
            raise WrongState(f"{content_id} audit already closed")
        if rec.audit.is_open(epoch):
            raise IntervalOpen(f"{content_id} audit closes at epoch {rec.audit.closes}")
        approval = rec.audit.approval()
        accepted = approval >= self.governance.params.audit_threshold and reward > 0
        if accepted:
            self.ledger.mint_labor(rec.creator, reward, MintReason.CONTENT_REWARD)
            rec.status = ContentStatus.ACCEPTED
            rec.reward_paid = reward
            rec.accepted_epoch = epoch
        else:
            del self.contents[content_id]
            self.archived["dropped"] += 1
        return {"accepted": accepted, "approval": approval, "creator": rec.creator, "reward": rec.reward_paid}

    # -- tip-offs ------------------------------------------------------------

    def _target_owner(self, t: TipOff) -> str:
        if t.target_kind == "content":
            return self.contents[t.target_id].creator
        return self.crowdfunding.get(t.target_id).creator

    def submit_tipoff(self, reporter: str, target_kind: str, target_id: str, category, deposit: int, epoch: int) -> TipOff:
        self.ledger._require(reporter)
        category = Category(category)
        if self.credit.score(account_subject(reporter)) < self.config.tipoff_credit_floor:
            raise CreditTooLow(f"{reporter} credit below {self.config.tipoff_credit_floor}")
        if deposit < self.config.deposit_min:
            raise InsufficientBalance(f"deposit {deposit} below minimum {self.config.deposit_min}")
        if target_kind == "content":
            rec = self.content(target_id)
            if rec.status != ContentStatus.ACCEPTED:
                raise WrongState(f"{target_id} is {rec.status.value}")
            if rec.open_case is not None:
                raise WrongState(f"{target_id} already has an open tip-off")
            if epoch > rec.accepted_epoch + self.config.challenge_window:
                raise ChallengeWindowClosed(f"{target_id} can no longer be challenged")
        elif target_kind == "project":
            p = self.crowdfunding.get(target_id)
            if p.state in TERMINAL:
                raise WrongState(f"{target_id} is {p.state.value}")
        else:
            raise ValueError(f"unknown tip-off target kind {target_kind!r}")
        if self.ledger.balance(reporter, TokenKind.LABOR) < deposit:
            raise InsufficientBalance(f"{reporter} cannot cover a {deposit} Labor deposit")
        tid = f"tip-{self._next_tipoff:06d}"
        self._next_tipoff += 1
        t = TipOff(tid, reporter, target_kind, target_id, category, deposit, epoch,
                   EvaluationInterval(epoch, self.config.audit_interval), trace=[TipOffState.PENDING_AUDIT.value])
        self.ledger.open_escrow(t.deposit_escrow, TokenKind.LABOR, "tip-off deposit")
        self.ledger.escrow_in(reporter, t.deposit_escrow, deposit)
        self.tipoffs[tid] = t
        if target_kind == "content":
            self.contents[target_id].open_case = tid
        return t

    def _set(self, t: TipOff, state: TipOffState) -> None:
        if t.state in TIPOFF_TERMINAL:
            raise WrongState(f"{t.id} already ended as {t.state.value}")
        t.state = state
        t.trace.append(state.value)

    def _release_target(self, t: TipOff) -> None:
        if t.target_kind == "content" and t.target_id in self.contents:
            self.contents[t.target_id].open_case = None

    def close_tipoff_audit(self, tipoff_id: str, epoch: int) -> dict:
        t = self.tipoff(tipoff_id)
        if t.state != TipOffState.PENDING_AUDIT:
            raise WrongState(f"{tipoff_id} is {t.state.value}")
        if t.audit.is_open(epoch):
            raise IntervalOpen(f"{tipoff_id} audit closes at epoch {t.audit.closes}")
        approval = t.audit.approval()
        if approval >= self.governance.params.audit_threshold:
            self._set(t, TipOffState.PUBLISHED)
            self._set(t, TipOffState.AWAITING_REBUTTAL)
            t.rebuttal_deadline = epoch + self.config.rebuttal_window
        else:
            self.ledger.escrow_out(t.deposit_escrow, t.reporter, t.deposit)
            self.ledger.close_escrow(t.deposit_escrow)
            self._set(t, TipOffState.DISMISSED)
            self._release_target(t)
        return {"approval": approval, "state": t.state.value, "deadline": t.rebuttal_deadline}

    def submit_rebuttal(self, account: str, tipoff_id: str, evidence: str, epoch: int) -> TipOff:
        t = self.tipoff(tipoff_id)
        if t.state != TipOffState.AWAITING_REBUTTAL or t.rebuttal is not None:
            raise WrongState(f"{tipoff_id} is not awaiting a rebuttal")
        if account != self._target_owner(t):
            raise NotTheTarget(f"{account} is not the accused party of {tipoff_id}")
        if epoch > t.rebuttal_deadline:
            raise PastDeadline(f"{tipoff_id} rebuttal window closed at epoch {t.rebuttal_deadline}")
        t.rebuttal = evidence
        t.arbitration = EvaluationInterval(epoch, self.config.arbitration_interval)
        return t

    def ready_for_arbitration(self, t: TipOff, epoch: int) -> bool:
        if t.state != TipOffState.AWAITING_REBUTTAL:
            return False
        if t.rebuttal is not None:
            return not t.arbitration.is_open(epoch)
        return epoch > t.rebuttal_deadline

    def arbitrate(self, tipoff_id: str, epoch: int, whistleblower_reward: int) -> dict:
        t = self.tipoff(tipoff_id)
        if t.state != TipOffState.AWAITING_REBUTTAL:
            raise WrongState(f"{tipoff_id} is {t.state.value}")
        if not self.ready_for_arbitration(t, epoch):
            raise IntervalOpen(f"{tipoff_id} rebuttal or arbitration interval still open")
        cfg = self.config
        approval = t.arbitration.approval() if t.arbitration else Fraction(0)
        out = {"approval": approval, "rebutted": t.rebuttal is not None}
        if t.rebuttal is not None and approval >= self.governance.params.arbitration_threshold:
            self.ledger.escrow_burn(t.deposit_escrow, t.deposit)
            self.ledger.close_escrow(t.deposit_escrow)
            out["reporter_credit"] = self.credit.adjust(
                account_subject(t.reporter), -cfg.delta_false, "suspected false report by the whistleblower", epoch)
            out["deposit_burned"] = t.deposit
            self._set(t, TipOffState.REFUTED)
        else:
            if t.target_kind == "content":
                rec = self.contents[t.target_id]
                burned = self.ledger.burn_balance(rec.creator, TokenKind.LABOR, rec.reward_paid)
                out.update(reward_burned=burned, shortfall=rec.reward_paid - burned)
                out["target_credit"] = self.credit.adjust(
                    account_subject(rec.creator), -cfg.delta_guilty, f"{t.category.value}: content revoked", epoch)
                rec.status = ContentStatus.REVOKED
                out["revoked"] = rec.id
            else:
                out["target_credit"] = self.credit.adjust(
                    project_subject(t.target_id), -cfg.delta_guilty,
                    f"{t.category.value}: suspected provision of false information", epoch)
            self.ledger.escrow_out(t.deposit_escrow, t.reporter, t.deposit)
            self.ledger.close_escrow(t.deposit_escrow)
            if whistleblower_reward > 0:
                self.ledger.mint_labor(t.reporter, whistleblower_reward, MintReason.TIPOFF_REWARD)
            out["whistleblower_reward"] = max(whistleblower_reward, 0)
            self._set(t, TipOffState.UPHELD)
        self._release_target(t)
        out["state"] = t.state.value
        return out

    # -- satisfaction and escalation ---------------------------------------------

    def record_satisfaction(self, funder: str, project_id: str, rating: int, epoch: int) -> int:
        if rating not in (-1, 0, 1):
            raise ValueError("rating must be -1, 0 or +1")
        p = self.crowdfunding.get(project_id)
        if funder not in p.invested_by():
            raise NotAFunder(f"{funder} did not invest in {project_id}")
        period = sum(1 for t in p.tranches if t.released)
        key = (project_id, period, funder)
        if key in self.ratings:
            raise DuplicateRating(f"{funder} already rated {project_id} in tranche period {period}")
        self.ratings.add(key)
        cause = "funder satisfaction feedback" if rating >= 0 else \
            "funder dissatisfaction: fund usage, disclosure or delivery"
        return self.credit.adjust(project_subject(project_id), rating * self.config.satisfaction_weight, cause, epoch)

    def check_warning_line(self, project_id: str, epoch: int) -> list[str]:
        """Investigate on first crossing of the warning line; suspend at the hard floor."""
        p = self.crowdfunding.get(project_id)
        subject = project_subject(project_id)
        actions = []
        score = self.credit.score(subject)
        if score > self.config.warning_line:
            self.investigating.discard(project_id)
        elif project_id not in self.investigating:
            self.investigating.add(project_id)
            self.credit.adjust(subject, -self.config.delta_investigation, "council investigation at warning line", epoch)
            actions.append("investigation")
        if self.credit.score(subject) <= self.config.hard_floor and p.state == ProjectState.ACTIVE:
            self.crowdfunding.suspend_funds(project_id, SuspendCause.CREDIT_WARNING_LINE)
            actions.append("suspend")
        return actions

    # -- housekeeping ------------------------------------------------------------

    def finalize(self, epoch: int) -> dict:
        """Drop records that can no longer change from the live state."""
        done = {"content": 0, "tipoffs": 0}
        for cid in list(self.contents):
            rec = self.contents[cid]
            if rec.open_case is not None:
                continue
            if rec.status == ContentStatus.REVOKED:
                self.archived["revoked"] += 1
            elif rec.status == ContentStatus.ACCEPTED and epoch > rec.accepted_epoch + self.config.challenge_window:
                self.archived["accepted"] += 1
            else:
                continue
            del self.contents[cid]
            done["content"] += 1
        for tid in list(self.tipoffs):
            if self.tipoffs[tid].state in TIPOFF_TERMINAL:
                del self.tipoffs[tid]
                self.archived["tipoffs"] += 1
                done["tipoffs"] += 1
        closed = {pid for pid, p in self.crowdfunding.projects.items() if p.state in TERMINAL}
        self.ratings = {r for r in self.ratings if r[0] not in closed}
        self.investigating -= closed
        return done

    def to_state(self) -> dict:
        return {
            "archived": self.archived,
            "contents": {cid: c.to_state() for cid, c in self.contents.items()},
            "investigating": sorted(self.investigating),
            "next_content": self._next_content,
            "next_tipoff": self._next_tipoff,
            "ratings": sorted(self.ratings),
            "tipoffs": {tid: t.to_state() for tid, t in self.tipoffs.items()},
        }

    def state_json(self) -> str:
        """Same text as ``dumps(self.to_state())``, reusing unchanged records."""
        return (
            '{"archived":' + dumps(self.archived)
            + ',"contents":' + self._content_json.render(self.contents)
            + ',"investigating":' + dumps(sorted(self.investigating))
            + ',"next_content":' + str(self._next_content)
            + ',"next_tipoff":' + str(self._next_tipoff)
            + ',"ratings":' + dumps(sorted(self.ratings))
            + ',"tipoffs":' + self._tipoff_json.render(self.tipoffs)
            + "}"
        )
