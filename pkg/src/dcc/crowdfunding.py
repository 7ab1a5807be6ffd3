"""Crowdfunding project lifecycle.

A project moves along

    Draft -> Funding -> AwaitingAcceptance -> Active <-> Suspended -> Completed
                    \\-> Failed

Investments (Capital) and pledges (Labor) sit in per-project escrows until
the deadline. Success pays the pre-declared marketing proportion of the
raise to pledgers pro rata and refunds every pledge; failure returns all
Capital and refunds pledged Labor only in proportion to the funded rate,
burning the rest. The production fund is then released tranche by tranche,
with a fraction of each tranche converted to Labor as the creator's stage
reward.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from math import floor
from typing import Iterable

from dcc.apportion import largest_remainder
from dcc.canonical import as_fraction
from dcc.credit import CreditBook, account_subject, project_subject
from dcc.errors import (
    BadTrancheSchedule,
    BeforeDeadline,
    CouncilVoteRequired,
    CreditTooLow,
    DuplicateVote,
    InsufficientBalance,
    InvalidProportion,
    NotAFunder,
    OutOfOrderTranche,
    OverTarget,
    PastDeadline,
    ProjectSuspended,
    UnknownAccount,
    UnknownProject,
    WrongState,
    ZeroAmount,
)
from dcc.ledger import ExchangeRate, Ledger, TokenKind


class ProjectState(str, Enum):
    DRAFT = "Draft"
    FUNDING = "Funding"
    AWAITING_ACCEPTANCE = "AwaitingAcceptance"
    ACTIVE = "Active"
    SUSPENDED = "Suspended"
    COMPLETED = "Completed"
    FAILED = "Failed"


S = ProjectState
TRANSITIONS: dict[ProjectState, frozenset[ProjectState]] = {
    S.DRAFT: frozenset({S.FUNDING}),
    S.FUNDING: frozenset({S.AWAITING_ACCEPTANCE, S.FAILED}),
    S.AWAITING_ACCEPTANCE: frozenset({S.ACTIVE}),
    S.ACTIVE: frozenset({S.SUSPENDED, S.COMPLETED}),
    S.SUSPENDED: frozenset({S.ACTIVE}),
    S.COMPLETED: frozenset(),
    S.FAILED: frozenset(),
}
TERMINAL = frozenset({S.COMPLETED, S.FAILED})


class SuspendCause(str, Enum):
    COUNCIL_ALERT = "CouncilAlert"
    CREDIT_WARNING_LINE = "CreditWarningLine"


@dataclass
class Tranche:
    index: int
    fraction: Fraction
    labor_conversion_fraction: Fraction = Fraction(1, 10)
    released: bool = False
    capital_released: int = 0
    capital_converted: int = 0
    labor_credited: int = 0

    def to_state(self) -> list:
        return [
            self.fraction,
            self.labor_conversion_fraction,
            self.released,
            self.capital_released,
            self.capital_converted,
            self.labor_credited,
        ]


@dataclass
class Council:
    project_id: str
    members: dict[str, Fraction]
    supervisors: tuple[str, ...]

    def approval(self, votes: dict[str, bool]) -> Fraction:
        return sum((w for m, w in self.members.items() if votes.get(m)), Fraction(0))

    def to_state(self) -> dict:
        return {"members": self.members, "supervisors": list(self.supervisors)}


def council_weights(
    investments: dict[str, int],
    governance: dict[str, int],
    investment_weight: Fraction = Fraction(7, 10),
    governance_weight: Fraction = Fraction(3, 10),
) -> dict[str, Fraction]:
    """Blend investment share with governance-token share, renormalized to 1.

    When no member holds Governance tokens the blend degenerates to the
    investment share alone.
    """
    raised = sum(investments.values())
    gov_total = sum(governance.get(m, 0) for m in investments)
    raw = {}
    for m, amt in investments.items():
        w = investment_weight * Fraction(amt, raised)
        if gov_total:
            w += governance_weight * Fraction(governance.get(m, 0), gov_total)
        raw[m] = w
    norm = sum(raw.values())
    return {m: w / norm for m, w in raw.items()}


@dataclass
class SettlementReport:
    project_id: str
    outcome: str
    target: int
    raised: int
    marketing_proportion: Fraction
    marketing_pool: int = 0
    marketing_shares: dict[str, int] = field(default_factory=dict)
    production_fund: int = 0
    capital_returned: dict[str, int] = field(default_factory=dict)
    pledged: dict[str, int] = field(default_factory=dict)
    labor_refunded: dict[str, int] = field(default_factory=dict)
    labor_burned: int = 0

    @property
    def funded_rate(self) -> Fraction:
        return Fraction(self.raised, self.target)

    def to_dict(self) -> dict:
        return {
            "project": self.project_id,
            "outcome": self.outcome,
            "target": self.target,
            "raised": self.raised,
            "marketing_proportion": self.marketing_proportion,
            "marketing_pool": self.marketing_pool,
            "marketing_shares": self.marketing_shares,
            "production_fund": self.production_fund,
            "capital_returned": self.capital_returned,
            "pledged": self.pledged,
            "labor_refunded": self.labor_refunded,
            "labor_burned": self.labor_burned,
        }


def settlement_violations(report: dict) -> list[str]:
    """Recheck a serialized settlement report's arithmetic from its own fields."""
    out = []
    raised, target = report["raised"], report["target"]
    pledged = report["pledged"]
    refunded = report["labor_refunded"]
    total_pledged = sum(pledged.values())
    if report["outcome"] == "success":
        m = as_fraction(report["marketing_proportion"])
        pool = floor(m * raised) if pledged else 0
        if report["marketing_pool"] != pool:
            out.append(f"marketing pool {report['marketing_pool']} != floor(m*raised) {pool}")
        if sum(report["marketing_shares"].values()) != report["marketing_pool"]:
            out.append("marketing shares do not sum to the pool")
        for acct, share in report["marketing_shares"].items():
            exact = Fraction(pool * pledged.get(acct, 0), total_pledged) if total_pledged else 0
            if abs(share - exact) >= 1:
                out.append(f"share of {acct} is not within one unit of pro rata")
        if report["production_fund"] != raised - report["marketing_pool"]:
            out.append("production fund != raised - marketing pool")
        if refunded != pledged or report["labor_burned"] != 0:
            out.append("successful settlement must refund every pledge in full")
    else:
        if sum(report["capital_returned"].values()) != raised:
            out.append("failed settlement must return all raised Capital")
        for acct, amt in pledged.items():
            want = amt * raised // target
            if refunded.get(acct, 0) != want:
                out.append(f"refund of {acct} is {refunded.get(acct, 0)}, expected {want}")
        if report["labor_burned"] != total_pledged - sum(refunded.values()):
            out.append("burned Labor != pledged - refunded")
    return out


@dataclass
class Project:
    id: str
    creator: str
    target_capital: int
    deadline_epoch: int
    marketing_proportion: Fraction
    tranches: list[Tranche]
    acceptance_threshold: Fraction
    state: ProjectState = ProjectState.DRAFT
    fund_use_plan: str = ""
    reward_contract: str = ""
    publications: int = 0
    raised: int = 0
    investments: list[tuple[str, int]] = field(default_factory=list)
    pledges: list[tuple[str, int]] = field(default_factory=list)
    votes: dict[str, bool] = field(default_factory=dict)
    needs_reformulation: bool = False
    production_fund: int = 0
    council: Council | None = None
    alert_pending: bool = False

    @property
    def capital_escrow(self) -> str:
        return self.id + ".capital"

    @property
    def pledge_escrow(self) -> str:
        return self.id + ".pledge"

    @property
    def production_escrow(self) -> str:
        return self.id + ".production"

    def invested_by(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for who, amt in self.investments:
            out[who] = out.get(who, 0) + amt
        return out

    def pledged_by(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for who, amt in self.pledges:
            out[who] = out.get(who, 0) + amt
        return out

    def next_tranche(self) -> int | None:
        for t in self.tranches:
            if not t.released:
                return t.index
        return None

    def to_state(self) -> dict:
        if self.state in TERMINAL:
            return {"state": self.state.value, "raised": self.raised, "released": [t.to_state() for t in self.tranches]}
        return {
            "acceptance_threshold": self.acceptance_threshold,
            "alert": self.alert_pending,
            "council": self.council.to_state() if self.council else None,
            "creator": self.creator,
            "deadline": self.deadline_epoch,
            "investments": self.investments,
            "marketing": self.marketing_proportion,
            "needs_reformulation": self.needs_reformulation,
            "plan": self.fund_use_plan,
            "pledges": self.pledges,
            "production_fund": self.production_fund,
            "publications": self.publications,
            "raised": self.raised,
            "reward_contract": self.reward_contract,
            "state": self.state.value,
            "target": self.target_capital,
            "tranches": [t.to_state() for t in self.tranches],
            "votes": self.votes,
        }


def _normalize_tranches(tranches: Iterable, default_lambda: Fraction) -> list[Tranche]:
    out = []
    for i, entry in enumerate(tranches):
        if isinstance(entry, (list, tuple)):
            frac, lam = as_fraction(entry[0]), as_fraction(entry[1])
        elif isinstance(entry, dict):
            frac = as_fraction(entry["fraction"])
            lam = as_fraction(entry.get("labor_conversion_fraction", default_lambda))
        else:
            frac, lam = as_fraction(entry), default_lambda
        out.append(Tranche(i, frac, lam))
    return out


class Crowdfunding:
    """Registry of projects plus every lifecycle operation on them."""

    def __init__(
        self,
        ledger: Ledger,
        credit: CreditBook,
        *,
        creator_credit_floor: int = 40,
        default_labor_conversion: Fraction = Fraction(1, 10),
        investment_weight: Fraction = Fraction(7, 10),
        governance_weight: Fraction = Fraction(3, 10),
        tranche_approval: Fraction = Fraction(1, 2),
    ):
        self.ledger = ledger
        self.credit = credit
        self.creator_credit_floor = creator_credit_floor
        self.default_labor_conversion = as_fraction(default_labor_conversion)
        self.investment_weight = as_fraction(investment_weight)
        self.governance_weight = as_fraction(governance_weight)
        self.tranche_approval = as_fraction(tranche_approval)
        self.projects: dict[str, Project] = {}
        self._next_id = 1

    def get(self, project_id: str) -> Project:
        try:
            return self.projects[project_id]
        except KeyError:
            raise UnknownProject(project_id) from None

    def _transition(self, p: Project, new: ProjectState) -> None:
        if new not in TRANSITIONS[p.state]:
            raise WrongState(f"{p.id}: {p.state.value} -> {new.value} is not a lifecycle edge")
        p.state = new

    def _expect(self, p: Project, *states: ProjectState) -> None:
        if p.state not in states:
            raise WrongState(f"{p.id} is {p.state.value}, expected {'/'.join(s.value for s in states)}")

    # -- setup ---------------------------------------------------------------

    def create_project(
        self,
        creator: str,
        target: int,
        deadline: int,
        marketing_proportion,
        tranches: Iterable,
        acceptance_threshold,
        epoch: int,
    ) -> Project:
        if not self.ledger.has_account(creator):
            raise UnknownAccount(creator)
        if self.credit.score(account_subject(creator)) < self.creator_credit_floor:
            raise CreditTooLow(f"{creator} credit below {self.creator_credit_floor}")
        if isinstance(target, bool) or not isinstance(target, int) or target <= 0:
            raise ZeroAmount("target must be a positive integer")
        m = as_fraction(marketing_proportion)
        theta = as_fraction(acceptance_threshold)
        if not 0 <= m <= 1:
            raise InvalidProportion(f"marketing proportion {m} outside [0, 1]")
        if not 0 < theta <= 1:
            raise InvalidProportion(f"acceptance threshold {theta} outside (0, 1]")
        schedule = _normalize_tranches(tranches, self.default_labor_conversion)
        if not schedule or any(t.fraction <= 0 for t in schedule) or sum(t.fraction for t in schedule) != 1:
            raise BadTrancheSchedule("tranche fractions must be positive and sum to exactly 1")
        if any(not 0 <= t.labor_conversion_fraction <= 1 for t in schedule):
            raise InvalidProportion("tranche labor conversion fraction outside [0, 1]")
        if deadline <= epoch:
            raise PastDeadline(f"deadline {deadline} is not after epoch {epoch}")
        pid = f"proj-{self._next_id:04d}"
        self._next_id += 1
        p = Project(pid, creator, target, deadline, m, schedule, theta)
        self.projects[pid] = p
        self.credit.open(project_subject(pid))
        return p

    def publish_contracts(self, project_id: str, fund_use_plan: str, reward_contract: str) -> Project:
        """Record the two contract digests; Draft -> Funding, or re-publication after rejection."""
        p = self.get(project_id)
        if p.state == S.AWAITING_ACCEPTANCE and p.needs_reformulation:
            p.votes = {}
            p.needs_reformulation = False
        elif p.state == S.DRAFT:
            self._transition(p, S.FUNDING)
            self.ledger.open_escrow(p.capital_escrow, TokenKind.CAPITAL, "investments")
            self.ledger.open_escrow(p.pledge_escrow, TokenKind.LABOR, "pledges")
        else:
            raise WrongState(f"{p.id} is {p.state.value}; contracts can only be published from Draft or after rejection")
        p.fund_use_plan = fund_use_plan
        p.reward_contract = reward_contract
        p.publications += 1
        return p

    # -- funding phase -------------------------------------------------------------

    def invest(self, investor: str, project_id: str, capital_amount: int, epoch: int) -> Project:
        p = self.get(project_id)
        self._expect(p, S.FUNDING)
        if epoch >= p.deadline_epoch:
            raise PastDeadline(f"{p.id} deadline was epoch {p.deadline_epoch}")
        if capital_amount <= 0:
            raise ZeroAmount("investment must be positive")
        if p.raised + capital_amount > p.target_capital:
            raise OverTarget(f"{p.id} can take at most {p.target_capital - p.raised} more")
        self.ledger.escrow_in(investor, p.capital_escrow, capital_amount)
        p.raised += capital_amount
        p.investments.append((investor, capital_amount))
        return p

    def pledge(self, evaluator: str, project_id: str, labor_amount: int) -> Project:
        p = self.get(project_id)
        self._expect(p, S.FUNDING)
        if labor_amount <= 0:
            raise ZeroAmount("pledge must be positive")
        self.ledger.escrow_in(evaluator, p.pledge_escrow, labor_amount)
        p.pledges.append((evaluator, labor_amount))
        return p

    def settle_at_deadline(self, project_id: str, epoch: int) -> SettlementReport:
        p = self.get(project_id)
        self._expect(p, S.FUNDING)
        if epoch < p.deadline_epoch:
            raise BeforeDeadline(f"{p.id} settles at epoch {p.deadline_epoch}")
        led = self.ledger
        pledged = p.pledged_by()
        total_pledged = sum(pledged.values())
        rep = SettlementReport(p.id, "", p.target_capital, p.raised, p.marketing_proportion, pledged=dict(sorted(pledged.items())))
        if p.raised >= p.target_capital:
            rep.outcome = "success"
            pool = floor(p.marketing_proportion * p.raised) if total_pledged else 0
            shares = largest_remainder(pledged, pool) if total_pledged else {}
            led.open_escrow(p.production_escrow, TokenKind.CAPITAL, "production fund")
            for acct in sorted(shares):
                led.escrow_out(p.capital_escrow, acct, shares[acct])
            led.escrow_move(p.capital_escrow, p.production_escrow, p.raised - pool)
            for acct in sorted(pledged):
                led.escrow_out(p.pledge_escrow, acct, pledged[acct])
            rep.marketing_pool = pool
            rep.marketing_shares = dict(sorted(shares.items()))
            rep.production_fund = p.raised - pool
            rep.labor_refunded = dict(rep.pledged)
            p.production_fund = rep.production_fund
            self._transition(p, S.AWAITING_ACCEPTANCE)
        else:
            rep.outcome = "failure"
            invested = p.invested_by()
            for acct in sorted(invested):
                led.escrow_out(p.capital_escrow, acct, invested[acct])
            refunds = {a: amt * p.raised // p.target_capital for a, amt in pledged.items()}
            for acct in sorted(refunds):
                led.escrow_out(p.pledge_escrow, acct, refunds[acct])
            burned = total_pledged - sum(refunds.values())
            led.escrow_burn(p.pledge_escrow, burned)
            rep.capital_returned = dict(sorted(invested.items()))
            rep.labor_refunded = dict(sorted(refunds.items()))
            rep.labor_burned = burned
            self._transition(p, S.FAILED)
        led.close_escrow(p.capital_escrow)
        led.close_escrow(p.pledge_escrow)
        return rep

    # -- acceptance gate ---------------------------------------------------------------

    def accept_contracts(self, funder: str, project_id: str, vote: bool, supervisors: Iterable[str] = ()) -> Project:
        p = self.get(project_id)
        self._expect(p, S.AWAITING_ACCEPTANCE)
        if p.needs_reformulation:
            raise WrongState(f"{p.id} contracts were rejected and must be re-published")
        invested = p.invested_by()
        if funder not in invested:
            raise NotAFunder(f"{funder} did not invest in {p.id}")
        if funder in p.votes:
            raise DuplicateVote(f"{funder} already voted on {p.id}")
        p.votes[funder] = bool(vote)
        accepting = sum(invested[f] for f, v in p.votes.items() if v)
        if Fraction(accepting, p.raised) >= p.acceptance_threshold:
            gov = {m: self.ledger.balance(m, TokenKind.GOVERNANCE) for m in invested}
            weights = council_weights(invested, gov, self.investment_weight, self.governance_weight)
            p.council = Council(p.id, dict(sorted(weights.items())), tuple(sorted(set(supervisors))))
            self._transition(p, S.ACTIVE)
        elif len(p.votes) == len(invested):
            p.needs_reformulation = True
        return p

    # -- execution phase ------------------------------------------------------------------

    def raise_alert(self, supervisor: str, project_id: str) -> Project:
        p = self.get(project_id)
        self._expect(p, S.ACTIVE)
        if supervisor not in p.council.supervisors and supervisor not in p.council.members:
            raise NotAFunder(f"{supervisor} is not on the council of {p.id}")
        p.alert_pending = True
        return p

    def council_vote(self, project_id: str, votes: dict[str, bool]) -> tuple[bool, Fraction]:
        """Weighted council decision; clears an alert, suspends, or reinstates."""
        p = self.get(project_id)
        self._expect(p, S.ACTIVE, S.SUSPENDED)
        if p.state == S.ACTIVE and not p.alert_pending:
            raise WrongState(f"{p.id} has nothing pending before its council")
        strangers = [v for v in votes if v not in p.council.members]
        if strangers:
            raise NotAFunder(f"{strangers[0]} is not a council member of {p.id}")
        approval = p.council.approval(votes)
        approved = approval >= self.tranche_approval
        if p.state == S.ACTIVE:
            p.alert_pending = False
            if not approved:
                self._transition(p, S.SUSPENDED)
        elif approved:
            self._transition(p, S.ACTIVE)
        return approved, approval

    def suspend_funds(self, project_id: str, cause: SuspendCause) -> Project:
        p = self.get(project_id)
        SuspendCause(cause)
        self._expect(p, S.ACTIVE)
        self._transition(p, S.SUSPENDED)
        return p

    def release_tranche(self, project_id: str, tranche_index: int, rate: ExchangeRate | None = None) -> Tranche:
        p = self.get(project_id)
        if p.state == S.SUSPENDED:
            raise ProjectSuspended(f"{p.id} funds are suspended")
        self._expect(p, S.ACTIVE)
        if p.alert_pending:
            raise CouncilVoteRequired(f"{p.id} has an open alert; the council must vote first")
        nxt = p.next_tranche()
        if tranche_index != nxt:
            raise OutOfOrderTranche(f"{p.id} next releasable tranche is {nxt}")
        t = p.tranches[tranche_index]
        led = self.ledger
        last = tranche_index == len(p.tranches) - 1
        amount = led.escrow_amount(p.production_escrow) if last else floor(t.fraction * p.production_fund)
        if amount > led.escrow_amount(p.production_escrow):
            raise InsufficientBalance(f"{p.id} production escrow short")
        converted = floor(t.labor_conversion_fraction * amount)
        t.labor_credited = led.escrow_convert_to_labor(p.production_escrow, p.creator, converted, rate)
        led.escrow_out(p.production_escrow, p.creator, amount - converted)
        t.capital_converted = converted
        t.capital_released = amount - converted
        t.released = True
        if last:
            led.close_escrow(p.production_escrow)
            self._transition(p, S.COMPLETED)
        return t

    def funders(self, project_id: str) -> set[str]:
        return set(self.get(project_id).invested_by())

    def to_state(self) -> dict:
        return {"next_id": self._next_id, "projects": {pid: p.to_state() for pid, p in self.projects.items()}}
