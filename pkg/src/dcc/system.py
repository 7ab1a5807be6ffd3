"""The composed token economy as an event-sourced state machine.

Every mutation goes through a method decorated with :func:`command`. A
successful command appends one record

    {seq, epoch, op, payload: {args, result, effects[, credit]}, state_hash}

to the event log, where ``effects`` is the netted token journal of the
command and ``state_hash`` digests the canonical post-state. A command that
raises leaves no record; it must also leave no token movement behind, which
the wrapper enforces.

Commands receive their arguments after a round trip through the canonical
encoder, so a live run and a replay of its log execute on identical inputs.
"""

from __future__ import annotations

import dataclasses
import functools
import inspect
from dataclasses import dataclass, field
from fractions import Fraction
from math import floor
from typing import Any, Callable

from dcc.apportion import largest_remainder
from dcc.canonical import as_fraction, dumps, encode, plain, sha256_hex
from dcc.credit import CreditBook, account_subject
from dcc.crowdfunding import Crowdfunding, ProjectState, SuspendCause
from dcc.econ import MetricsTracker, RegulatorConfig, RegulatorState, regulate as regulate_step
from dcc.errors import WrongState
from dcc.governance import Governance, GovernanceConfig, ParameterSet, Role, epoch_seed
from dcc.ledger import ExchangeRate, Ledger, MintReason, TokenKind, update_rate as rate_step
from dcc.supervision import Supervision, SupervisionConfig


@dataclass
class LedgerConfig:
    initial_rate: Fraction = Fraction(1)
    peg_band: tuple[Fraction, Fraction] = (Fraction(9, 10), Fraction(11, 10))
    kappa: Fraction = Fraction(1, 2)
    rate_min: Fraction = Fraction(1, 100)
    rate_max: Fraction = Fraction(100)
    rate_quantum: Fraction | None = Fraction(1, 10**6)

    def __post_init__(self):
        for name in ("initial_rate", "kappa", "rate_min", "rate_max"):
            setattr(self, name, as_fraction(getattr(self, name)))
        self.peg_band = tuple(as_fraction(x) for x in self.peg_band)
        if self.rate_quantum is not None:
            self.rate_quantum = as_fraction(self.rate_quantum)
        if not 0 < self.kappa <= 1:
            raise ValueError("kappa must lie in (0, 1]")
        if not 0 < self.rate_min <= self.initial_rate <= self.rate_max:
            raise ValueError("initial rate must lie within [rate_min, rate_max]")


@dataclass
class CrowdfundingConfig:
    creator_credit_floor: int = 40
    default_labor_conversion: Fraction = Fraction(1, 10)
    investment_weight: Fraction = Fraction(7, 10)
    governance_weight: Fraction = Fraction(3, 10)
    tranche_approval: Fraction = Fraction(1, 2)

    def __post_init__(self):
        for name in ("default_labor_conversion", "investment_weight", "governance_weight", "tranche_approval"):
            setattr(self, name, as_fraction(getattr(self, name)))
        if self.investment_weight < 0 or self.governance_weight < 0 or self.investment_weight == 0:
            raise ValueError("council weights must be non-negative with a positive investment weight")


@dataclass
class Params:
    """Every constant of the economy; serialized into the ``configure`` event."""

    initial_credit: int = 60
    platform_nodes: tuple[str, ...] = ()
    ledger: LedgerConfig = field(default_factory=LedgerConfig)
    crowdfunding: CrowdfundingConfig = field(default_factory=CrowdfundingConfig)
    governance: GovernanceConfig = field(default_factory=GovernanceConfig)
    parameters: ParameterSet = field(default_factory=ParameterSet)
    supervision: SupervisionConfig = field(default_factory=SupervisionConfig)
    regulator: RegulatorConfig = field(default_factory=RegulatorConfig)

    def to_dict(self) -> dict:
        return encode(dataclasses.asdict(self))

    @classmethod
    def from_dict(cls, data: dict) -> "Params":
        data = dict(data)
        sections = {
            "ledger": LedgerConfig,
            "crowdfunding": CrowdfundingConfig,
            "governance": GovernanceConfig,
            "parameters": ParameterSet,
            "supervision": SupervisionConfig,
            "regulator": RegulatorConfig,
        }
        kwargs: dict[str, Any] = {}
        for name, kind in sections.items():
            if name in data:
                kwargs[name] = kind(**data.pop(name))
        if "platform_nodes" in data:
            kwargs["platform_nodes"] = tuple(sorted(data.pop("platform_nodes")))
        kwargs.update(data)
        return cls(**kwargs)


COMMANDS: dict[str, Callable] = {}



def _plain(obj: Any) -> Any:
    """Canonical-JSON view of ``obj``."""
    return plain(obj)


SECTIONS = ("credit", "crowdfunding", "governance", "ledger", "regulator", "supervision", "system")


def command(fn: Callable | None = None, *, touches: tuple[str, ...] = SECTIONS) -> Callable:
    """Register ``fn`` as a logged, replayable operation on :class:`Ecosystem`.

    ``touches`` names the state sections the operation may change; only those
    are re-serialized for the post-state hash.
    """
    if fn is None:
        return functools.partial(command, touches=touches)
    unknown = set(touches) - set(SECTIONS)
    if unknown:
        raise ValueError(f"unknown state sections {sorted(unknown)}")
    params = list(inspect.signature(fn).parameters.values())[1:]
    if any(p.kind is not inspect.Parameter.KEYWORD_ONLY for p in params):
        raise TypeError(f"command {fn.__name__} must take keyword-only arguments")
    names = frozenset(p.name for p in params)
    required = frozenset(p.name for p in params if p.default is inspect.Parameter.empty)
    defaults = {p.name: p.default for p in params if p.default is not inspect.Parameter.empty}
    name = fn.__name__

    @functools.wraps(fn)
    def run(self: "Ecosystem", **kwargs):
        if self._busy:
            raise RuntimeError(f"{name} called from inside another command")
        if not names.issuperset(kwargs) or not required.issubset(kwargs):
            raise TypeError(f"{name} takes {sorted(names)}, got {sorted(kwargs)}")
        args = _plain(defaults | kwargs)
        epoch = self.ledger.epoch
        self._busy = True
        try:
            result = fn(self, **args)
        except Exception:
            if self.ledger.take_effects():
                raise RuntimeError(f"{name} failed after moving tokens; state is no longer trustworthy")
            self.credit.take_changes()
            raise
        finally:
            self._busy = False
        self._dirty.update(touches)
        return self._record(epoch, name, args, result)

    run.touches = tuple(touches)
    COMMANDS[name] = run
    return run


class Ecosystem:
    """Ledger, projects, governance, supervision and regulator behind one log."""

    def __init__(self, sink: Callable[[str], None] | None = None, *, check_cache: bool = False):
        self._busy = False
        self._sink = sink
        self._check_cache = check_cache
        self.events: list[dict] = []
        self.metrics = MetricsTracker()
        self._build(Params())
        self.last_hash = self.state_hash()

    # -- construction --------------------------------------------------------

    def _build(self, params: Params) -> None:
        self.params = params
        lc = params.ledger
        self.ledger = Ledger(ExchangeRate(lc.initial_rate, lc.peg_band), params.parameters.labor_to_governance)
        self.credit = CreditBook(params.initial_credit)
        cf = params.crowdfunding
        self.crowdfunding = Crowdfunding(
            self.ledger, self.credit,
            creator_credit_floor=cf.creator_credit_floor,
            default_labor_conversion=cf.default_labor_conversion,
            investment_weight=cf.investment_weight,
            governance_weight=cf.governance_weight,
            tranche_approval=cf.tranche_approval,
        )
        self.governance = Governance(self.ledger, params.parameters, params.governance, params.platform_nodes)
        self.supervision = Supervision(self.ledger, self.credit, self.governance, self.crowdfunding, params.supervision)
        self.regulator = RegulatorState(config=params.regulator)
        self.accepted_this_epoch: dict[str, int] = {}
        self._config_json = dumps(params.to_dict())
        self._section_json: dict[str, str] = {}
        self._dirty = set(SECTIONS)

    # -- state -----------------------------------------------------------------

    @property
    def epoch(self) -> int:
        return self.ledger.epoch

    def state(self) -> dict:
        """Full canonical state (the object whose serialization is hashed)."""
        return encode(self._sections() | {"config": self.params.to_dict()})

    def _sections(self) -> dict:
        return {name: self._section_state(name) for name in SECTIONS}

    def _section_state(self, name: str) -> Any:
        if name == "system":
            return {"accepted_this_epoch": self.accepted_this_epoch}
        return getattr(self, name).to_state()

    def state_json(self) -> str:
        for name in self._dirty:
            if name == "supervision":
                self._section_json[name] = self.supervision.state_json()
            else:
                self._section_json[name] = dumps(self._section_state(name))
        self._dirty.clear()
        body = ",".join(f'"{name}":{self._section_json[name]}' for name in SECTIONS)
        text = '{"config":' + self._config_json + "," + body + "}"
        if self._check_cache:
            fresh = dumps(self._sections() | {"config": self.params.to_dict()})
            if fresh != text:
                raise AssertionError("cached state sections are stale")
        return text

    def state_hash(self) -> str:
        return sha256_hex(self.state_json())

    def _record(self, epoch: int, op: str, args: dict, result: Any) -> Any:
        payload = {"args": args, "effects": self.ledger.take_effects(), "result": _plain(result)}
        changes = self.credit.take_changes()
        if changes:
            payload["credit"] = changes
        self.last_hash = self.state_hash()
        event = {"epoch": epoch, "op": op, "payload": payload, "seq": len(self.events), "state_hash": self.last_hash}
        self.events.append(event)
        self.metrics.feed(event)
        if self._sink is not None:
            self._sink(dumps(event))
        return payload["result"]

    def sync_parameters(self) -> None:
        self.ledger.governance_parameter = self.governance.params.labor_to_governance

    def content_reward(self) -> int:
        return floor(self.params.supervision.content_reward * self.regulator.labor_distribution_quota)

    def whistleblower_reward(self) -> int:
        return floor(self.params.supervision.whistleblower_reward * self.regulator.supervision_incentive)

    # -- setup ---------------------------------------------------------------------

    @command
    def configure(self, *, params: dict):
        if self.events:
            raise WrongState("configure must be the first event of a log")
        self._build(Params.from_dict(params))
        return None

    # -- ledger ------------------------------------------------------------------

    @command(touches=("ledger", "credit"))
    def open_account(self, *, account: str):
        self.ledger.open_account(account)
        self.credit.open(account_subject(account))
        return None

    @command(touches=("ledger",))
    def deposit_capital(self, *, account: str, amount: int):
        self.ledger.deposit_capital(account, amount)
        return None

    @command(touches=("ledger",))
    def transfer(self, *, src: str, dst: str, kind: str, amount: int):
        self.ledger.transfer(src, dst, TokenKind(kind), amount)
        return None

    @command(touches=("ledger",))
    def convert_labor_to_capital(self, *, account: str, labor_amount: int):
        return {"capital": self.ledger.convert_labor_to_capital(account, labor_amount)}

    @command(touches=("ledger",))
    def start_governance_conversion(self, *, account: str, labor_amount: int, phases: int):
        self.sync_parameters()
        conv = self.ledger.start_governance_conversion(account, labor_amount, phases)
        return {"conversion": conv.id, "parameter": conv.parameter, "per_phase": conv.per_phase}

    @command(touches=("ledger",))
    def convert_governance_to_labor(self, *, account: str, amount: int):
        self.sync_parameters()
        return {"labor": self.ledger.convert_governance_to_labor(account, amount)}

    @command(touches=("ledger",))
    def pay_gas(self, *, account: str, capital_amount: int):
        return {"labor_to_pool": self.ledger.pay_gas(account, capital_amount)}

    @command(touches=("ledger",))
    def update_rate(self, *, supply: str, demand: str):
        lc = self.params.ledger
        self.ledger.rate = rate_step(self.ledger.rate, supply, demand, lc.kappa, lc.rate_min, lc.rate_max, lc.rate_quantum)
        return {"labor_per_capital": self.ledger.rate.labor_per_capital}

    @command(touches=())
    def check_peg(self, *, index: str):
        return {"in_band": self.ledger.rate.peg_ok(index)}

    @command(touches=("ledger",))
    def distribute_pool(self):
        """Split the labor pool between content creators and seat holders.

        The content share goes pro rata to creators whose content was accepted
        this epoch; the remainder moves to the governance pool, which is paid
        out per assembly seat. Nothing is minted: pooled Labor already exists.
        """
        led = self.ledger
        pool = led.pools["labor"]
        content_part = floor(self.governance.params.incentive_pool_split * pool)
        paid_content: dict[str, int] = {}
        if content_part and self.accepted_this_epoch:
            paid_content = largest_remainder(self.accepted_this_epoch, content_part)
            for acct in sorted(paid_content):
                led.pool_pay("labor", acct, paid_content[acct])
        led.pool_move("labor", "governance", pool - content_part)
        paid_seats: dict[str, int] = {}
        assembly = self.governance.assembly
        if assembly and assembly.seats and led.pools["governance"]:
            seats: dict[str, int] = {}
            for s in assembly.seats:
                seats[s.holder] = seats.get(s.holder, 0) + 1
            paid_seats = largest_remainder(seats, led.pools["governance"])
            for acct in sorted(paid_seats):
                led.pool_pay("governance", acct, paid_seats[acct])
        return {"content": paid_content, "reason": MintReason.POOL_DISTRIBUTION.value, "seats": paid_seats}

    @command
    def advance_epoch(self):
        applied = self.ledger.advance_epoch()
        self.governance.apply_membership_changes()
        archived = self.supervision.finalize(self.ledger.epoch)
        self.accepted_this_epoch = {}
        return {"applied": applied, "archived": archived, "epoch": self.ledger.epoch}

    # -- crowdfunding --------------------------------------------------------------

    @command(touches=("crowdfunding", "credit"))
    def create_project(self, *, creator: str, target: int, deadline: int, marketing_proportion: str,
                       tranches: list, acceptance_threshold: str):
        p = self.crowdfunding.create_project(creator, target, deadline, marketing_proportion, tranches,
                                             acceptance_threshold, self.epoch)
        return {"project": p.id}

    @command(touches=("crowdfunding", "ledger"))
    def publish_contracts(self, *, project: str, fund_use_plan: str, reward_contract: str):
        p = self.crowdfunding.publish_contracts(project, fund_use_plan, reward_contract)
        return {"publications": p.publications, "state": p.state.value}

    @command(touches=("crowdfunding", "ledger"))
    def invest(self, *, investor: str, project: str, amount: int):
        p = self.crowdfunding.invest(investor, project, amount, self.epoch)
        return {"raised": p.raised}

    @command(touches=("crowdfunding", "ledger"))
    def pledge(self, *, evaluator: str, project: str, amount: int):
        self.crowdfunding.pledge(evaluator, project, amount)
        return None

    @command(touches=("crowdfunding", "ledger"))
    def settle(self, *, project: str):
        return self.crowdfunding.settle_at_deadline(project, self.epoch).to_dict()

    @command(touches=("crowdfunding",))
    def accept_contracts(self, *, funder: str, project: str, accept: bool):
        supervisors = self.governance.arbitral_nodes()
        p = self.crowdfunding.accept_contracts(funder, project, accept, supervisors)
        return {"needs_reformulation": p.needs_reformulation, "state": p.state.value}

    @command(touches=("crowdfunding",))
    def raise_alert(self, *, supervisor: str, project: str):
        self.crowdfunding.raise_alert(supervisor, project)
        return None

    @command(touches=("crowdfunding",))
    def council_vote(self, *, project: str, votes: dict):
        approved, approval = self.crowdfunding.council_vote(project, votes)
        return {"approval": approval, "approved": approved, "state": self.crowdfunding.get(project).state.value}

    @command(touches=("crowdfunding",))
    def suspend_funds(self, *, project: str, cause: str):
        self.crowdfunding.suspend_funds(project, SuspendCause(cause))
        return None

    @command(touches=("crowdfunding", "ledger"))
    def release_tranche(self, *, project: str, tranche: int):
        t = self.crowdfunding.release_tranche(project, tranche, self.ledger.rate)
        return {
            "capital_converted": t.capital_converted,
            "capital_released": t.capital_released,
            "labor_credited": t.labor_credited,
            "state": self.crowdfunding.get(project).state.value,
        }

    # -- governance ------------------------------------------------------------------

    @command(touches=("governance",))
    def form_party(self, *, founder: str, charter: str):
        return {"party": self.governance.form_party(founder, charter).id}

    @command(touches=("governance",))
    def join_party(self, *, node: str, party: str):
        self.governance.join_party(node, party)
        return None

    @command(touches=("governance",))
    def leave_party(self, *, node: str):
        self.governance.leave_party(node)
        return None

    @command(touches=("governance",))
    def hold_election(self):
        seed = epoch_seed(self.last_hash, self.epoch)
        snapshot = self.governance.election_snapshot()
        assembly = self.governance.hold_election(self.epoch, seed)
        return {"roster": assembly.roster(), "seed": seed, "snapshot": snapshot}

    @command(touches=("governance",))
    def nominate(self, *, chief: str, candidates: list, boost: str):
        n = self.governance.nominate(chief, candidates, boost, self.epoch)
        return n.to_state()

    @command(touches=("governance",))
    def adjust_incentive_pool(self, *, chief: str, split: str):
        return {"params": self.governance.adjust_incentive_pool(chief, split).to_state()}

    @command(touches=("governance",))
    def set_conversion_parameter(self, *, chief: str, value: str):
        params = self.governance.set_conversion_parameter(chief, value)
        self.sync_parameters()
        return {"params": params.to_state()}

    @command(touches=("governance",))
    def amend_rules(self, *, proposer: str, delta: dict, votes: dict):
        params = self.governance.amend_rules(proposer, delta, votes)
        self.sync_parameters()
        return {"params": params.to_state()}

    @command(touches=("governance",))
    def impeach_chief(self, *, mover: str, votes: dict):
        removed, replacement = self.governance.impeach_chief(mover, votes)
        return {"removed": removed, "replacement": replacement, "roster": self.governance.assembly.roster()}

    @command(touches=("governance",))
    def phase_down_platform(self):
        return {"share": self.governance.phase_down_platform()}

    # -- supervision ---------------------------------------------------------------------

    @command(touches=("supervision",))
    def submit_content(self, *, creator: str, digest: str):
        return {"content": self.supervision.submit_content(creator, digest, self.epoch).id}

    @command(touches=("supervision",))
    def cast_vote(self, *, voter: str, case: str, verdict: bool):
        self.supervision.cast_vote(voter, case, verdict, self.epoch)
        return None

    @command(touches=("supervision", "ledger", "system"))
    def close_content_audit(self, *, content: str):
        out = self.supervision.close_content_audit(content, self.epoch, self.content_reward())
        if out["accepted"]:
            creator = out["creator"]
            self.accepted_this_epoch[creator] = self.accepted_this_epoch.get(creator, 0) + 1
        return out

    @command(touches=("supervision", "ledger"))
    def submit_tipoff(self, *, reporter: str, target_kind: str, target: str, category: str, deposit: int):
        t = self.supervision.submit_tipoff(reporter, target_kind, target, category, deposit, self.epoch)
        return {"tipoff": t.id}

    @command(touches=("supervision", "ledger"))
    def close_tipoff_audit(self, *, tipoff: str):
        return self.supervision.close_tipoff_audit(tipoff, self.epoch)

    @command(touches=("supervision",))
    def submit_rebuttal(self, *, account: str, tipoff: str, evidence: str):
        self.supervision.submit_rebuttal(account, tipoff, evidence, self.epoch)
        return None

    @command(touches=("supervision", "ledger", "credit"))
    def arbitrate(self, *, tipoff: str):
        return self.supervision.arbitrate(tipoff, self.epoch, self.whistleblower_reward())

    @command(touches=("supervision", "credit"))
    def record_satisfaction(self, *, funder: str, project: str, rating: int):
        return {"applied": self.supervision.record_satisfaction(funder, project, rating, self.epoch)}

    @command(touches=("supervision", "credit", "crowdfunding"))
    def check_warning_line(self, *, project: str):
        return {"actions": self.supervision.check_warning_line(project, self.epoch)}

    # -- regulation ---------------------------------------------------------------------

    @command(touches=("regulator",))
    def regulate(self):
        window = self.params.regulator.window
        m = self.metrics.window(max(0, self.epoch - window + 1), self.epoch)
        self.regulator = regulate_step(self.regulator, m)
        return {
            "incentive": self.regulator.supervision_incentive,
            "quota": self.regulator.labor_distribution_quota,
            "valid_ratio": m.valid_ratio,
        }

    # -- convenience queries (read-only) -----------------------------------------------------

    def roles_of(self, account: str) -> set[Role]:
        return self.governance.roles_of(account)

    def project_state(self, project_id: str) -> ProjectState:
        return self.crowdfunding.get(project_id).state


def apply(eco: Ecosystem, op: str, args: dict) -> Any:
    """Run a logged operation by name (the replay entry point)."""
    try:
        fn = COMMANDS[op]
    except KeyError:
        raise KeyError(f"unknown operation {op!r}") from None
    return fn(eco, **args)
