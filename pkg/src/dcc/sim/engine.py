"""Deterministic agent-based run loop.

Each epoch runs eight phases in a fixed order:

1. elections (platform phase-down, party formation, assembly draw, nominations)
2. content closings, submissions and audit votes
3. crowdfunding actions and token conversions
4. settlements, council business and tranche releases
5. supervision closings, rebuttals, tip-offs, votes and warning-line checks
6. regulation and reward-pool distribution
7. exchange-rate update
8. epoch advance (conversion phases, membership changes, archiving)

Agents act in sorted id order, each drawing from its own per-epoch stream,
so the run is a pure function of the scenario.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Callable

from dcc.credit import account_subject, project_subject
from dcc.crowdfunding import ProjectState
from dcc.errors import DCCError, IoFailure
from dcc.governance import Role
from dcc.ledger import TokenKind
from dcc.reports import build_report
from dcc.sim import agents as pol
from dcc.sim.agents import Agent, stream
from dcc.sim.config import ScenarioConfig, load_config, platform_accounts
from dcc.supervision import ContentStatus, TipOffState
from dcc.system import Ecosystem

C, L, G = TokenKind.CAPITAL, TokenKind.LABOR, TokenKind.GOVERNANCE


def _digest(*parts) -> str:
    return hashlib.sha256("|".join(map(str, parts)).encode()).hexdigest()[:16]


@dataclass
class RunResult:
    final_hash: str
    events: list[dict]
    report: dict


class Simulation:
    def __init__(self, config: ScenarioConfig, sink: Callable[[str], None] | None = None):
        self.cfg = config
        self.eco = Ecosystem(sink)
        agents = []
        for policy in sorted(config.agents):
            for i in range(config.agents[policy]):
                agents.append(Agent(pol.agent_id(policy, i), policy, config.policy(policy)))
        for acct in platform_accounts(config.platform_nodes):
            agents.append(Agent(acct, "platform", pol.POLICY_DEFAULTS["platform"]))
        self.agents = sorted(agents, key=lambda a: a.id)
        self.by_id = {a.id: a for a in self.agents}
        self.genuine: dict[str, bool] = {}
        self.reports_true: dict[str, bool] = {}
        self.templates_used = [0] * len(config.projects)
        self._streams: dict[str, object] = {}
        self._epoch_start = 0

    # -- helpers ---------------------------------------------------------------

    def rng(self, agent_id: str):
        r = self._streams.get(agent_id)
        if r is None:
            r = self._streams[agent_id] = stream(self.cfg.seed, agent_id, self.eco.epoch)
        return r

    def do(self, op: str, **args):
        """Run a command; a rejected action is simply not taken."""
        try:
            return getattr(self.eco, op)(**args)
        except DCCError:
            return None

    def of(self, *policies: str) -> list[Agent]:
        return [a for a in self.agents if a.policy in policies]

    def bal(self, acct: str, kind: TokenKind) -> int:
        return self.eco.ledger.balance(acct, kind)

    def honest_owner(self, acct: str) -> bool:
        return self.by_id[acct].policy != "plagiarist"

    # -- run -------------------------------------------------------------------------

    def run(self) -> str:
        if self.cfg.epochs < 1:
            return self.eco.last_hash
        self.onboard()
        for _ in range(self.cfg.epochs):
            self._streams = {}
            self._epoch_start = len(self.eco.events)
            self.elections()
            self.content()
            self.crowdfunding()
            self.settlements()
            self.supervision()
            self.regulation()
            self.rate()
            self.eco.advance_epoch()
        return self.eco.last_hash

    def onboard(self) -> None:
        self.eco.configure(params=self.cfg.build_params().to_dict())
        for a in self.agents:
            self.eco.open_account(account=a.id)
            amount = self.cfg.endowment_of(a.policy) if a.policy != "platform" else 0
            if amount:
                self.eco.deposit_capital(account=a.id, amount=amount)

    # -- phase 1 ------------------------------------------------------------------------

    def elections(self) -> None:
        eco, gov = self.eco, self.eco.governance
        election_now = eco.epoch % self.cfg.election_interval == 0
        if election_now and eco.epoch > 0 and gov.params.platform_supervision_share > 0:
            eco.phase_down_platform()
        for a in self.of("active-governor", "honest-creator"):
            if gov._busy(a.id):
                continue
            tokens = self.bal(a.id, G)
            if a.policy == "active-governor" and tokens >= gov.config.party_min_tokens:
                eco.form_party(founder=a.id, charter=_digest("charter", a.id))
            elif tokens >= 1 and gov.parties and self.rng(a.id).random() < a.p("join"):
                party = self.rng(a.id).choice(sorted(gov.parties))
                eco.join_party(node=a.id, party=party)
        if election_now:
            eco.hold_election()
        for chief in (gov.assembly.holders(Role.CHIEF) if gov.assembly else []):
            a = self.by_id[chief]
            if a.policy == "active-governor" and self.rng(chief).random() < a.p("nominate"):
                party = gov.membership.get(chief)
                pool = sorted(gov.parties[party].members) if party else []
                if pool:
                    pick = self.rng(chief).choice(pool)
                    self.do("nominate", chief=chief, candidates=[pick], boost=str(a.p("boost", 4)))

    # -- phase 2 -------------------------------------------------------------------------

    def voters(self) -> list[Agent]:
        return [self.by_id[v] for v in self.eco.governance.arbitral_nodes()]

    def content(self) -> None:
        eco, sup = self.eco, self.eco.supervision
        e = eco.epoch
        for cid in sorted(c for c, r in sup.contents.items()
                          if r.status == ContentStatus.PENDING_AUDIT and not r.audit.is_open(e)):
            eco.close_content_audit(content=cid)
        quota = float(eco.regulator.labor_distribution_quota)
        incentive = float(eco.regulator.supervision_incentive)
        burst = 1.0
        dist = self.cfg.disturbance
        if dist is not None and dist.active(e):
            burst = dist.plagiarism_multiplier
        for a in self.agents:
            if a.policy not in pol.CONTENT_SUBMITTERS:
                continue
            p = a.p("submit")
            if a.policy == "plagiarist":
                p = min(1.0, p * burst * quota / incentive)
            if self.rng(a.id).random() < p:
                res = eco.submit_content(creator=a.id, digest=_digest("content", a.id, e))
                self.genuine[res["content"]] = a.policy != "plagiarist"
        cases = [c for c, r in sup.contents.items() if r.status == ContentStatus.PENDING_AUDIT and r.audit.is_open(e)]
        for v in self.voters():
            r = self.rng(v.id)
            for cid in sorted(cases):
                if r.random() < v.p("vote", 0.8):
                    eco.cast_vote(voter=v.id, case=cid, verdict=pol.audit_verdict(v, r, self.genuine.get(cid, True)))

    # -- phase 3 --------------------------------------------------------------------------

    def crowdfunding(self) -> None:
        eco, cf = self.eco, self.eco.crowdfunding
        e = eco.epoch
        for i, t in enumerate(self.cfg.projects):
            if e < t.start or (e - t.start) % t.every:
                continue
            creators = self.of(t.creator)
            if not creators:
                continue
            creator = creators[self.templates_used[i] % len(creators)].id
            self.templates_used[i] += 1
            res = self.do("create_project", creator=creator, target=t.target, deadline=e + t.duration,
                          marketing_proportion=t.marketing_proportion, tranches=t.schedule(),
                          acceptance_threshold=t.acceptance_threshold)
            if res:
                eco.publish_contracts(project=res["project"], fund_use_plan=_digest("plan", res["project"], e),
                                      reward_contract=_digest("reward", res["project"], e))
        live = sorted(cf.projects)
        for pid in live:
            p = cf.projects[pid]
            if p.state == ProjectState.AWAITING_ACCEPTANCE and p.needs_reformulation:
                eco.publish_contracts(project=pid, fund_use_plan=_digest("plan", pid, e),
                                      reward_contract=_digest("reward", pid, e))
        funding = [pid for pid in live if cf.projects[pid].state == ProjectState.FUNDING
                   and cf.projects[pid].deadline_epoch > e]
        gas = self.cfg.gas_fee
        for a in self.of(*pol.INVESTORS):
            r = self.rng(a.id)
            for pid in funding:
                p = cf.projects[pid]
                room = p.target_capital - p.raised
                if room <= 0 or r.random() >= a.p("invest"):
                    continue
                if a.policy == "diligent-investor":
                    if eco.credit.score(account_subject(p.creator)) < 50:
                        continue
                amount = min(int(a.p("amount")), room, self.bal(a.id, C) - gas)
                if amount > 0:
                    eco.invest(investor=a.id, project=pid, amount=amount)
                    if gas:
                        eco.pay_gas(account=a.id, capital_amount=gas)
        for a in self.of("honest-creator"):
            r = self.rng(a.id)
            amount = int(a.p("pledge_amount"))
            others = [pid for pid in funding if cf.projects[pid].creator != a.id]
            if others and amount > 0 and self.bal(a.id, L) >= amount and r.random() < a.p("pledge"):
                eco.pledge(evaluator=a.id, project=r.choice(others), amount=amount)
        for pid in live:
            p = cf.projects[pid]
            if p.state != ProjectState.AWAITING_ACCEPTANCE or p.needs_reformulation:
                continue
            for funder in sorted(p.invested_by()):
                if funder in p.votes or p.state != ProjectState.AWAITING_ACCEPTANCE or p.needs_reformulation:
                    continue
                a = self.by_id[funder]
                eco.accept_contracts(funder=funder, project=pid, accept=pol.accepts_contracts(a, self.rng(funder)))
        for pid in live:
            p = cf.projects[pid]
            if p.state != ProjectState.ACTIVE:
                continue
            period = sum(1 for t in p.tranches if t.released)
            for funder in sorted(p.invested_by()):
                a = self.by_id[funder]
                r = self.rng(funder)
                if (pid, period, funder) in eco.supervision.ratings or r.random() >= a.p("rate"):
                    continue
                rating = pol.satisfaction(a, r, self.honest_owner(p.creator))
                eco.record_satisfaction(funder=funder, project=pid, rating=rating)
        self.conversions()

    def conversions(self) -> None:
        eco = self.eco
        for a in self.agents:
            r = self.rng(a.id)
            labor = self.bal(a.id, L)
            if a.policy in ("active-governor", "honest-creator"):
                if labor >= 20 and r.random() < a.p("convert_governance"):
                    eco.start_governance_conversion(account=a.id, labor_amount=labor // 2,
                                                    phases=self.cfg.conversion_phases)
                gov = self.bal(a.id, G)
                if gov and a.p("convert_back") and r.random() < a.p("convert_back") and eco.governance.membership.get(a.id) is None:
                    eco.convert_governance_to_labor(account=a.id, amount=gov)
            elif a.policy in ("plagiarist", "passive-holder"):
                if labor > 0 and r.random() < a.p("convert_capital"):
                    self.do("convert_labor_to_capital", account=a.id, labor_amount=labor)
            if a.policy == "passive-holder" and r.random() < a.p("transfer"):
                amount = min(int(a.p("amount")), self.bal(a.id, C))
                peers = [b.id for b in self.agents if b.id != a.id]
                if amount > 0 and peers:
                    eco.transfer(src=a.id, dst=r.choice(peers), kind="capital", amount=amount)

    # -- phase 4 ---------------------------------------------------------------------------

    def settlements(self) -> None:
        eco, cf = self.eco, self.eco.crowdfunding
        e = eco.epoch
        for pid in sorted(cf.projects):
            p = cf.projects[pid]
            if p.state == ProjectState.FUNDING and p.deadline_epoch <= e:
                eco.settle(project=pid)
        for pid in sorted(cf.projects):
            p = cf.projects[pid]
            if p.state != ProjectState.ACTIVE or p.alert_pending:
                continue
            score = eco.credit.score(project_subject(pid))
            for member in sorted(p.council.members):
                a = self.by_id[member]
                if a.policy == "diligent-investor":
                    raise_it = score <= a.p("alert_below")
                else:
                    raise_it = self.rng(member).random() < a.p("alert")
                if raise_it:
                    eco.raise_alert(supervisor=member, project=pid)
                    break
        for pid in sorted(cf.projects):
            p = cf.projects[pid]
            if p.state == ProjectState.ACTIVE and p.alert_pending:
                honest = self.honest_owner(p.creator)
                votes = {m: pol.council_approves(self.by_id[m], self.rng(m), honest) for m in sorted(p.council.members)}
                eco.council_vote(project=pid, votes=votes)
        for pid in sorted(cf.projects):
            p = cf.projects[pid]
            if p.state == ProjectState.ACTIVE and not p.alert_pending:
                eco.release_tranche(project=pid, tranche=p.next_tranche())

    # -- phase 5 ---------------------------------------------------------------------------

    def supervision(self) -> None:
        eco, sup, cf = self.eco, self.eco.supervision, self.eco.crowdfunding
        e = eco.epoch
        for tid in sorted(t for t, r in sup.tipoffs.items()
                          if r.state == TipOffState.PENDING_AUDIT and not r.audit.is_open(e)):
            eco.close_tipoff_audit(tipoff=tid)
        for tid in sorted(t for t, r in sup.tipoffs.items() if sup.ready_for_arbitration(r, e)):
            eco.arbitrate(tipoff=tid)
        for tid in sorted(sup.tipoffs):
            t = sup.tipoffs[tid]
            if t.state != TipOffState.AWAITING_REBUTTAL or t.rebuttal is not None or e > t.rebuttal_deadline:
                continue
            owner = sup._target_owner(t)
            a = self.by_id[owner]
            rate = a.p("rebut", 1.0)
            if self.rng(owner).random() < rate:
                eco.submit_rebuttal(account=owner, tipoff=tid, evidence=_digest("evidence", tid))
        self.tipoffs()
        cases = [tid for tid, t in sup.tipoffs.items()
                 if (t.state == TipOffState.PENDING_AUDIT and t.audit.is_open(e))
                 or (t.state == TipOffState.AWAITING_REBUTTAL and t.arbitration and t.arbitration.is_open(e))]
        for v in self.voters():
            r = self.rng(v.id)
            for tid in sorted(cases):
                if r.random() >= v.p("vote", 0.8):
                    continue
                t = sup.tipoffs[tid]
                if t.state == TipOffState.PENDING_AUDIT:
                    verdict = pol.tipoff_audit_verdict(v, r, self.reports_true[tid])
                else:
                    verdict = pol.arbitration_verdict(v, r, not self.reports_true[tid])
                if v.id not in (t.audit.votes if t.state == TipOffState.PENDING_AUDIT else t.arbitration.votes):
                    eco.cast_vote(voter=v.id, case=tid, verdict=verdict)
        floor_line = sup.config.warning_line
        for pid in sorted(cf.projects):
            p = cf.projects[pid]
            if p.state not in (ProjectState.ACTIVE, ProjectState.SUSPENDED):
                continue
            score = eco.credit.score(project_subject(pid))
            if score > floor_line and pid not in sup.investigating:
                continue
            hard = score <= sup.config.hard_floor and p.state == ProjectState.ACTIVE
            if pid not in sup.investigating or hard or score > floor_line:
                eco.check_warning_line(project=pid)

    def tipoffs(self) -> None:
        eco, sup, cf = self.eco, self.eco.supervision, self.eco.crowdfunding
        e = eco.epoch
        cfg = sup.config
        incentive = float(eco.regulator.supervision_incentive)
        challengeable = sorted(
            cid for cid, r in sup.contents.items()
            if r.status == ContentStatus.ACCEPTED and r.open_case is None and e <= r.accepted_epoch + cfg.challenge_window
        )
        for a in self.of("honest-reporter", "false-reporter"):
            r = self.rng(a.id)
            if eco.credit.score(account_subject(a.id)) < cfg.tipoff_credit_floor:
                continue
            if a.policy == "honest-reporter":
                targets = [c for c in challengeable if not self.genuine.get(c, True)]
                chance = min(1.0, a.p("detect") * incentive)
                kind = "content"
                fraud = [pid for pid in sorted(cf.projects)
                         if cf.projects[pid].state == ProjectState.ACTIVE and not self.honest_owner(cf.projects[pid].creator)
                         and not any(t.target_id == pid for t in sup.tipoffs.values())]
            else:
                targets = [c for c in challengeable if self.genuine.get(c, True) and sup.contents[c].creator != a.id]
                chance = a.p("report")
                kind = "content"
                fraud = []
            for cid in targets:
                if self.bal(a.id, L) < cfg.deposit_min:
                    break
                if sup.contents[cid].open_case is None and r.random() < chance:
                    res = eco.submit_tipoff(reporter=a.id, target_kind=kind, target=cid,
                                            category="Plagiarism", deposit=cfg.deposit_min)
                    self.reports_true[res["tipoff"]] = a.policy == "honest-reporter"
            for pid in fraud:
                if self.bal(a.id, L) < cfg.deposit_min:
                    break
                if r.random() < chance:
                    res = eco.submit_tipoff(reporter=a.id, target_kind="project", target=pid,
                                            category="Fraud", deposit=cfg.deposit_min)
                    self.reports_true[res["tipoff"]] = True

    # -- phases 6 and 7 --------------------------------------------------------------------

    def regulation(self) -> None:
        eco = self.eco
        if (eco.epoch + 1) % self.cfg.regulation_interval == 0:
            eco.regulate()
        if eco.ledger.pools["labor"] > 0 or eco.ledger.pools["governance"] > 0:
            eco.distribute_pool()

    def rate(self) -> None:
        minted = burned = 0
        for ev in self.eco.events[self._epoch_start:]:
            for holder, kind, delta in ev["payload"]["effects"]:
                if kind == "labor":
                    if holder == "minted":
                        minted += delta
                    elif holder == "burned":
                        burned += delta
        if minted or burned:
            self.eco.update_rate(supply=Fraction(minted + 1), demand=Fraction(burned + 1))


def simulate(config: ScenarioConfig, sink: Callable[[str], None] | None = None) -> RunResult:
    sim = Simulation(config, sink)
    final = sim.run()
    return RunResult(final, sim.eco.events, build_report(sim.eco.events, final))


def run(config_path: str | Path, out_dir: str | Path) -> dict:
    """Run a scenario file; writes ``events.jsonl`` and ``report.json`` under ``out_dir``."""
    config = load_config(config_path)
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "events.jsonl", "w", encoding="utf-8", newline="\n") as fh:
            result = simulate(config, lambda line: fh.write(line + "\n"))
        (out / "report.json").write_text(json.dumps(result.report, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"cannot write run output under {out}: {exc}") from None
    return result.report
