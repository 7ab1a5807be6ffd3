"""Builders shared by the test modules.

Everything here drives the economy through its logged commands, so every
helper also produces an auditable event log.
"""

from __future__ import annotations

import random

from dcc.governance import Role
from dcc.ledger import TokenKind
from dcc.sim.agents import CONTENT_SUBMITTERS, POLICY_NAMES
from dcc.sim.config import ScenarioConfig
from dcc.system import Ecosystem, Params

PLATFORM = "plat-0"
C, L, G = TokenKind.CAPITAL, TokenKind.LABOR, TokenKind.GOVERNANCE


def economy(accounts=(), capital=None, **params) -> Ecosystem:
    """Configured ecosystem with one platform node holding an arbitral seat."""
    eco = Ecosystem(check_cache=True)
    cfg = {"platform_nodes": [PLATFORM]} | params
    eco.configure(params=Params.from_dict(cfg).to_dict())
    eco.open_account(account=PLATFORM)
    for a in accounts:
        eco.open_account(account=a)
    for a, amount in (capital or {}).items():
        eco.deposit_capital(account=a, amount=amount)
    eco.hold_election()
    return eco


def arbitral(eco: Ecosystem) -> list[str]:
    return eco.governance.arbitral_nodes()


def vote_all(eco: Ecosystem, case: str, verdict: bool = True) -> None:
    for v in arbitral(eco):
        eco.cast_vote(voter=v, case=case, verdict=verdict)


def earn_labor(eco: Ecosystem, account: str, times: int = 1) -> list[str]:
    """Submit ``times`` pieces of content, approve them, close the audits next epoch."""
    cids = []
    for i in range(times):
        cid = eco.submit_content(creator=account, digest=f"{account}-{eco.epoch}-{i}")["content"]
        vote_all(eco, cid)
        cids.append(cid)
    eco.advance_epoch()
    for cid in cids:
        eco.close_content_audit(content=cid)
    return cids


def advance(eco: Ecosystem, n: int = 1) -> None:
    for _ in range(n):
        eco.advance_epoch()


def open_project(eco: Ecosystem, creator: str, target: int, *, duration: int = 2, marketing="1/5",
                 tranches=("1/2", "1/2"), threshold="1/2") -> str:
    pid = eco.create_project(creator=creator, target=target, deadline=eco.epoch + duration,
                             marketing_proportion=marketing, tranches=list(tranches),
                             acceptance_threshold=threshold)["project"]
    eco.publish_contracts(project=pid, fund_use_plan=f"plan-{pid}", reward_contract=f"reward-{pid}")
    return pid


def settle_when_due(eco: Ecosystem, pid: str) -> dict:
    while eco.epoch < eco.crowdfunding.get(pid).deadline_epoch:
        eco.advance_epoch()
    return eco.settle(project=pid)


def tipoff_to_arbitration(eco: Ecosystem, reporter: str, target_kind: str, target: str, *,
                          category="Plagiarism", deposit=None) -> str:
    """File a tip-off and pass its preliminary audit; returns the tip-off id."""
    deposit = eco.params.supervision.deposit_min if deposit is None else deposit
    tid = eco.submit_tipoff(reporter=reporter, target_kind=target_kind, target=target,
                            category=category, deposit=deposit)["tipoff"]
    vote_all(eco, tid)
    eco.advance_epoch()
    eco.close_tipoff_audit(tipoff=tid)
    return tid


def tour() -> Ecosystem:
    """Exercise every registered command at least once, successfully."""
    eco = economy(
        ["alice", "bob", "carol", "dave", "erin", "frank"],
        {"bob": 500, "carol": 500, "dave": 100},
        governance={"party_min_tokens": 10, "n_chief": 1, "n_senatorial": 1, "n_arbitral": 2},
    )
    cids = earn_labor(eco, "alice", 2)
    earn_labor(eco, "dave", 2)
    earn_labor(eco, "erin", 2)
    earn_labor(eco, "frank", 2)

    # supervision: a tip-off that is rebutted and then arbitrated
    tid = tipoff_to_arbitration(eco, "frank", "content", cids[0])
    eco.submit_rebuttal(account="alice", tipoff=tid, evidence="original-drafts")
    vote_all(eco, tid, True)
    eco.advance_epoch()
    eco.arbitrate(tipoff=tid)

    # governance token conversions and a party
    eco.start_governance_conversion(account="dave", labor_amount=100, phases=2)
    eco.start_governance_conversion(account="erin", labor_amount=100, phases=2)
    advance(eco, 2)
    eco.convert_governance_to_labor(account="erin", amount=10)
    party = eco.form_party(founder="dave", charter="charter-1")["party"]
    eco.join_party(node="erin", party=party)
    eco.advance_epoch()
    eco.hold_election()
    gov = eco.governance
    chief = gov.assembly.holders(Role.CHIEF)[0]
    senator = gov.assembly.holders(Role.SENATORIAL)[0]
    eco.nominate(chief=chief, candidates=["erin"], boost="4")
    eco.adjust_incentive_pool(chief=chief, split="3/5")
    eco.set_conversion_parameter(chief=chief, value="1")
    eco.amend_rules(proposer=senator, delta={"audit_threshold": "1/2"}, votes={senator: True})
    eco.impeach_chief(mover=senator, votes={senator: True})
    eco.phase_down_platform()

    # a successful project through every tranche
    p1 = open_project(eco, "alice", 100)
    eco.invest(investor="bob", project=p1, amount=60)
    eco.pay_gas(account="bob", capital_amount=1)
    eco.invest(investor="carol", project=p1, amount=40)
    eco.pledge(evaluator="frank", project=p1, amount=20)
    settle_when_due(eco, p1)
    eco.accept_contracts(funder="bob", project=p1, accept=True)
    eco.raise_alert(supervisor="carol", project=p1)
    eco.council_vote(project=p1, votes={"bob": True, "carol": True})
    eco.release_tranche(project=p1, tranche=0)
    eco.record_satisfaction(funder="bob", project=p1, rating=1)
    eco.check_warning_line(project=p1)
    eco.suspend_funds(project=p1, cause="CouncilAlert")
    eco.council_vote(project=p1, votes={"bob": True, "carol": True})
    eco.release_tranche(project=p1, tranche=1)

    # a failed project
    p2 = open_project(eco, "alice", 100)
    eco.invest(investor="carol", project=p2, amount=40)
    eco.pledge(evaluator="frank", project=p2, amount=25)
    settle_when_due(eco, p2)

    # ledger odds and ends
    eco.transfer(src="bob", dst="carol", kind="capital", amount=5)
    eco.convert_labor_to_capital(account="frank", labor_amount=5)
    eco.update_rate(supply="3", demand="2")
    eco.check_peg(index="1")
    eco.distribute_pool()
    eco.regulate()
    eco.leave_party(node="erin")
    eco.advance_epoch()
    return eco


def random_scenario(index: int, epochs: int = 100):
    """Small randomized population for sweep tests; deterministic in ``index``."""
    r = random.Random(index)
    agents = {p: r.randint(0, 1) for p in POLICY_NAMES}
    for p in r.sample(POLICY_NAMES, 2):
        agents[p] += 1
    submit_rates = {p: {"submit": r.randint(10, 60) / 100} for p in POLICY_NAMES if p in CONTENT_SUBMITTERS}
    return ScenarioConfig.model_validate(dict(
        seed=r.getrandbits(64), epochs=epochs, agents=agents, policy_params=submit_rates,
        platform_nodes=r.randint(1, 2),
        governance={"n_chief": 1, "n_senatorial": 1, "n_arbitral": r.randint(1, 3)},
        projects=[{"creator": r.choice(["honest-creator", "plagiarist"]), "every": r.randint(5, 15),
                   "target": r.randint(50, 300), "duration": r.randint(1, 4)}],
        election_interval=r.choice([1, 5, 10]), regulation_interval=5,
    ))


# -- journal analyses ------------------------------------------------------------------

CAPITAL_TO_LABOR_OPS = frozenset({"pay_gas", "release_tranche"})


def _by_holder(effects, kind):
    return {h: d for h, k, d in effects if k == kind}


def account_to_account_flows(events) -> list[tuple[int, str]]:
    """Records where Labor or Governance left one account and reached another.

    Within one record, every unit an account gives up must be burned or
    parked in an escrow, lock or pool. Across records, a Labor escrow may
    only pay an account back what that account put in, unless the payout is
    matched by fresh minting in the same record.
    """
    bad = []
    contributed: dict[tuple[str, str], int] = {}
    for ev in events:
        effects = ev["payload"]["effects"]
        for kind in ("labor", "governance"):
            d = _by_holder(effects, kind)
            outflow = -sum(v for h, v in d.items() if h.startswith("acct:") and v < 0)
            sinks = d.get("burned", 0) + sum(v for h, v in d.items()
                                             if h.startswith(("escrow:", "lock:", "pool:")) and v > 0)
            if outflow > sinks:
                bad.append((ev["seq"], f"{kind}: {outflow} left accounts, only {sinks} was burned or parked"))
            escrows_in = [h for h, v in d.items() if h.startswith("escrow:") and v > 0]
            escrows_out = [h for h, v in d.items() if h.startswith("escrow:") and v < 0]
            for e in escrows_in:
                for h, v in d.items():
                    if h.startswith("acct:") and v < 0:
                        contributed[(e, h)] = contributed.get((e, h), 0) - v
            if escrows_out:
                released = -sum(d[e] for e in escrows_out)
                minted = d.get("minted", 0)
                covered = 0
                for h, v in d.items():
                    if not h.startswith("acct:") or v <= 0:
                        continue
                    own = sum(contributed.get((e, h), 0) for e in escrows_out)
                    take = min(own, v)
                    covered += take
                    for e in escrows_out:
                        got = min(contributed.get((e, h), 0), take)
                        contributed[(e, h)] = contributed.get((e, h), 0) - got
                        take -= got
                    if v - min(own, v) > minted:
                        bad.append((ev["seq"], f"{kind}: {h} received escrowed tokens it never deposited"))
                if covered + d.get("burned", 0) < released:
                    bad.append((ev["seq"], f"{kind}: escrow payout not matched to depositors"))
    return bad


def capital_to_labor_paths(events) -> list[tuple[int, str]]:
    """Records that turn Capital into Labor other than through the two sanctioned routes."""
    bad = []
    creators: dict[str, str] = {}
    for ev in events:
        if ev["op"] == "create_project":
            creators[ev["payload"]["result"]["project"]] = ev["payload"]["args"]["creator"]
        cap = _by_holder(ev["payload"]["effects"], "capital")
        lab = _by_holder(ev["payload"]["effects"], "labor")
        for h, v in lab.items():
            if h.startswith("acct:") and v > 0 and cap.get(h, 0) < 0:
                bad.append((ev["seq"], f"{h} paid Capital and received Labor in one operation"))
        if not (cap.get("burned", 0) > 0 and lab.get("minted", 0) > 0):
            continue
        op = ev["op"]
        if op not in CAPITAL_TO_LABOR_OPS:
            bad.append((ev["seq"], f"{op} burned Capital and minted Labor"))
            continue
        gainers = {h for h, v in lab.items() if v > 0 and h not in ("minted", "burned")}
        if op == "pay_gas" and gainers != {"pool:labor"}:
            bad.append((ev["seq"], f"gas Labor went to {sorted(gainers)} instead of the reward pool"))
        if op == "release_tranche":
            creator = "acct:" + creators.get(ev["payload"]["args"]["project"], "?")
            if gainers != {creator}:
                bad.append((ev["seq"], f"tranche Labor went to {sorted(gainers)} instead of {creator}"))
    return bad
