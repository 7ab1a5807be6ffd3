from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dcc.credit import CreditBook
from dcc.crowdfunding import Crowdfunding, ProjectState, council_weights, settlement_violations
from dcc.errors import (BadTrancheSchedule, CouncilVoteRequired, CreditTooLow, DuplicateVote, InvalidProportion,
                        NotAFunder, OutOfOrderTranche, OverTarget, PastDeadline, ProjectSuspended, WrongState)
from dcc.ledger import ExchangeRate, Ledger, MintReason, TokenKind

C, L = TokenKind.CAPITAL, TokenKind.LABOR


def market(investors=(), pledgers=(), credit=60):
    led = Ledger(ExchangeRate(Fraction(1)))
    book = CreditBook(credit)
    for a in ("creator", *investors, *pledgers):
        led.open_account(a)
        book.open("acct:" + a)
    for a in investors:
        led.deposit_capital(a, 10_000)
    for a in pledgers:
        led.mint_labor(a, 10_000, MintReason.CONTENT_REWARD)
    return led, Crowdfunding(led, book)


def project(cf, target=100, tranches=("1/2", "1/2"), m="1/5", theta="1/2"):
    p = cf.create_project("creator", target, 3, m, list(tranches), theta, 0)
    cf.publish_contracts(p.id, "plan", "reward")
    return p


def test_creation_is_validated():
    led, cf = market()
    with pytest.raises(BadTrancheSchedule):
        cf.create_project("creator", 100, 3, "1/5", ["1/2", "1/3"], "1/2", 0)
    with pytest.raises(InvalidProportion):
        cf.create_project("creator", 100, 3, "3/2", ["1"], "1/2", 0)
    _, low = market(credit=30)
    with pytest.raises(CreditTooLow):
        low.create_project("creator", 100, 3, "1/5", ["1"], "1/2", 0)


def test_failed_settlement_refunds_pro_rata_and_burns_the_rest():
    led, cf = market(["inv"], ["ev"])
    p = project(cf)
    cf.invest("inv", p.id, 40, 0)
    cf.pledge("ev", p.id, 50)
    rep = cf.settle_at_deadline(p.id, 3)
    assert rep.outcome == "failure"
    assert rep.labor_refunded == {"ev": 20} and rep.labor_burned == 30 and rep.capital_returned == {"inv": 40}
    assert led.balance("inv", C) == 10_000 and led.balance("ev", L) == 10_000 - 30
    assert p.state == ProjectState.FAILED


def test_successful_settlement_pays_pledgers_from_the_marketing_pool():
    led, cf = market(["inv"], ["e1", "e2"])
    p = project(cf, m="1/10")
    cf.invest("inv", p.id, 100, 0)
    cf.pledge("e1", p.id, 2)
    cf.pledge("e2", p.id, 1)
    rep = cf.settle_at_deadline(p.id, 3)
    assert rep.marketing_pool == 10 and rep.marketing_shares == {"e1": 7, "e2": 3}
    assert rep.production_fund == 90 and rep.labor_burned == 0
    assert led.balance("e1", C) == 7 and led.balance("e1", L) == 10_000


def test_no_pledges_means_no_marketing_pool():
    _, cf = market(["inv"])
    p = project(cf)
    cf.invest("inv", p.id, 100, 0)
    assert cf.settle_at_deadline(p.id, 3).production_fund == 100


def test_investment_limits():
    _, cf = market(["inv"])
    p = project(cf)
    with pytest.raises(OverTarget):
        cf.invest("inv", p.id, 101, 0)
    with pytest.raises(PastDeadline):
        cf.invest("inv", p.id, 1, 4)


def test_acceptance_rejection_requires_republication():
    _, cf = market(["a", "b"])
    p = project(cf, theta="3/5")
    cf.invest("a", p.id, 50, 0)
    cf.invest("b", p.id, 50, 0)
    cf.settle_at_deadline(p.id, 3)
    cf.accept_contracts("a", p.id, True)
    with pytest.raises(DuplicateVote):
        cf.accept_contracts("a", p.id, False)
    cf.accept_contracts("b", p.id, False)
    with pytest.raises(WrongState):
        cf.accept_contracts("b", p.id, True)
    cf.publish_contracts(p.id, "plan-2", "reward-2")
    cf.accept_contracts("a", p.id, True)
    cf.accept_contracts("b", p.id, True)
    assert p.state == ProjectState.ACTIVE


def _active(tranches=("1/2", "1/2")):
    led, cf = market(["a", "b"])
    p = project(cf, tranches=tranches)
    cf.invest("a", p.id, 70, 0)
    cf.invest("b", p.id, 30, 0)
    cf.settle_at_deadline(p.id, 3)
    cf.accept_contracts("a", p.id, True)
    return led, cf, p


def test_tranches_release_in_order_and_convert_a_labor_share():
    led, cf, p = _active()
    with pytest.raises(OutOfOrderTranche):
        cf.release_tranche(p.id, 1)
    t = cf.release_tranche(p.id, 0)
    assert t.capital_converted == 5 and t.capital_released == 45 and led.balance("creator", L) == 5
    cf.release_tranche(p.id, 1)
    assert p.state == ProjectState.COMPLETED and led.balance("creator", C) == 90


def test_alerts_and_suspension_block_release():
    _, cf, p = _active()
    with pytest.raises(NotAFunder):
        cf.raise_alert("creator", p.id)
    cf.raise_alert("b", p.id)
    with pytest.raises(CouncilVoteRequired):
        cf.release_tranche(p.id, 0)
    approved, approval = cf.council_vote(p.id, {"b": True})
    assert not approved and approval == Fraction(3, 10)
    with pytest.raises(ProjectSuspended):
        cf.release_tranche(p.id, 0)
    assert cf.council_vote(p.id, {"a": True})[0]
    cf.release_tranche(p.id, 0)


def test_council_weights_blend_investment_and_governance():
    w = council_weights({"a": 60, "b": 40}, {"a": 0, "b": 10})
    assert w == {"a": Fraction(42, 100), "b": Fraction(58, 100)}
    assert council_weights({"a": 60, "b": 40}, {}) == {"a": Fraction(3, 5), "b": Fraction(2, 5)}


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 500), st.lists(st.integers(1, 200), max_size=4), st.lists(st.integers(1, 300), max_size=4),
       st.fractions(0, 1, max_denominator=10))
def test_settlement_reports_recheck_and_conserve(target, investments, pledges, m):
    investors = [f"i{k}" for k in range(len(investments))]
    pledgers = [f"e{k}" for k in range(len(pledges))]
    led, cf = market(investors, pledgers)
    p = project(cf, target=target, m=m)
    for who, amt in zip(investors, investments):
        try:
            cf.invest(who, p.id, amt, 0)
        except OverTarget:
            pass
    for who, amt in zip(pledgers, pledges):
        cf.pledge(who, p.id, amt)
    rep = cf.settle_at_deadline(p.id, 3).to_dict()
    assert settlement_violations(rep) == []
    assert not led.conservation_violations()
    assert all(v >= 0 for v in rep["labor_refunded"].values())


def test_settlement_checker_catches_tampering():
    rep = {"outcome": "failure", "target": 100, "raised": 40, "pledged": {"ev": 50},
           "labor_refunded": {"ev": 25}, "labor_burned": 25, "capital_returned": {"inv": 40}}
    assert settlement_violations(rep)
