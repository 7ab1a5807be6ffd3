import pytest

import support
from dcc.errors import (CreditTooLow, DuplicateVote, InsufficientBalance, IntervalOpen,
                        NotArbitral, NotTheTarget, UnknownCase, WrongState)
from dcc.ledger import TokenKind

L = TokenKind.LABOR


def setup(**params):
    eco = support.economy(["author", "reporter", "other"], **params)
    support.earn_labor(eco, "reporter")
    (cid,) = support.earn_labor(eco, "author")
    return eco, cid


def test_only_sitting_arbitral_nodes_vote_once_per_case():
    eco = support.economy(["author"])
    cid = eco.submit_content(creator="author", digest="d")["content"]
    with pytest.raises(NotArbitral):
        eco.cast_vote(voter="author", case=cid, verdict=True)
    eco.cast_vote(voter=support.PLATFORM, case=cid, verdict=True)
    with pytest.raises(DuplicateVote):
        eco.cast_vote(voter=support.PLATFORM, case=cid, verdict=False)
    with pytest.raises(IntervalOpen):
        eco.close_content_audit(content=cid)


def test_rejected_content_earns_nothing():
    eco = support.economy(["author"])
    cid = eco.submit_content(creator="author", digest="d")["content"]
    support.vote_all(eco, cid, False)
    eco.advance_epoch()
    assert eco.close_content_audit(content=cid)["accepted"] is False
    assert eco.ledger.balance("author", L) == 0


def test_tipoff_preconditions():
    eco, cid = setup()
    with pytest.raises(InsufficientBalance):
        eco.submit_tipoff(reporter="reporter", target_kind="content", target=cid, category="Plagiarism", deposit=1)
    with pytest.raises(InsufficientBalance):
        eco.submit_tipoff(reporter="other", target_kind="content", target=cid, category="Plagiarism", deposit=10)
    low, cid2 = setup(initial_credit=59)
    with pytest.raises(CreditTooLow):
        low.submit_tipoff(reporter="reporter", target_kind="content", target=cid2, category="Plagiarism", deposit=10)
    late, cid3 = setup(supervision={"challenge_window": 2})
    support.advance(late, 3)
    # past the challenge window the record is archived at the epoch boundary
    with pytest.raises(UnknownCase):
        late.submit_tipoff(reporter="reporter", target_kind="content", target=cid3, category="Plagiarism", deposit=10)


def test_dismissed_tipoff_refunds_the_deposit():
    eco, cid = setup()
    tid = eco.submit_tipoff(reporter="reporter", target_kind="content", target=cid,
                            category="Plagiarism", deposit=10)["tipoff"]
    assert eco.ledger.balance("reporter", L) == 40
    support.vote_all(eco, tid, False)
    eco.advance_epoch()
    assert eco.close_tipoff_audit(tipoff=tid)["state"] == "Dismissed"
    assert eco.ledger.balance("reporter", L) == 50
    assert eco.credit.score("acct:reporter") == 60


def test_only_the_accused_may_rebut_and_one_case_at_a_time():
    eco, cid = setup()
    tid = support.tipoff_to_arbitration(eco, "reporter", "content", cid)
    with pytest.raises(NotTheTarget):
        eco.submit_rebuttal(account="other", tipoff=tid, evidence="x")
    with pytest.raises(WrongState):
        eco.submit_tipoff(reporter="reporter", target_kind="content", target=cid, category="Plagiarism", deposit=10)
    with pytest.raises(IntervalOpen):
        eco.arbitrate(tipoff=tid)


def test_failed_rebuttal_upholds_the_report():
    eco, cid = setup()
    tid = support.tipoff_to_arbitration(eco, "reporter", "content", cid)
    eco.submit_rebuttal(account="author", tipoff=tid, evidence="weak")
    support.vote_all(eco, tid, False)
    eco.advance_epoch()
    out = eco.arbitrate(tipoff=tid)
    assert out["state"] == "Upheld" and out["reward_burned"] == 50
    assert eco.ledger.balance("reporter", L) == 50 + 20
    assert eco.credit.score("acct:author") == 45
    with pytest.raises(WrongState):
        eco.arbitrate(tipoff=tid)
