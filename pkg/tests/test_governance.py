from collections import Counter
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import support
from dcc.apportion import largest_remainder, quotas
from dcc.credit import CreditBook
from dcc.errors import (EmptyParty, NoEligibleParties, NotChief, NotSenatorial, OutOfBounds, QuorumNotMet,
                        RoleCountMismatch)
from dcc.governance import (Nomination, Role, allocate_seats, assign_roles, elect, epoch_seed,
                            reserved_arbitral_seats, select_members)

SEED = epoch_seed("ab" * 32, 3)


@settings(max_examples=300, deadline=None)
@given(st.dictionaries(st.text("xyz", min_size=1, max_size=3), st.integers(0, 10**6), min_size=1, max_size=6),
       st.integers(0, 50))
def test_largest_remainder_sums_and_stays_within_one_of_quota(weights, total):
    if sum(weights.values()) == 0:
        with pytest.raises(ValueError):
            largest_remainder(weights, total)
        return
    shares = largest_remainder(weights, total)
    assert sum(shares.values()) == total
    q = quotas(weights, total)
    assert all(abs(shares[k] - q[k]) < 1 for k in weights)


def test_remainder_ties_go_to_the_smaller_id():
    assert allocate_seats({"p2": 1, "p1": 1, "p3": 1}, 2) == {"p1": 1, "p2": 1, "p3": 0}
    with pytest.raises(NoEligibleParties):
        allocate_seats({"p1": 0}, 3)


def test_assign_roles_partitions_every_seat():
    seats = [("a", 0), ("a", 1), ("b", 0), ("c", 0)]
    plan = assign_roles(seats, SEED, 1, 1, 2)
    assert sorted((p, j) for p, j, _ in plan) == sorted(seats)
    assert Counter(r for *_, r in plan) == {Role.CHIEF: 1, Role.SENATORIAL: 1, Role.ARBITRAL: 2}
    with pytest.raises(RoleCountMismatch):
        assign_roles(seats, SEED, 1, 1, 1)


def test_selection_is_order_independent_and_respects_excludes():
    a = select_members("p", ["m1", "m2", "m3"], 3, SEED)
    assert a == select_members("p", ["m3", "m1", "m2"], 3, SEED)
    assert "m1" not in select_members("p", ["m1", "m2"], 4, SEED, exclude=["m1"])
    assert select_members("p", ["m1"], 1, SEED, exclude=["m1"]) == ["m1"]
    with pytest.raises(EmptyParty):
        select_members("p", [], 1, SEED)


def test_election_reserves_platform_arbitral_seats():
    asm = elect({"p": ["a", "b", "c"]}, {"p": 90}, SEED, 0, 1, 1, 3,
                platform_nodes=["plat-0"], reserved_arbitral=reserved_arbitral_seats(Fraction(1, 2), 3))
    assert reserved_arbitral_seats(Fraction(1, 2), 3) == 2
    assert [s.holder for s in asm.seats_of(Role.ARBITRAL)].count("plat-0") == 2
    assert len(asm.seats) == 5


def test_nomination_boost_only_touches_arbitral_seats():
    members = {"p": [f"m{i}" for i in range(6)]}
    nom = Nomination(0, ("m0",), Fraction(10**6))
    asm = elect(members, {"p": 10}, SEED, 0, 0, 0, 1, nomination=nom)
    assert asm.holders(Role.ARBITRAL) == ["m0"]
    plain = elect(members, {"p": 10}, SEED, 0, 1, 0, 0)
    assert elect(members, {"p": 10}, SEED, 0, 1, 0, 0, nomination=nom).holders(Role.CHIEF) == plain.holders(Role.CHIEF)


def test_weighted_tickets_favour_big_holders():
    wins = Counter(select_members("p", ["big", "small"], 1, epoch_seed("00" * 32, e),
                                  weights={"big": 9, "small": 1})[0] for e in range(2000))
    assert 0.85 < wins["big"] / 2000 < 0.95


def _governed():
    eco = support.tour()
    gov = eco.governance
    return eco, gov, gov.assembly.holders(Role.CHIEF)[0], gov.assembly.holders(Role.SENATORIAL)[0]


def test_powers_are_role_gated():
    eco, gov, chief, senator = _governed()
    outsider = next(a for a in eco.ledger.accounts() if not gov.roles_of(a))
    with pytest.raises(NotChief):
        gov.nominate(outsider, ["erin"], 2, eco.epoch)
    with pytest.raises(OutOfBounds):
        gov.nominate(chief, ["erin"], 1, eco.epoch)
    with pytest.raises(NotSenatorial):
        gov.amend_rules(outsider, {"audit_threshold": "2/3"}, {})
    with pytest.raises(QuorumNotMet):
        gov.amend_rules(senator, {"audit_threshold": "2/3"}, {})
    with pytest.raises(OutOfBounds):
        gov.adjust_incentive_pool(chief, "3/2")


def test_platform_share_decays_to_zero():
    eco, gov, *_ = _governed()
    shares = [gov.phase_down_platform() for _ in range(40)]
    assert all(b <= a for a, b in zip(shares, shares[1:])) and shares[-1] == 0


def test_credit_is_clamped_and_records_applied_delta():
    book = CreditBook(95)
    assert book.adjust("acct:a", 10, "up", 0) == 5
    assert book.adjust("acct:a", -200, "down", 1) == -100
    assert book.score("acct:a") == 0 and book.score("acct:new") == 95
    assert book.take_changes() == [["acct:a", 100, 5, "up"], ["acct:a", 0, -100, "down"]]
    assert book.take_changes() == []
    with pytest.raises(ValueError):
        CreditBook(101)
