from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dcc.errors import (DuplicateAccount, InsufficientBalance, InvalidMintReason, NonTransferableKind,
                        UnknownAccount, ZeroAmount, ZeroPhases)
from dcc.ledger import ExchangeRate, Ledger, MintReason, TokenKind, update_rate

C, L, G = TokenKind.CAPITAL, TokenKind.LABOR, TokenKind.GOVERNANCE


def fresh(*accounts, rate=Fraction(1), param=Fraction(1)) -> Ledger:
    led = Ledger(ExchangeRate(rate), param)
    for a in accounts:
        led.open_account(a)
    return led


def test_accounts_and_deposits():
    led = fresh("a")
    with pytest.raises(DuplicateAccount):
        led.open_account("a")
    with pytest.raises(UnknownAccount):
        led.deposit_capital("b", 5)
    with pytest.raises(ZeroAmount):
        led.deposit_capital("a", 0)
    led.deposit_capital("a", 5)
    assert led.balance("a", C) == 5
    assert led.take_effects() == [["acct:a", "capital", 5], ["minted", "capital", 5]]


def test_labor_only_minted_for_listed_reasons():
    led = fresh("a")
    with pytest.raises(InvalidMintReason):
        led.mint_labor("a", 5, "because")
    led.mint_labor("a", 5, MintReason.CONTENT_REWARD)
    assert led.balance("a", L) == 5


def test_labor_to_capital_floors_toward_the_account_and_burns_the_rest():
    led = fresh("a", rate=Fraction(3))
    led.mint_labor("a", 10, MintReason.CONTENT_REWARD)
    led.take_effects()
    assert led.convert_labor_to_capital("a", 10) == 3
    assert led.balance("a", L) == 0 and led.balance("a", C) == 3
    assert not led.conservation_violations()


def test_transfer_only_moves_capital():
    led = fresh("a", "b")
    led.deposit_capital("a", 10)
    led.transfer("a", "b", C, 4)
    assert (led.balance("a", C), led.balance("b", C)) == (6, 4)
    for kind in (L, G):
        with pytest.raises(NonTransferableKind):
            led.transfer("a", "b", kind, 1)
    with pytest.raises(InsufficientBalance):
        led.transfer("a", "b", C, 100)


def test_gas_feeds_the_labor_pool_not_the_payer():
    led = fresh("a", rate=Fraction(2))
    led.deposit_capital("a", 10)
    led.take_effects()
    assert led.pay_gas("a", 3) == 6
    fx = led.take_effects()
    assert ["pool:labor", "labor", 6] in fx and ["burned", "capital", 3] in fx
    assert led.balance("a", L) == 0


def test_phased_conversion_freezes_the_parameter():
    led = fresh("a", param=Fraction(1))
    led.mint_labor("a", 10, MintReason.CONTENT_REWARD)
    with pytest.raises(ZeroPhases):
        led.start_governance_conversion("a", 5, 0)
    led.start_governance_conversion("a", 10, 3)
    led.governance_parameter = Fraction(5)
    for _ in range(3):
        led.advance_epoch()
    assert led.balance("a", G) == 10 and led.balance("a", L) == 0


def test_governance_to_labor_is_immediate():
    led = fresh("a")
    led.mint_labor("a", 6, MintReason.CONTENT_REWARD)
    led.start_governance_conversion("a", 6, 1)
    led.advance_epoch()
    assert led.convert_governance_to_labor("a", 4) == 4
    assert led.balance("a", L) == 4 and led.balance("a", G) == 2


def test_escrow_round_trip_and_burn():
    led = fresh("a")
    led.mint_labor("a", 10, MintReason.CONTENT_REWARD)
    led.open_escrow("e", L)
    led.escrow_in("a", "e", 7)
    led.escrow_out("e", "a", 2)
    led.escrow_burn("e", 5)
    led.close_escrow("e")
    assert led.balance("a", L) == 5 and led.burned[L] == 5
    assert not led.conservation_violations()


def test_burn_balance_reports_what_it_could_take():
    led = fresh("a")
    led.mint_labor("a", 3, MintReason.CONTENT_REWARD)
    assert led.burn_balance("a", L, 10) == 3
    assert led.balance("a", L) == 0


def test_rate_moves_against_imbalance_and_clamps():
    r = ExchangeRate(Fraction(1))
    assert update_rate(r, 2, 1).labor_per_capital > 1
    assert update_rate(r, 1, 2).labor_per_capital < 1
    assert update_rate(r, 1, 1).labor_per_capital == 1
    assert update_rate(ExchangeRate(Fraction(99)), 10, 1).labor_per_capital == 100
    with pytest.raises(ValueError):
        update_rate(r, 0, 1)


ops = st.lists(st.tuples(st.sampled_from(["mint", "deposit", "l2c", "gas", "gov", "back", "tick", "xfer"]),
                         st.sampled_from("ab"), st.integers(1, 50)), max_size=40)


@settings(max_examples=150, deadline=None)
@given(ops, st.fractions(min_value=Fraction(1, 7), max_value=7, max_denominator=20))
def test_conservation_holds_under_any_operation_sequence(seq, rate):
    led = fresh("a", "b", rate=rate, param=Fraction(3, 4))
    for op, acct, n in seq:
        try:
            {"mint": lambda: led.mint_labor(acct, n, MintReason.CONTENT_REWARD),
             "deposit": lambda: led.deposit_capital(acct, n),
             "l2c": lambda: led.convert_labor_to_capital(acct, n),
             "gas": lambda: led.pay_gas(acct, n),
             "gov": lambda: led.start_governance_conversion(acct, n, 1 + n % 4),
             "back": lambda: led.convert_governance_to_labor(acct, n),
             "tick": led.advance_epoch,
             "xfer": lambda: led.transfer(acct, "b" if acct == "a" else "a", C, n)}[op]()
        except (InsufficientBalance, ZeroAmount):
            pass
        assert not led.conservation_violations()
        for kind in TokenKind:
            assert led.minted[kind] - led.burned[kind] == led.holdings(kind)
            assert all(led.balance(x, kind) >= 0 for x in "ab")
