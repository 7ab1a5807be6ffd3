import itertools
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import support
from dcc import econ
from dcc.errors import EmptyWindow, ParseError

PRISONERS = """\
# L C G
III 3 3 3
IIN 1 1 4
INI 1 4 1
NII 4 1 1
INN 0 2 2
NIN 2 0 2
NNI 2 2 0
NNN 1 1 1
"""


def test_parse_and_solve_a_social_dilemma():
    m = econ.parse_matrix(PRISONERS)
    assert m[("I", "I", "I")] == (3, 3, 3)
    assert econ.find_pure_nash(m) == [("N", "N", "N")]
    assert ("I", "I", "I") in econ.pareto_set(m) and ("N", "N", "N") not in econ.pareto_set(m)
    dev = econ.profitable_deviation(m, ("I", "I", "I"))
    assert dev.player == "L" and dev.to == ("N", "I", "I") and dev.gain == 1


def test_ties_count_as_equilibria():
    flat = econ.PayoffMatrix3({p: (0, 0, 0) for p in econ.PROFILES})
    assert econ.find_pure_nash(flat) == list(econ.PROFILES) == econ.pareto_set(flat)


@pytest.mark.parametrize("text, line", [
    ("", 1),
    ("III 1 2\n", 1),
    ("III 1 2 3\nXYZ 1 2 3\n", 2),
    ("III 1 2 3\nIII 1 2 3\n", 2),
    ("III 1 2 3\nIIN 1/0 2 3\n", 2),
    ("III 1 2 3\n", 1),
])
def test_matrix_errors_name_the_line(text, line):
    with pytest.raises(ParseError) as err:
        econ.parse_matrix(text)
    assert err.value.line == line


def test_matrix_accepts_commas_fractions_and_comments():
    text = "\n".join(f"{''.join(p)}, 1/2, -3, 0.25  # row" for p in econ.PROFILES)
    assert econ.parse_matrix(text)[("N", "N", "N")] == (Fraction(1, 2), -3, Fraction(1, 4))


def test_utility_condition_checker_finds_a_witness():
    grid = [econ.Allocation(Fraction(a, 4), Fraction(b, 4), 1 - Fraction(a + b, 4))
            for a in range(5) for b in range(5 - a)]
    star = econ.Allocation(Fraction(1, 4), Fraction(1, 4), Fraction(1, 2))

    def own(attr, peak):
        return lambda x: -abs(getattr(x, attr) - peak)

    good = {"C": own("X_C", Fraction(1, 4)), "L": own("X_L", Fraction(1, 4)), "G": own("X_G", Fraction(1, 2))}
    assert econ.check_utility_conditions(star, good, grid) == (True, None)
    bad = good | {"C": own("X_C", Fraction(3, 4))}
    ok, witness = econ.check_utility_conditions(star, bad, grid)
    assert not ok and witness[0] == "C"


def test_regulator_moves_against_the_signal_and_clamps():
    cfg = econ.RegulatorConfig(quota_gain=Fraction(1, 2), incentive_gain=Fraction(1, 2),
                               quota_bounds=(Fraction(1, 2), 2), incentive_bounds=(Fraction(1, 2), 2))
    s = econ.RegulatorState(config=cfg)
    low = econ.regulate(s, Fraction(1, 2))
    assert (low.labor_distribution_quota, low.supervision_incentive) == (Fraction(1, 2), Fraction(3, 2))
    assert econ.regulate(low, Fraction(1, 2)).supervision_incentive == 2
    assert econ.regulate(s, Fraction(4, 5)) is s
    high = econ.regulate(s, 1)
    assert (high.labor_distribution_quota, high.supervision_incentive) == (Fraction(3, 2), Fraction(1, 2))


@settings(max_examples=200, deadline=None)
@given(st.lists(st.fractions(0, 1, max_denominator=50), max_size=30))
def test_regulator_stays_within_bounds(ratios):
    s = econ.RegulatorState()
    cfg = s.config
    for r in ratios:
        s = econ.regulate(s, r)
        assert cfg.quota_bounds[0] <= s.labor_distribution_quota <= cfg.quota_bounds[1]
        assert cfg.incentive_bounds[0] <= s.supervision_incentive <= cfg.incentive_bounds[1]


def test_metrics_windows_match_a_rescan():
    events = support.tour().events
    tracker = econ.MetricsTracker()
    for ev in events:
        tracker.feed(ev)
    last = events[-1]["epoch"]
    for start, end in itertools.combinations_with_replacement(range(last + 1), 2):
        assert tracker.window(start, end) == econ.compute_metrics(events, start, end)
    with pytest.raises(EmptyWindow):
        tracker.window(3, 2)
    assert econ.valid_ratio(0, 0) == 1 and econ.valid_ratio(4, 1) == Fraction(3, 4)


def test_rate_converges_to_the_steady_rate():
    steady = Fraction(2)
    path = list(econ.rate_trajectory(econ.ExchangeRate(Fraction(1)), 10, econ.proportional_supply(10, steady), 40,
                                     quantum=Fraction(1, 10**6)))
    assert abs(path[-1].labor_per_capital - steady) < Fraction(1, 1000)
