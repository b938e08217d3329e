import math

import pytest

from catpoison.coupling import (
    COUNTEREXAMPLE_LAW,
    CoupledState,
    JointArrivalLaw,
    coupled_absorption,
    coupled_arrival,
    golden_script,
    load_script,
    monotonicity_check,
    replay,
    violation_frequency,
)
from catpoison.lattice import LEFT_FIRST, RIGHT_FIRST, Boundary
from catpoison.simulate import estimate_absorption


def test_law_marginals():
    assert COUNTEREXAMPLE_LAW.marginal(0) == pytest.approx((1 / 3, 1 / 3, 1 / 3))
    assert COUNTEREXAMPLE_LAW.marginal(1) == pytest.approx((1 / 2, 1 / 4, 1 / 4))


def test_law_validation():
    with pytest.raises(ValueError):
        JointArrivalLaw({(1, 1): 0.5, (2, 2): 0.4})
    with pytest.raises(ValueError):
        JointArrivalLaw({(0, 1): 1.0})


def test_first_step():
    s = coupled_arrival(CoupledState.vacant(10), 4, (2, 1))
    assert str(s) == "0000200000,0000100000"


def test_noop_in_both():
    s = CoupledState.parse("0030,0030")
    assert coupled_arrival(s, 2, (3, 3)) == s


def test_shared_ordering():
    s = CoupledState.parse("103,103")
    assert str(coupled_arrival(s, 1, (2, 2), LEFT_FIRST)) == "003,003"
    assert str(coupled_arrival(s, 1, (2, 2), RIGHT_FIRST)) == "100,100"


def test_pair_outside_support():
    with pytest.raises(ValueError):
        coupled_arrival(CoupledState.vacant(3), 0, (1, 2), law=COUNTEREXAMPLE_LAW)


def test_empty_replay():
    assert replay([], size=5) == [CoupledState.vacant(5)]


def test_script_parsing():
    events = load_script(text="# comment\n4 2 1 L\n5 1 1 r\n")
    assert [e.site for e in events] == [4, 5]
    assert events[1].order == RIGHT_FIRST
    with pytest.raises(ValueError):
        load_script(text="4 2 1\n")
    assert len(golden_script()) == 6


def test_monotonicity_check():
    assert monotonicity_check(CoupledState.parse("0000010000,0003003000")) == [5]
    assert monotonicity_check(CoupledState.parse("0110,0110")) == []
    assert monotonicity_check(CoupledState.parse("0000,1111")) == []


def test_violations_happen_under_example_law():
    assert violation_frequency(COUNTEREXAMPLE_LAW, 32, 50.0, 20, seed=1) > 0


def test_identical_systems_never_violate():
    law = JointArrivalLaw({(1, 1): 0.4, (2, 2): 0.3, (3, 3): 0.3})
    assert violation_frequency(law, 16, 20.0, 10, seed=2) == 0.0


def test_zero_runs_rejected():
    with pytest.raises(ValueError):
        violation_frequency(COUNTEREXAMPLE_LAW, 8, 1.0, 0, seed=0)


def test_marginal_fidelity():
    # coordinate A of the coupling must absorb like a lone system with A's rates
    runs = 400
    size = 6
    joint = coupled_absorption(COUNTEREXAMPLE_LAW, size, runs, seed=77)
    single = estimate_absorption(COUNTEREXAMPLE_LAW.spec(0), size, Boundary.BLOCKED, runs, seed=78)
    fa = float((joint[:, 0] == 1).mean())
    fs = single.frequency(1)
    p = 0.5 * (fa + fs)
    sigma = math.sqrt(2 * p * (1 - p) / runs)
    assert abs(fa - fs) <= 3 * sigma
