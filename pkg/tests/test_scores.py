import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from catpoison import scores
from catpoison.lattice import INFINITE
from catpoison.scores import (
    PESSIMISTIC,
    TABLE1,
    DriftSystem,
    ScoreTable,
    SolverConfig,
    block_str,
    canonicalize,
    drift,
    enumerate_blocks,
    enumerate_followers,
    fixed_point_solve,
    reference_block,
    table1,
    threshold_search,
    verify_certificate,
    worst_case_drift,
)

from oracles import brute_force_blocks

P2 = 0.53 / 3


class TestBlocks:
    def test_canonicalize_examples(self):
        assert canonicalize("030") == (0, 2, 0)
        assert canonicalize("304") == (2, 0, 3)
        assert canonicalize("000") == (0, 0, 0)

    def test_canonicalize_rejects_clash(self):
        with pytest.raises(ValueError):
            canonicalize("023")

    def test_length_one(self):
        assert enumerate_blocks(1, 3) == [(0,), (1,), (2,)]

    @pytest.mark.parametrize("L,n", [(2, 3), (3, 2), (3, 4), (4, 3), (4, 5)])
    def test_matches_brute_force(self, L, n):
        assert enumerate_blocks(L, n) == brute_force_blocks(L, n)

    def test_closed_under_canonicalize(self):
        for b in enumerate_blocks(5, 4):
            assert canonicalize(b) == b

    def test_infinite_variant_blocks(self):
        # distinct molecules are never adjacent and never repeat
        assert enumerate_blocks(2, INFINITE) == [(0, 0), (0, 1), (0, 2), (1, 0), (1, 1), (2, 0)]
        for b in enumerate_blocks(4, INFINITE):
            labels = [s for s in b if s > 1]
            assert len(labels) == len(set(labels))

    def test_reference_block(self):
        assert reference_block(enumerate_blocks(3, 4)) == (2, 2, 2)
        assert reference_block(enumerate_blocks(2, INFINITE)) == (2, 0)

    def test_score_table_lookup_canonicalizes(self):
        t = table1()
        assert t.score("304") == t.score("203") == 0.339
        with pytest.raises(KeyError):
            ScoreTable(3, {"222": 0.0}).score("000")


class TestDrift:
    def test_reference_block_closed_form(self):
        t = table1()
        expected = 0.47 * t["022"] + P2 * (-2 + 3 * t["022"])
        assert drift("222", t, 0.47, 4, "2").value == pytest.approx(expected, abs=1e-12)

    def test_degenerate_gas_one_only(self):
        z = ScoreTable.zeros(3, 4)
        assert drift("000", z, 1.0, 4, "2").value == pytest.approx(1.0)

    @pytest.mark.parametrize("block", sorted(TABLE1))
    def test_per_site_worst_case_reproduces_published_column(self, block):
        # the published drift column equals the per-site worst case
        got = worst_case_drift(block, table1(), 0.47, 4, 6, mode="termwise").value
        assert got == pytest.approx(TABLE1[block][1], abs=1e-4)

    def test_mixed_follower_list(self):
        assert drift("101", table1(), 0.47, 4, "00,02").value == pytest.approx(0.0056, abs=1e-4)

    def test_breakdown_sums(self):
        rep = drift("110", table1(), 0.47, 4, "222")
        assert math.fsum(rep.breakdown.values()) == pytest.approx(rep.value)
        assert set(rep.breakdown) == set(range(0, 5))

    def test_invalid_scenario(self):
        with pytest.raises(ValueError):
            drift("222", table1(), 0.47, 4, "3")
        with pytest.raises(ValueError):
            drift("203", table1(), 0.47, 2, "0")

    def test_value_completion_too_short(self):
        with pytest.raises(ValueError):
            drift("000", table1(), 0.47, 4, "", completion=())

    def test_infinite_variant_drift_finite(self):
        t = ScoreTable(2, {b: 0.1 * i for i, b in enumerate(enumerate_blocks(2, INFINITE))})
        for b in t.scores:
            assert math.isfinite(worst_case_drift(b, t, 0.46, INFINITE, 5).value)


@st.composite
def block_and_scenario(draw):
    block = draw(st.sampled_from(enumerate_blocks(3, 4)))
    scen = draw(st.sampled_from(enumerate_followers(block, 5, 4)))
    return block, scen


@settings(max_examples=60, deadline=None)
@given(bs=block_and_scenario(), extra=st.lists(st.sampled_from([0, 1, 2]), min_size=0, max_size=6),
       p1=st.floats(0.3, 0.7))
def test_pessimistic_lower_bounds_value_completion(bs, extra, p1):
    block, scen = bs
    t = table1()
    tail = (0,) * 6
    full = tuple(scen) + tuple(extra)
    try:
        exact = drift(block, t, p1, 4, full, completion=tail).value
    except ValueError:
        return  # extra symbols clash with the scenario
    short = drift(block, t, p1, 4, scen).value
    assert short <= exact + 1e-12


@settings(max_examples=40, deadline=None)
@given(bs=block_and_scenario(), p1=st.floats(0.2, 0.9))
def test_worst_case_below_every_follower(bs, p1):
    block, scen = bs
    t = table1()
    for mode in ("joint", "termwise"):
        assert worst_case_drift(block, t, p1, 4, 5, mode).value <= drift(block, t, p1, 4, scen).value + 1e-12


@pytest.mark.parametrize("block", ["000", "101", "222", "111"])
def test_affine_in_own_score_with_negative_slope(block):
    t = table1()
    scen = "0222"
    base = drift(block, t, 0.47, 4, scen).value
    slopes = []
    for h in (0.1, 0.2):
        bumped = ScoreTable(3, {**t.to_dict(), block: t[block] + h})
        slopes.append((drift(block, bumped, 0.47, 4, scen).value - base) / h)
    assert slopes[0] < 0
    assert slopes[0] == pytest.approx(slopes[1], abs=1e-12)


class TestWorstCase:
    def test_argmin_prefixes(self):
        t = table1()
        assert block_str(worst_case_drift("001", t, 0.47, 4).scenario).startswith("00")
        assert block_str(worst_case_drift("111", t, 0.47, 4).scenario).startswith("0222")

    def test_followers_cover_determining_prefixes(self):
        fs = enumerate_followers("111", 6, 4)
        assert all(1 <= len(f) <= 6 for f in fs)
        assert fs == sorted(fs)

    def test_mode_validation(self):
        with pytest.raises(ValueError):
            worst_case_drift("000", table1(), 0.47, 4, mode="other")


class TestCertificate:
    def test_zero_scores_negative(self):
        assert verify_certificate(0.47, 4, 3, ScoreTable.zeros(3, 4)).verdict == "NEGATIVE"

    def test_gas_one_only_positive(self):
        assert verify_certificate(1.0, 4, 3, table1()).verdict == "POSITIVE"

    def test_worst_case_above_published_minimum(self):
        cert = verify_certificate(0.47, 4, 3, table1())
        floor = min(v[1] for v in TABLE1.values()) - 2e-3
        assert all(w.value >= floor for w in cert.worst.values())

    def test_json_stable(self):
        cert = verify_certificate(0.47, 4, 3, table1())
        doc = json.loads(cert.to_json())
        assert doc["verdict"] == "POSITIVE"
        assert doc["K"] == 6 and doc["completion"] == PESSIMISTIC
        assert list(doc["scores"]) == sorted(doc["scores"])
        assert cert.to_json() == verify_certificate(0.47, 4, 3, table1()).to_json()

    def test_incomplete_table_rejected(self):
        with pytest.raises(ValueError):
            verify_certificate(0.47, 4, 3, ScoreTable(3, {"222": 0.0}))


class TestSolver:
    def test_config_validation(self):
        with pytest.raises(ValueError):
            SolverConfig(3, 4, 0.47, tol=0)
        with pytest.raises(ValueError):
            SolverConfig(3, 4, 0.47, K=3)

    @pytest.mark.parametrize("mode", ["joint", "termwise"])
    def test_compiled_system_matches_direct(self, mode):
        system = DriftSystem(3, 4, 6)
        t = table1()
        compiled = system.evaluate(t.vector(system.blocks), 0.47, mode)
        direct = [worst_case_drift(b, t, 0.47, 4, 6, mode).value for b in system.blocks]
        assert np.allclose(compiled, direct, atol=1e-13)

    def test_gas_one_only(self):
        t, rep = fixed_point_solve(SolverConfig(3, 4, 1.0))
        assert rep.converged
        assert all(math.isfinite(v) for v in t.scores.values())
        assert scores.test_reference_block(t, 1.0, 4) > 0

    def test_residuals_vanish_off_reference(self):
        t, rep = fixed_point_solve(SolverConfig(3, 4, 0.47, tol=1e-11))
        assert rep.converged
        assert all(abs(v) < 1e-8 for k, v in rep.residuals.items() if k != "222")
        assert t["222"] == 0.0

    def test_sub_threshold_reference_negative(self):
        for p1 in (0.40, 0.30):
            t, _ = fixed_point_solve(SolverConfig(3, 4, p1))
            assert scores.test_reference_block(t, p1, 4) < 0

    def test_published_scores_are_the_fixed_point_near_04685(self):
        t, rep = fixed_point_solve(SolverConfig(3, 4, 0.4685, tol=1e-10))
        assert rep.converged
        published = table1()
        assert max(abs(t.scores[b] - published.scores[b]) for b in t.scores) < 1e-3

    def test_damping_reaches_same_point(self):
        a, _ = fixed_point_solve(SolverConfig(3, 4, 0.5, tol=1e-11))
        b, _ = fixed_point_solve(SolverConfig(3, 4, 0.5, tol=1e-11, damping=0.5, max_iter=50_000))
        assert np.allclose(a.vector(sorted(a.scores)), b.vector(sorted(a.scores)), atol=1e-8)


def test_reference_block_examples():
    assert scores.test_reference_block(table1(), 0.47, 4) == pytest.approx(0.0007, abs=5e-4)
    assert not scores.test_reference_block(ScoreTable.zeros(3, 4), 1.0, 4) > 0


class TestThreshold:
    def test_tolerance_floor(self):
        with pytest.raises(ValueError):
            threshold_search(4, 3, tol=1e-5)

    def test_certificate_persists_above_threshold(self):
        res = threshold_search(4, 3)
        assert res.certificate.verdict == "POSITIVE"
        assert res.p1_fixed_point <= res.p1_star
        for p1 in np.arange(res.p1_star, 0.6, 0.01):
            assert verify_certificate(float(p1), 4, 3, res.table, 6, "termwise").verdict == "POSITIVE"

    def test_history_brackets(self):
        res = threshold_search(INFINITE, 2)
        stage1 = [h for h in res.history if h["stage"] == 1]
        assert any(h["pass"] for h in stage1) and any(not h["pass"] for h in stage1)

    @pytest.mark.slow
    def test_three_gases_length6(self):
        assert threshold_search(3, 6).p1_star <= 0.447
