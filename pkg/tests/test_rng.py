from math import fsum

import numpy as np
import pytest

from catpoison.lattice import LEFT_FIRST, RIGHT_FIRST, ModelSpec
from catpoison.rng import MIXER_ID, derive_seed, derive_stream, joint_stream, run_metadata

SPEC = ModelSpec.equal_others(4, 0.47)


def draws(stream, count):
    out = [stream.next_arrival() for _ in range(count)]
    times = np.array([t for t, _, _ in out])
    types = np.array([g for _, g, _ in out])
    left = np.array([o == LEFT_FIRST for _, _, o in out])
    return times, types, left


def test_deterministic():
    a = derive_stream(123, 5, SPEC)
    b = derive_stream(123, 5, SPEC)
    assert a.state() == b.state()
    assert [a.next_arrival() for _ in range(20)] == [b.next_arrival() for _ in range(20)]


def test_seed_changes_stream():
    sa, sb = derive_stream(1, 0, SPEC), derive_stream(2, 0, SPEC)
    assert [sa.next_arrival()[0] for _ in range(10)] != [sb.next_arrival()[0] for _ in range(10)]


def test_times_increase_and_mean_gap():
    times, _, _ = draws(derive_stream(7, 3, SPEC), 100_000)
    assert np.all(np.diff(times) > 0)
    gaps = np.diff(np.concatenate([[0.0], times]))
    assert 0.99 <= gaps.mean() <= 1.01


def test_type_frequencies_chi_square():
    _, types, left = draws(derive_stream(11, 0, SPEC), 100_000)
    freq1 = np.mean(types == 1)
    assert 0.465 <= freq1 <= 0.475
    counts = np.bincount(types, minlength=5)[1:]
    expected = np.array(SPEC.rates) * len(types)
    chi2 = fsum((counts - expected) ** 2 / expected)
    assert chi2 < 16.27  # 3 degrees of freedom, 1e-3 level
    sigma = np.sqrt(0.25 / len(left))
    assert abs(left.mean() - 0.5) < 3 * sigma


def test_consume_always():
    s = derive_stream(5, 2, SPEC)
    s.next_arrival()
    s.next_arrival()
    assert s.k == 2


def test_infinite_fresh_identifiers():
    spec = ModelSpec.equal_others(float("inf"), 0.46)
    _, types, _ = draws(derive_stream(9, 4, spec), 20_000)
    others = types[types != 1]
    assert len(set(others.tolist())) == len(others)
    assert abs(np.mean(types == 1) - 0.46) < 0.015


def test_joint_stream_pairs():
    law = {(1, 1): 0.5, (2, 1): 0.5}
    s = joint_stream(3, 0, law)
    pairs = [s.next_arrival()[1] for _ in range(2000)]
    assert set(pairs) <= set(law)
    assert abs(pairs.count((1, 1)) / 2000 - 0.5) < 0.05


def test_sub_seeds_distinct_and_range():
    seeds = {derive_seed(0, i) for i in range(1000)}
    assert len(seeds) == 1000
    with pytest.raises(ValueError):
        derive_stream(-1, 0, SPEC)


def test_metadata_names_mixer():
    meta = run_metadata(5, SPEC)
    assert meta["mixer"] == MIXER_ID and meta["seed"] == 5
