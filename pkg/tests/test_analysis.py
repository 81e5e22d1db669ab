import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gentensor.analysis import (
    approx_gap,
    numerical_rank,
    rank_combination_test,
    rank_histogram,
    trial_rng,
)


def test_rank_examples():
    assert numerical_rank(np.eye(3)).rank == 3
    assert numerical_rank(np.ones((4, 4))).rank == 1
    assert numerical_rank(2 * np.ones((4, 4)) - np.eye(4)).rank == 4
    assert numerical_rank(np.zeros((3, 2))).rank == 0


def test_rank_rejects_nan():
    with pytest.raises(ValueError):
        numerical_rank(np.array([[np.nan]]))


def test_approx_gap_examples():
    assert approx_gap(np.diag([3.0, 2.0, 1.0]), 1) == pytest.approx(5.0)
    m = np.random.default_rng(0).normal(size=(5, 3)) @ np.random.default_rng(1).normal(size=(3, 5))
    assert approx_gap(m, numerical_rank(m).rank) <= 1e-20


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 6), st.integers(1, 6), st.integers(0, 2**31))
def test_rank_of_product_bounded(a, b, seed):
    rng = np.random.default_rng(seed)
    k = min(a, b)
    m = rng.normal(size=(a, k)) @ rng.normal(size=(k, b))
    r = numerical_rank(m).rank
    assert r <= k
    assert approx_gap(m, r) <= 1e-18 * max(1.0, np.sum(m**2))


def test_trial_rng_independent_of_order():
    a = trial_rng(42, 7).uniform(size=3)
    trial_rng(42, 3).uniform(size=100)
    np.testing.assert_array_equal(trial_rng(42, 7).uniform(size=3), a)
    assert not np.array_equal(trial_rng(42, 8).uniform(size=3), a)


def test_histogram_product_complete():
    h = rank_histogram(2, 2, [2], 100, 42, "product")
    assert h.bins.get(4, 0) >= 99


def test_histogram_relu_sum_ceiling():
    h = rank_histogram(3, 2, [3], 50, 1, "relu-sum")
    assert max(h.ranks) <= 2 * 2 ** (8 // 4)


def test_histogram_deterministic_across_jobs():
    a = rank_histogram(2, 3, [2], 40, 5, "relu-max", jobs=1)
    b = rank_histogram(2, 3, [2], 40, 5, "relu-max", jobs=2)
    assert a.to_csv() == b.to_csv()
    assert a.spectra_csv() == b.spectra_csv()


def test_histogram_csv_layout():
    h = rank_histogram(2, 2, [2], 5, 0, "product")
    lines = h.to_csv().splitlines()
    assert lines[0] == "# levels=2" and "rank,count" in lines
    assert sum(int(x.split(",")[1]) for x in lines[lines.index("rank,count") + 1 :]) == 5


def test_histogram_rejects_zero_trials():
    with pytest.raises(ValueError):
        rank_histogram(2, 2, [2], 0, 0)


def test_combination_examples():
    res = rank_combination_test([np.eye(2), np.ones((2, 2))], 50, 0)
    assert res.passed and res.target_rank == 2
    assert rank_combination_test([np.diag([1.0, 2.0, 0.0])], 10, 0).min_rank == 2
    rng = np.random.default_rng(3)
    mats = [rng.normal(size=(4, r)) @ rng.normal(size=(r, 4)) for r in (1, 2, 3)]
    res = rank_combination_test(mats, 200, 1)
    assert res.passed and res.min_rank >= 3
