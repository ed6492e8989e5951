from __future__ import annotations

import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.random import Philox
from scipy.stats import mannwhitneyu

from oplab.numerics import (
    RandomStream,
    _philox_blocks,
    median,
    random_orthogonal,
    rank_sum_test,
    words_to_gaussian,
    words_to_uniform,
)


def test_philox_core_matches_numpy_reference():
    rng = np.random.default_rng(0)
    for _ in range(5):
        key = tuple(int(x) for x in rng.integers(0, 2**64, 2, dtype=np.uint64))
        salt = tuple(int(x) for x in rng.integers(0, 2**64, 3, dtype=np.uint64))
        start = int(rng.integers(0, 2**32))
        blocks = np.arange(start, start + 7, dtype=np.uint64)
        mine = _philox_blocks(blocks, salt, key)
        ref = []
        for block in blocks:
            bits = Philox(counter=[int(block), *salt], key=list(key))
            ref.extend(int(x) for x in bits.random_raw(4))
        assert mine.tolist() == ref


@given(st.integers(0, 2**32), st.integers(0, 41), st.integers(0, 41))
def test_words_continuation_is_stateless(seed, n1, n2):
    s = RandomStream(seed)
    a = np.concatenate([s.words(n1), s.words(n2)])
    b = RandomStream(seed).words(n1 + n2)
    assert np.array_equal(a, b)
    assert s.draws_taken == n1 + n2


@given(st.integers(0, 2**32))
def test_same_seed_same_sequence_different_seed_different(seed):
    a = RandomStream(seed).words(16)
    b = RandomStream(seed).words(16)
    c = RandomStream(seed + 1).words(16)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_split_matches_explicit_path_and_leaves_parent_alone():
    parent = RandomStream(7, ("x",))
    before = parent.draws_taken
    child = parent.split("gen")
    assert parent.draws_taken == before
    assert np.array_equal(child.words(8), RandomStream(7, ("x", "gen")).words(8))
    grand = child.split(("trial", 3))
    assert np.array_equal(grand.words(4), RandomStream(7, ("x", "gen", ("trial", 3))).words(4))


def test_split_labels_reject_non_hashable_kinds():
    s = RandomStream(0)
    with pytest.raises(TypeError):
        s.split(1.5)
    with pytest.raises(TypeError):
        s.split(True)
    with pytest.raises(TypeError):
        RandomStream(0, ([1],))


def test_snapshot_restore_replays_exactly():
    s = RandomStream(11)
    s.uniform(5)
    mark = s.snapshot()
    first = s.gaussian((2, 3))
    s.restore(mark)
    second = s.gaussian((2, 3))
    assert np.array_equal(first, second)
    assert s.draws_taken == mark + 6


def test_draw_word_accounting_is_one_word_per_draw():
    s = RandomStream(3)
    s.uniform((3, 4))
    assert s.draws_taken == 12
    s.gaussian(5)
    assert s.draws_taken == 17
    s.integers(10, (2, 2))
    assert s.draws_taken == 21
    s.uniform()
    assert s.draws_taken == 22


def test_scalar_draws_return_python_floats_and_ints():
    s = RandomStream(5)
    assert isinstance(s.uniform(), float)
    assert isinstance(s.gaussian(), float)
    assert isinstance(s.integers(4), int)


def test_words_to_helpers_match_draw_methods():
    w = RandomStream(13).words(64)
    s = RandomStream(13)
    assert np.array_equal(words_to_uniform(w), s.uniform(64))
    s2 = RandomStream(13)
    assert np.array_equal(words_to_gaussian(w), s2.gaussian(64))


@given(st.integers(0, 2**20))
def test_uniform_range_and_gaussian_finiteness(seed):
    s = RandomStream(seed)
    u = s.uniform(64)
    z = s.gaussian(64)
    assert np.all((u >= 0.0) & (u < 1.0))
    assert np.all(np.isfinite(z))


def test_integers_cover_range_and_respect_bound():
    s = RandomStream(2)
    draws = s.integers(5, 2000)
    assert set(np.unique(draws)) == {0, 1, 2, 3, 4}
    assert np.array_equal(RandomStream(9).integers(1, 50), np.zeros(50, dtype=np.int64))
    with pytest.raises(ValueError):
        s.integers(0)


def test_uniform_moments_are_sane():
    u = RandomStream(123).uniform(200_000)
    assert abs(u.mean() - 0.5) < 5e-3
    assert abs(u.var() - 1.0 / 12.0) < 5e-3
    z = RandomStream(321).gaussian(200_000)
    assert abs(z.mean()) < 1e-2
    assert abs(z.var() - 1.0) < 1e-2


@given(st.integers(1, 12), st.integers(0, 2**20))
@settings(max_examples=30)
def test_random_orthogonal_is_orthogonal(dim, seed):
    q = random_orthogonal(dim, RandomStream(seed))
    assert np.allclose(q.T @ q, np.eye(dim), atol=1e-10)


def test_random_orthogonal_is_deterministic_and_guards_dimension():
    a = random_orthogonal(6, RandomStream(4, ("m",)))
    b = random_orthogonal(6, RandomStream(4, ("m",)))
    assert np.array_equal(a, b)
    with pytest.raises(ValueError):
        random_orthogonal(0, RandomStream(0))


def test_median_conventions():
    assert median([3.0, 1.0, 2.0]) == 2.0
    assert median([4.0, 1.0, 2.0, 3.0]) == 2.5
    with pytest.raises(ValueError):
        median([])


def test_rank_sum_identical_samples_are_similar_with_p_one():
    a = [1.0, 2.0, 3.0, 4.0]
    verdict = rank_sum_test(a, a)
    assert verdict.p_value == 1.0
    assert verdict.decision == "similar"


def test_rank_sum_hand_computed_exact_cases():
    # Fully separated 3 vs 3: W = 6, two-sided p = 2 / C(6,3) = 0.1.
    v = rank_sum_test([1.0, 2.0, 3.0], [4.0, 5.0, 6.0])
    assert v.statistic == 6.0
    assert math.isclose(v.p_value, 0.1)
    assert v.decision == "similar"
    # Fully separated 5 vs 5: p = 2 / C(10,5) < 0.05, first sample better.
    v = rank_sum_test([1, 2, 3, 4, 5], [6, 7, 8, 9, 10])
    assert math.isclose(v.p_value, 2.0 / 252.0)
    assert v.decision == "better"
    assert rank_sum_test([6, 7, 8, 9, 10], [1, 2, 3, 4, 5]).decision == "worse"


def test_rank_sum_requires_three_per_sample():
    with pytest.raises(ValueError):
        rank_sum_test([1.0, 2.0], [3.0, 4.0, 5.0])


def _brute_force_two_sided_p(a, b):
    pooled = np.concatenate([a, b])
    from scipy.stats import rankdata

    ranks = rankdata(pooled)
    n = len(a)
    w = ranks[:n].sum()
    sums = np.array([ranks[list(c)].sum() for c in itertools.combinations(range(len(pooled)), n)])
    p_low = np.mean(sums <= w + 1e-9)
    p_high = np.mean(sums >= w - 1e-9)
    return min(1.0, 2.0 * min(p_low, p_high))


@given(st.lists(st.integers(0, 6), min_size=3, max_size=7),
       st.lists(st.integers(0, 6), min_size=3, max_size=7))
@settings(max_examples=40, deadline=None)
def test_rank_sum_exact_mode_matches_enumeration_with_ties(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    verdict = rank_sum_test(a, b)
    assert math.isclose(verdict.p_value, _brute_force_two_sided_p(a, b), abs_tol=1e-12)


def test_rank_sum_exact_mode_matches_scipy_on_untied_data():
    rng = np.random.default_rng(8)
    for _ in range(25):
        a = rng.normal(size=rng.integers(3, 9))
        b = rng.normal(size=rng.integers(3, 9))
        mine = rank_sum_test(a, b)
        ref = mannwhitneyu(a, b, alternative="two-sided", method="exact")
        assert math.isclose(mine.p_value, ref.pvalue, abs_tol=1e-12)


def test_rank_sum_approximation_matches_scipy_asymptotic():
    rng = np.random.default_rng(21)
    for _ in range(10):
        a = rng.normal(size=20)
        b = rng.normal(loc=rng.uniform(-1, 1), size=24)
        mine = rank_sum_test(a, b)
        ref = mannwhitneyu(a, b, alternative="two-sided", method="asymptotic",
                           use_continuity=False)
        assert math.isclose(mine.p_value, ref.pvalue, rel_tol=1e-9)


def test_rank_sum_decision_uses_alpha_threshold():
    a = [1.0, 2.0, 3.0, 4.0, 5.0]
    b = [6.0, 7.0, 8.0, 9.0, 10.0]
    p = rank_sum_test(a, b).p_value
    assert rank_sum_test(a, b, alpha=p).decision == "similar"
    assert rank_sum_test(a, b, alpha=p * 1.01).decision == "better"
