"""Fisher-criterion and mutual-information scoring against hand and
brute-force oracles."""

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

import sonoselect as ss
from oracles import (
    entropy_ref,
    fc_pair_ref,
    joint_entropy_ref,
    make_random_dataset,
    mi_pair_ref,
    score_matrix_ref,
)

BINS2 = ss.MiConfig(bin_count=2)


def unit_vectors(length=st.integers(2, 32)):
    return st.integers(0, 2**31).flatmap(
        lambda seed: length.map(lambda n: np.random.default_rng(seed).random(n))
    )


# --- fc_pair -----------------------------------------------------------------


def test_fc_identical_vectors_zero():
    v = np.asarray([0.2, 0.7, 0.1])
    assert ss.fc_pair(v, v) == 0.0


def test_fc_hand_example():
    assert abs(ss.fc_pair([0.0, 1.0], [2.0, 3.0]) - 8.0) < 1e-10
    assert abs(fc_pair_ref([0.0, 1.0], [2.0, 3.0]) - 8.0) < 1e-10


def test_fc_zero_variance_floored():
    score = ss.fc_pair([0.0, 0.0], [1.0, 1.0])
    assert abs(score - 1e12) < 1e3  # 1 / variance floor


def test_fc_length_mismatch():
    with pytest.raises(ValueError, match="lengths differ"):
        ss.fc_pair([0.0, 1.0], [0.0, 1.0, 2.0])


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**31))
def test_fc_symmetry_nonnegativity_invariances(seed):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=12)
    b = rng.normal(size=12)
    score = ss.fc_pair(a, b)
    assert score >= 0.0
    assert ss.fc_pair(b, a) == score
    shift = float(rng.uniform(-5, 5))
    assert abs(ss.fc_pair(a + shift, b + shift) - score) <= 1e-9 * max(score, 1.0)
    alpha = float(rng.uniform(0.5, 4.0))
    scaled = ss.fc_pair(alpha * a, alpha * b)
    if score > 1e-6:  # away from the variance-floor regime
        assert abs(scaled - score) <= 1e-9 * score


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**31), st.integers(2, 24))
def test_fc_matches_reference(seed, d):
    rng = np.random.default_rng(seed)
    a, b = rng.random(d), rng.random(d)
    assert abs(ss.fc_pair(a, b) - fc_pair_ref(a, b)) <= 1e-9


# --- entropy / joint entropy / mi -------------------------------------------


def test_entropy_constant_vector_zero():
    assert ss.entropy(np.full(9, 0.4)) == 0.0


def test_entropy_two_bins_uniform():
    assert abs(ss.entropy([0.1, 0.9], BINS2) - 1.0) < 1e-12


def test_entropy_four_occupied_bins():
    # 8 samples spread over 4 distinct bins of 32, two each
    v = [0.01, 0.01, 0.26, 0.26, 0.51, 0.51, 0.76, 0.76]
    assert abs(ss.entropy(v) - 2.0) < 1e-12
    assert abs(entropy_ref(v, 32) - 2.0) < 1e-12


def test_entropy_value_one_goes_to_last_bin():
    # 1.0 and 0.97 share the last of 32 bins
    assert ss.entropy([1.0, 0.97]) == 0.0


def test_entropy_rejects_out_of_range():
    with pytest.raises(ValueError, match=r"\[0, 1\]"):
        ss.entropy([0.5, 1.2])


def test_joint_entropy_both_constant_zero():
    assert ss.joint_entropy(np.full(6, 0.2), np.full(6, 0.8)) == 0.0


def test_joint_entropy_identical_equals_marginal():
    v = np.asarray([0.05, 0.20, 0.35, 0.50, 0.65, 0.80, 0.95, 0.20])
    assert ss.joint_entropy(v, v) == ss.entropy(v)


def test_joint_entropy_hand_example():
    v1 = [0.0, 0.0, 0.9, 0.9]
    v2 = [0.0, 0.9, 0.0, 0.9]
    assert abs(ss.joint_entropy(v1, v2, BINS2) - 2.0) < 1e-12
    assert abs(joint_entropy_ref(v1, v2, 2) - 2.0) < 1e-12


def test_mi_identical_alternating():
    v = [0.0, 0.9, 0.0, 0.9]
    assert abs(ss.mi_pair(v, v, BINS2) - 1.0) < 1e-12


def test_mi_independent_zero():
    assert ss.mi_pair([0.0, 0.0, 0.9, 0.9], [0.0, 0.9, 0.0, 0.9], BINS2) == 0.0


def test_mi_both_constant_zero():
    assert ss.mi_pair(np.full(5, 0.3), np.full(5, 0.6)) == 0.0


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**31), st.integers(2, 40), st.sampled_from([2, 8, 32]))
def test_mi_symmetry_bounds_and_self(seed, d, bins):
    rng = np.random.default_rng(seed)
    cfg = ss.MiConfig(bin_count=bins)
    a, b = rng.random(d), rng.random(d)
    mi = ss.mi_pair(a, b, cfg)
    assert abs(ss.mi_pair(b, a, cfg) - mi) <= 1e-12
    ha, hb = ss.entropy(a, cfg), ss.entropy(b, cfg)
    assert 0.0 <= mi <= min(ha, hb) + 1e-12
    assert ss.mi_pair(a, a, cfg) == ha
    assert ha <= np.log2(bins) + 1e-12
    assert abs(mi - mi_pair_ref(a, b, bins)) <= 1e-9


# --- score_matrix ------------------------------------------------------------


def _dataset(values, labels=None):
    values = np.asarray(values, dtype=np.float32)
    labels = labels or tuple(f"c{i}" for i in range(values.shape[0]))
    return ss.EndStateDataset(values, labels)


def test_score_matrix_identical_classes_all_zero():
    rng = np.random.default_rng(8)
    one_class = rng.random((1, 2, 3, 4), dtype=np.float32)
    ds = _dataset(np.concatenate([one_class, one_class], axis=0))
    scores = ss.score_matrix(ds, ss.ScoreMethod.FC)
    assert np.allclose(scores.per_trial, 0.0, atol=1e-12)
    assert np.array_equal(scores.averaged, np.zeros((2, 3)))


def test_score_matrix_two_class_hand_example():
    # dyadic analogue of the fc hand pair: shift/scale-invariant score stays 8
    ds = _dataset([[[[0.0, 0.25]]], [[[0.5, 0.75]]]])
    scores = ss.score_matrix(ds, ss.ScoreMethod.FC)
    assert scores.per_trial.shape == (2, 1, 1)
    assert np.max(np.abs(scores.per_trial - 8.0)) < 1e-8
    assert np.array_equal(scores.averaged, np.ones((2, 1)))


@pytest.mark.parametrize("method", [ss.ScoreMethod.FC, ss.ScoreMethod.MI])
def test_score_matrix_matches_bruteforce(method):
    rng = np.random.default_rng(123)
    for _ in range(4):
        n, k = rng.integers(2, 5), rng.integers(1, 4)
        m, d = rng.integers(1, 6), rng.integers(2, 20)
        values = make_random_dataset(rng, n, k, m, d)
        ds = _dataset(values)
        got = ss.score_matrix(ds, method)
        want_pt, want_avg = score_matrix_ref(values, method.value)
        assert np.max(np.abs(got.per_trial - want_pt)) <= 1e-9
        assert np.max(np.abs(got.averaged - want_avg)) <= 1e-9


def test_score_matrix_trial_permutation_leaves_average():
    rng = np.random.default_rng(5)
    values = make_random_dataset(rng, 3, 4, 2, 6)
    base = ss.score_matrix(_dataset(values), ss.ScoreMethod.FC)
    perm = rng.permutation(4)
    permuted = ss.score_matrix(_dataset(values[:, perm]), ss.ScoreMethod.FC)
    assert np.allclose(base.averaged, permuted.averaged, atol=1e-12)
    assert np.allclose(base.per_trial[:, :, perm], permuted.per_trial, atol=0)


# --- aggregate ---------------------------------------------------------------


def _matrix_from_averaged(averaged, method=ss.ScoreMethod.FC):
    averaged = np.asarray(averaged, dtype=np.float64)
    n, m = averaged.shape
    return ss.ScoreMatrix(
        method=method, per_trial=averaged[:, :, None], averaged=averaged, labels=tuple(f"c{i}" for i in range(n))
    )


def test_aggregate_uniform_sum():
    scores = _matrix_from_averaged([[1.0, 0.5, 0.0], [0.0, 0.5, 1.0]])
    agg = ss.aggregate(scores)
    assert np.array_equal(agg.values, [1.0, 1.0, 1.0])


def test_aggregate_dominant_column():
    scores = _matrix_from_averaged([[1.0, 0.25], [1.0, 0.125]])
    agg = ss.aggregate(scores)
    assert agg.values[0] == 1.0
    assert agg.values[1] < 1.0


def test_aggregate_max_is_exactly_one():
    rng = np.random.default_rng(17)
    raw = rng.random((3, 8))
    averaged = raw / raw.max(axis=1, keepdims=True)
    agg = ss.aggregate(_matrix_from_averaged(averaged))
    assert agg.values.max() == 1.0


def test_aggregate_all_zero_stays_zero():
    agg = ss.aggregate(_matrix_from_averaged(np.zeros((2, 4))))
    assert np.array_equal(agg.values, np.zeros(4))


# --- trial_consistency -------------------------------------------------------


def test_trial_consistency_identical_trials_zero():
    per_trial = np.repeat(np.asarray([[[2.0], [1.0]]]), 3, axis=2)
    scores = ss.ScoreMatrix(
        method=ss.ScoreMethod.FC,
        per_trial=per_trial,
        averaged=np.asarray([[1.0, 0.5]]),
        labels=("a",),
    )
    assert ss.trial_consistency(scores) == 0.0


def test_trial_consistency_known_spread():
    # normalized trial vectors [1, .8] and [.8, 1]: both scanlines differ by
    # 0.2 across the two trials, population std 0.1 everywhere
    per_trial = np.asarray([[[1.0, 0.8], [0.8, 1.0]]])
    scores = ss.ScoreMatrix(
        method=ss.ScoreMethod.FC,
        per_trial=per_trial,
        averaged=np.asarray([[1.0, 1.0]]),
        labels=("a",),
    )
    assert abs(ss.trial_consistency(scores) - 0.1) < 1e-15


def test_trial_consistency_requires_two_trials():
    scores = ss.ScoreMatrix(
        method=ss.ScoreMethod.FC,
        per_trial=np.ones((2, 3, 1)),
        averaged=np.ones((2, 3)),
        labels=("a", "b"),
    )
    with pytest.raises(ValueError, match="k >= 2"):
        ss.trial_consistency(scores)


def test_trial_consistency_easy_phantom_ranges(easy_fc, easy_mi):
    assert ss.trial_consistency(easy_fc) <= 0.15
    assert ss.trial_consistency(easy_mi) <= 0.10
