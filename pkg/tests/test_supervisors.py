import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oodkit.dumpio import Origin, SampleRecord
from oodkit.supervisors import (
    ScoredSample,
    SupervisorConfig,
    Verdict,
    accuracy,
    baseline_predict,
    baseline_score,
    baseline_score_dump,
    map_rows,
    softmax,
)

from conftest import make_dump

finite = st.floats(allow_nan=False, allow_infinity=False, min_value=-700, max_value=700)
vectors = st.lists(finite, min_size=1, max_size=12).map(np.array)


def softmax_mp(values, precision=60):
    """Arbitrary-precision oracle for the softmax values."""
    with mpmath.workdps(precision):
        exps = [mpmath.exp(v) for v in values]
        total = mpmath.fsum(exps)
        return [float(e / total) for e in exps]


def rec(vec, label=0):
    return SampleRecord(0, Origin.INLIER, label, vec)


def test_softmax_uniform_on_zeros():
    np.testing.assert_allclose(softmax(np.zeros(10)), np.full(10, 0.1), atol=1e-15)


def test_softmax_two_equal_entries():
    np.testing.assert_array_equal(softmax(np.array([3.7, 3.7])), [0.5, 0.5])


def test_softmax_reference_values():
    expected = softmax_mp([2.0, 1.0, 0.0])
    np.testing.assert_allclose(expected, [0.66524, 0.24473, 0.09003], atol=1e-5)
    np.testing.assert_allclose(softmax(np.array([2.0, 1.0, 0.0])), expected, atol=1e-5)


def test_softmax_rejects_nonfinite():
    with pytest.raises(ValueError):
        softmax(np.array([1.0, np.nan]))


@given(vectors)
@settings(max_examples=100, deadline=None)
def test_softmax_simplex(v):
    p = softmax(v)
    assert np.all(p >= 0.0) and np.all(p <= 1.0)
    assert abs(p.sum() - 1.0) <= 1e-12


@given(st.lists(st.floats(allow_nan=False, allow_infinity=False, min_value=-350, max_value=350), min_size=1, max_size=12).map(np.array))
@settings(max_examples=100, deadline=None)
def test_softmax_strictly_positive_within_exp_range(v):
    # Entries only underflow to zero when the spread exceeds the exp range.
    p = softmax(v)
    assert np.all(p > 0.0)


@given(vectors, st.floats(min_value=-1e3, max_value=1e3))
@settings(max_examples=100, deadline=None)
def test_softmax_shift_invariance(v, c):
    np.testing.assert_allclose(softmax(v + c), softmax(v), atol=1e-12)


def test_baseline_score_uniform_logits():
    assert baseline_score(rec(np.zeros(10))) == pytest.approx(0.9, abs=1e-15)


def test_baseline_score_saturated_maximum():
    v = np.zeros(10)
    v[0] = 1000.0
    assert baseline_score(rec(v)) == pytest.approx(0.0, abs=1e-12)


def test_baseline_score_reference_value():
    assert baseline_score(rec(np.array([2.0, 1.0, 0.0]))) == pytest.approx(
        0.33476, abs=1e-5
    )


@given(vectors)
@settings(max_examples=100, deadline=None)
def test_baseline_score_bound(v):
    score = baseline_score(rec(v, label=0))
    assert 0.0 <= score <= 1.0 - 1.0 / len(v) + 1e-15


def test_accept_below_threshold():
    # softmax max 4/5 gives anomaly 0.2, comfortably under epsilon 0.5.
    v = np.array([math.log(4.0), 0.0])
    sample = baseline_predict(rec(v), SupervisorConfig(epsilon=0.5))
    assert sample.anomaly == pytest.approx(0.2, abs=1e-7)
    assert sample.verdict is Verdict.ACCEPT


def test_equality_at_threshold_rejects():
    # (c, c) gives anomaly exactly 0.5.
    sample = baseline_predict(rec(np.array([1.25, 1.25])), SupervisorConfig(0.5))
    assert sample.anomaly == 0.5
    assert sample.verdict is Verdict.REJECT


def test_zero_threshold_rejects_everything(rng):
    config = SupervisorConfig(epsilon=0.0)
    for _ in range(20):
        v = rng.standard_normal(6)
        assert baseline_predict(rec(v), config).verdict is Verdict.REJECT


def test_argmax_tie_breaks_to_lowest_index():
    sample = baseline_predict(rec(np.array([3.0, 3.0, 1.0])), SupervisorConfig())
    assert sample.predicted_class == 0


@given(vectors, st.floats(min_value=1e-3, max_value=1e3), st.floats(min_value=-100, max_value=100))
@settings(max_examples=100, deadline=None)
def test_argmax_stable_under_affine_rescaling(v, scale, shift):
    # Rounding can merge near-ties, so the robust monotonicity statement is
    # that the original winner still attains the maximum after the transform.
    config = SupervisorConfig()
    base = baseline_predict(rec(v), config).predicted_class
    transformed = rec(v * scale + shift).activations
    assert transformed[base] == np.max(transformed)


@given(st.lists(st.floats(min_value=0, max_value=1, allow_nan=False), min_size=1, max_size=30))
@settings(max_examples=60, deadline=None)
def test_monotone_threshold_acceptance_nesting(anomalies):
    eps1, eps2 = 0.3, 0.6
    accepted1 = {i for i, a in enumerate(anomalies) if a < eps1}
    accepted2 = {i for i, a in enumerate(anomalies) if a < eps2}
    assert accepted1 <= accepted2


def test_dump_scoring_matches_per_record(rng):
    vecs = rng.standard_normal((50, 4))
    dump = make_dump(vecs, [int(i % 4) for i in range(50)], n_classes=4)
    config = SupervisorConfig(epsilon=0.4)
    scored = baseline_score_dump(dump, config)
    for r, s in zip(dump.records, scored):
        single = baseline_predict(r, config)
        assert s == single


@pytest.mark.parametrize("threads", [2, 3, 8])
def test_thread_count_does_not_change_results(rng, threads):
    vecs = rng.standard_normal((37, 5))
    dump = make_dump(vecs, [None] * 37, n_classes=5)
    config = SupervisorConfig()
    assert baseline_score_dump(dump, config, threads=threads) == baseline_score_dump(
        dump, config, threads=1
    )


def test_map_rows_empty_matrix():
    out = map_rows(np.empty((0, 3)), lambda m: (m.sum(axis=1), m.sum(axis=1)), threads=4)
    assert len(out[0]) == 0


def test_scored_sample_validates_anomaly():
    with pytest.raises(ValueError):
        ScoredSample(0, 1.5, 0, Verdict.ACCEPT)


def test_accuracy_counts_argmax_hits():
    dump = make_dump(
        [[2.0, 0.0], [0.0, 2.0], [2.0, 0.0]], [0, 1, 1], n_classes=2
    )
    assert accuracy(dump) == pytest.approx(2 / 3)
