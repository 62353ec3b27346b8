"""UDSS grids, extrema picking, DSS/CSS and feature-map extraction."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import sonoselect as ss
from oracles import interior_extrema_ref
from sonoselect.selection import Polarity


def _agg(values, method=ss.ScoreMethod.FC):
    return ss.AggregatedScore(method=method, values=np.asarray(values, dtype=np.float64))


# --- udss --------------------------------------------------------------------


def test_udss_four_of_128():
    assert ss.udss(128, 4).indices == (16, 48, 80, 112)


def test_udss_full_is_identity():
    assert ss.udss(128, 128).indices == tuple(range(128))


def test_udss_single_is_center():
    assert ss.udss(128, 1).indices == (64,)


def test_udss_count_out_of_range():
    with pytest.raises(ValueError, match="count"):
        ss.udss(8, 0)
    with pytest.raises(ValueError, match="count"):
        ss.udss(8, 9)


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 400), st.data())
def test_udss_formula_and_determinism(m, data):
    count = data.draw(st.integers(1, m))
    subset = ss.udss(m, count)
    assert subset.indices == ss.udss(m, count).indices
    assert subset.strategy == ss.SubsetStrategy.UDSS
    expected = tuple(int(np.floor((c + 0.5) * m / count)) for c in range(count))
    assert subset.indices == expected
    assert len(set(subset.indices)) == count
    assert all(0 <= i < m for i in subset.indices)


# --- extrema_select ----------------------------------------------------------

SIGNAL = [0.0, 1.0, 0.0, 0.0, 0.8, 0.0, 0.0, 0.6, 0.0]


def test_extrema_maxima_example():
    subset = ss.extrema_select(_agg(SIGNAL), 2, Polarity.MAXIMA, smoothing_window=1)
    assert subset.indices == (1, 4)
    assert subset.ranks == (1, 2)
    assert set(subset.indices) <= set(interior_extrema_ref(SIGNAL, maxima=True))


def test_extrema_minima_plateau_leftmost():
    subset = ss.extrema_select(_agg(SIGNAL), 1, Polarity.MINIMA, smoothing_window=1)
    assert subset.indices == (2,)
    assert interior_extrema_ref(SIGNAL, maxima=False)[0] == 2


def test_extrema_monotone_signal_uses_fallback():
    ramp = np.linspace(0.0, 1.0, 12)
    subset = ss.extrema_select(_agg(ramp), 2, Polarity.MAXIMA, smoothing_window=1)
    # no interior extrema: global ranking picks the top value, then the best
    # index at least 3 away
    assert subset.indices == (8, 11)
    assert subset.ranks == (2, 1)


def test_extrema_count_can_cover_everything():
    rng = np.random.default_rng(3)
    raw = rng.random(16)
    subset = ss.extrema_select(_agg(raw / raw.max()), 16, Polarity.MAXIMA)
    assert subset.indices == tuple(range(16))


def test_extrema_scaling_invariance():
    rng = np.random.default_rng(4)
    raw = rng.random(32)
    values = raw / raw.max()
    for count in (3, 7):
        base = ss.extrema_select(_agg(values), count, Polarity.MAXIMA)
        # positive power-of-two scaling is exact in float arithmetic
        scaled_vals = values * 0.25
        scaled_vals[np.argmax(values)] = 0.25
        scaled = ss.extrema_select(
            ss.AggregatedScore(method=ss.ScoreMethod.FC, values=scaled_vals / 0.25),
            count,
            Polarity.MAXIMA,
        )
        assert base.indices == scaled.indices


def test_extrema_rejects_bad_count():
    with pytest.raises(ValueError, match="count"):
        ss.extrema_select(_agg(SIGNAL), 10, Polarity.MAXIMA)


# --- dss / css ---------------------------------------------------------------


def test_dss_requires_fc_matrix(easy_mi):
    with pytest.raises(ValueError, match="Fisher"):
        ss.dss(easy_mi, 4)


def test_css_requires_mi_matrix(easy_fc):
    with pytest.raises(ValueError, match="mutual"):
        ss.css(easy_fc, 4)


def test_dss_recovers_active_regions(easy_fc, easy_phantom):
    _, truth = easy_phantom
    union = set().union(*[set(s) for s in truth.active_scanlines])
    subset = ss.dss(easy_fc, 4)
    assert subset.strategy == ss.SubsetStrategy.DSS
    assert sum(i in union for i in subset.indices) >= 3


def test_css_recovers_active_regions(easy_mi, easy_phantom):
    _, truth = easy_phantom
    union = set().union(*[set(s) for s in truth.active_scanlines])
    subset = ss.css(easy_mi, 4)
    assert subset.strategy == ss.SubsetStrategy.CSS
    assert sum(i in union for i in subset.indices) >= 3


def _flat_matrix(method, m=12):
    averaged = np.zeros((2, m))
    return ss.ScoreMatrix(
        method=method, per_trial=np.zeros((2, m, 1)), averaged=averaged, labels=("a", "b")
    )


def test_dss_all_zero_matrix_deterministic_fallback():
    scores = _flat_matrix(ss.ScoreMethod.FC)
    a = ss.dss(scores, 4)
    b = ss.dss(scores, 4)
    assert a.indices == b.indices == (0, 3, 6, 9)


def test_css_constant_signal_deterministic_fallback():
    scores = _flat_matrix(ss.ScoreMethod.MI)
    a = ss.css(scores, 4)
    assert a.indices == (0, 3, 6, 9)


def test_dss_css_full_count(easy_fc, easy_mi):
    assert ss.dss(easy_fc, 128).indices == tuple(range(128))
    assert ss.css(easy_mi, 128).indices == tuple(range(128))


# --- extract_feature_map -----------------------------------------------------


def test_extract_full_subset_is_identity():
    rng = np.random.default_rng(5)
    frame = ss.Frame(rng.random((8, 4), dtype=np.float32))
    subset = ss.udss(8, 8)
    assert np.array_equal(ss.extract_feature_map(frame, subset).values, frame.values)


def test_extract_first_scanline():
    rng = np.random.default_rng(6)
    frame = ss.Frame(rng.random((4, 8), dtype=np.float32))
    subset = ss.ScanlineSubset(indices=(0,), strategy=ss.SubsetStrategy.UDSS, ranks=(1,))
    out = ss.extract_feature_map(frame, subset)
    assert out.values.shape == (1, 8)
    assert np.array_equal(out.values[0], frame.values[0])


def test_extract_constant_scanlines():
    values = np.tile((np.arange(128, dtype=np.float32) / 128.0)[:, None], (1, 4))
    frame = ss.Frame(values)
    out = ss.extract_feature_map(frame, ss.udss(128, 4))
    assert np.array_equal(out.values[:, 0], np.asarray([0.125, 0.375, 0.625, 0.875], dtype=np.float32))


def test_extract_out_of_range_index():
    frame = ss.Frame(np.zeros((4, 4), dtype=np.float32))
    subset = ss.ScanlineSubset(indices=(2, 9), strategy=ss.SubsetStrategy.UDSS, ranks=(1, 2))
    with pytest.raises(ValueError, match="out of range"):
        ss.extract_feature_map(frame, subset)


def test_extract_preserves_bits():
    rng = np.random.default_rng(7)
    frame = ss.Frame((rng.normal(size=(6, 5))).astype(np.float32), ss.FrameKind.RF)
    subset = ss.ScanlineSubset(indices=(1, 4), strategy=ss.SubsetStrategy.DSS, ranks=(2, 1))
    out = ss.extract_feature_map(frame, subset)
    assert out.values.tobytes() == frame.values[[1, 4]].tobytes()
    assert out.kind == ss.FrameKind.RF


# --- ScanlineSubset ----------------------------------------------------------


def test_subset_json_roundtrip():
    subset = ss.ScanlineSubset(indices=(3, 9, 17), strategy=ss.SubsetStrategy.CSS, ranks=(2, 1, 3))
    back = ss.ScanlineSubset.from_json(subset.to_json())
    assert back == subset


def test_subset_rejects_unsorted_or_duplicate_indices():
    with pytest.raises(ValueError, match="strictly increasing"):
        ss.ScanlineSubset(indices=(5, 3), strategy=ss.SubsetStrategy.UDSS, ranks=(1, 2))
    with pytest.raises(ValueError, match="strictly increasing"):
        ss.ScanlineSubset(indices=(3, 3), strategy=ss.SubsetStrategy.UDSS, ranks=(1, 2))


def test_subset_rejects_bad_ranks():
    with pytest.raises(ValueError, match="ranks"):
        ss.ScanlineSubset(indices=(1, 2), strategy=ss.SubsetStrategy.UDSS, ranks=(1, 3))


def test_subset_rejects_empty():
    with pytest.raises(ValueError, match="at least one"):
        ss.ScanlineSubset(indices=(), strategy=ss.SubsetStrategy.UDSS, ranks=())
