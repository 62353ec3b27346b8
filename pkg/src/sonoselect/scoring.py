"""Per-scanline discriminability scoring.

Fisher-criterion and mutual-information scores computed one-vs-all between
classes: scanline j of class i, trial t is scored against scanline j of every
other class's trial t, the n-1 scores summed, averaged across trials and
normalized per class row.  Aggregation across classes and the trial
consistency statistic live here too.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .seqio import EndStateDataset, ScoreMatrix, ScoreMethod

FC_VARIANCE_FLOOR = 1e-12
MI_NEGATIVE_TOLERANCE = 1e-12


@dataclass(frozen=True)
class MiConfig:
    """Histogram estimator settings; bins span [0, 1] uniformly."""

    bin_count: int = 32

    def __post_init__(self):
        if self.bin_count < 2:
            raise ValueError("bin_count must be >= 2")


@dataclass(frozen=True)
class AggregatedScore:
    """Column sums of an averaged score matrix, max-normalized to [0, 1]."""

    method: ScoreMethod
    values: np.ndarray

    def __post_init__(self):
        arr = np.array(self.values, dtype=np.float64)
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)
        if arr.ndim != 1:
            raise ValueError("aggregated values must be 1-D")
        if not np.isfinite(arr).all():
            raise ValueError("aggregated values must be finite")
        if arr.size and (arr.min() < 0.0 or arr.max() > 1.0):
            raise ValueError("aggregated values must lie in [0, 1]")
        if arr.size and arr.max() not in (0.0, 1.0):
            raise ValueError("aggregated values must be max-normalized (max 1) or all zero")

    @property
    def m(self) -> int:
        return self.values.size


def _pair_vectors(v1, v2) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(v1, dtype=np.float64)
    b = np.asarray(v2, dtype=np.float64)
    if a.ndim != 1 or b.ndim != 1:
        raise ValueError("scanline vectors must be 1-D")
    if a.size != b.size:
        raise ValueError(f"scanline lengths differ: {a.size} vs {b.size}")
    if not (np.isfinite(a).all() and np.isfinite(b).all()):
        raise ValueError("scanline values must be finite")
    return a, b


def fc_pair(c1, c2) -> float:
    """Fisher criterion between two scanlines: squared mean difference over
    summed population variances (floored at 1e-12 to keep degenerate
    zero-variance channels finite)."""
    a, b = _pair_vectors(c1, c2)
    diff = a.mean() - b.mean()
    return float(diff * diff / (a.var() + b.var() + FC_VARIANCE_FLOOR))


def _bin_indices(values: np.ndarray, bin_count: int) -> np.ndarray:
    # uniform bins over [0, 1]; the value 1.0 belongs to the last bin
    idx = np.floor(values * bin_count).astype(np.int64)
    return np.minimum(idx, bin_count - 1)


def _check_unit_range(v: np.ndarray):
    if v.size and (v.min() < 0.0 or v.max() > 1.0):
        raise ValueError("scanline values must lie in [0, 1] for histogram entropy")


def _entropy_from_counts(counts: np.ndarray, total: int) -> float:
    p = counts[counts > 0] / total
    return float(-(p * np.log2(p)).sum())


def entropy(v, cfg: MiConfig = MiConfig()) -> float:
    """Plug-in histogram entropy of one scanline, in bits."""
    x = np.asarray(v, dtype=np.float64)
    if x.ndim != 1 or x.size < 1:
        raise ValueError("scanline must be a nonempty 1-D vector")
    if not np.isfinite(x).all():
        raise ValueError("scanline values must be finite")
    _check_unit_range(x)
    counts = np.bincount(_bin_indices(x, cfg.bin_count), minlength=cfg.bin_count)
    return _entropy_from_counts(counts, x.size)


def joint_entropy(v1, v2, cfg: MiConfig = MiConfig()) -> float:
    """Joint histogram entropy of two depth-aligned scanlines, in bits."""
    a, b = _pair_vectors(v1, v2)
    _check_unit_range(a)
    _check_unit_range(b)
    bins = cfg.bin_count
    codes = _bin_indices(a, bins) * bins + _bin_indices(b, bins)
    counts = np.bincount(codes, minlength=bins * bins)
    return _entropy_from_counts(counts, a.size)


def mi_pair(v1, v2, cfg: MiConfig = MiConfig()) -> float:
    """Mutual information between two scanlines: H(v1) + H(v2) - H(v1, v2)."""
    mi = entropy(v1, cfg) + entropy(v2, cfg) - joint_entropy(v1, v2, cfg)
    if mi < 0.0:
        if mi < -MI_NEGATIVE_TOLERANCE:
            raise ValueError(f"mutual information {mi} below negative tolerance")
        mi = 0.0
    return mi


def _normalize_rows(avg: np.ndarray) -> np.ndarray:
    row_max = avg.max(axis=1, keepdims=True)
    scale = np.where(row_max > 0, row_max, 1.0)
    return avg / scale


def _fc_per_trial(values: np.ndarray) -> np.ndarray:
    # values: (n, k, m, d) float64
    n, k, m, _ = values.shape
    means = values.mean(axis=3)
    variances = values.var(axis=3)
    per_trial = np.zeros((n, m, k), dtype=np.float64)
    for i in range(n):
        for other in range(n):
            if other == i:
                continue
            diff = means[i] - means[other]
            scores = diff * diff / (variances[i] + variances[other] + FC_VARIANCE_FLOOR)
            per_trial[i] += scores.T  # (k, m) -> (m, k)
    return per_trial


def _mi_per_trial(values: np.ndarray, cfg: MiConfig) -> np.ndarray:
    n, k, m, d = values.shape
    bins = cfg.bin_count
    idx = _bin_indices(values, bins)  # (n, k, m, d)

    # marginal entropies per (class, trial, scanline)
    flat = idx.reshape(n * k * m, d)
    offsets = np.arange(n * k * m, dtype=np.int64)[:, None] * bins
    counts = np.bincount((flat + offsets).ravel(), minlength=n * k * m * bins)
    counts = counts.reshape(n * k * m, bins)
    with np.errstate(divide="ignore", invalid="ignore"):
        p = counts / d
        logp = np.where(counts > 0, np.log2(np.where(counts > 0, p, 1.0)), 0.0)
    marginal = (-(p * logp).sum(axis=1)).reshape(n, k, m)

    per_trial = np.zeros((n, m, k), dtype=np.float64)
    cells = bins * bins
    row_offsets = np.arange(k * m, dtype=np.int64)[:, None] * cells
    for i in range(n):
        for other in range(i + 1, n):
            codes = (idx[i] * bins + idx[other]).reshape(k * m, d)
            joint_counts = np.bincount((codes + row_offsets).ravel(), minlength=k * m * cells)
            joint_counts = joint_counts.reshape(k * m, cells)
            with np.errstate(divide="ignore", invalid="ignore"):
                jp = joint_counts / d
                jlog = np.where(joint_counts > 0, np.log2(np.where(joint_counts > 0, jp, 1.0)), 0.0)
            joint = (-(jp * jlog).sum(axis=1)).reshape(k, m)
            mi = marginal[i] + marginal[other] - joint  # (k, m)
            if (mi < -MI_NEGATIVE_TOLERANCE).any():
                raise ValueError("mutual information below negative tolerance")
            mi = np.maximum(mi, 0.0)
            per_trial[i] += mi.T
            per_trial[other] += mi.T
    return per_trial


def score_matrix(
    ds: EndStateDataset, method: ScoreMethod, cfg: MiConfig = MiConfig()
) -> ScoreMatrix:
    """One-vs-all discriminability scores for every (class, scanline).

    For class i, trial t, scanline j the pairwise score against the matching
    scanline of every other class's trial t is summed (ascending class order)
    into per_trial[i, j, t]; trial means are then normalized per class row by
    the row maximum.
    """
    values = ds.values.astype(np.float64)
    if method == ScoreMethod.FC:
        per_trial = _fc_per_trial(values)
    elif method == ScoreMethod.MI:
        per_trial = _mi_per_trial(values, cfg)
    else:
        raise ValueError(f"unknown scoring method {method!r}")
    averaged = _normalize_rows(per_trial.mean(axis=2))
    return ScoreMatrix(method=method, per_trial=per_trial, averaged=averaged, labels=ds.labels)


def aggregate(scores: ScoreMatrix) -> AggregatedScore:
    """Total discriminability per scanline: class sums of the averaged
    matrix, normalized to max 1 (all-zero stays all-zero)."""
    col_sums = scores.averaged.sum(axis=0)
    peak = col_sums.max(initial=0.0)
    values = col_sums / peak if peak > 0 else np.zeros_like(col_sums)
    return AggregatedScore(method=scores.method, values=values)


def trial_consistency(scores: ScoreMatrix) -> float:
    """Mean per-scanline spread of the scores across trials.

    Each class/trial slice of per_trial is max-normalized, the population
    standard deviation is taken across trials, and the result is averaged
    over scanlines and classes.  Requires k >= 2.
    """
    if scores.k < 2:
        raise ValueError(f"trial consistency needs k >= 2 trials, got k={scores.k}")
    per_trial = scores.per_trial  # (n, m, k)
    peaks = per_trial.max(axis=1, keepdims=True)
    normalized = per_trial / np.where(peaks > 0, peaks, 1.0)
    spread = normalized.std(axis=2)  # population std across trials
    return float(spread.mean())
