"""Nearest-neighbor motion classification with leave-one-out cross-validation
over reduced feature maps."""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .selection import ScanlineSubset
from .seqio import EndStateDataset, Frame


class DistanceMetric(Enum):
    EUCLIDEAN = "euclidean"
    ONE_MINUS_CC = "one_minus_cc"


@dataclass(frozen=True, eq=False)
class ConfusionMatrix:
    """LOOCV tallies: rows are true classes, columns predicted classes."""

    counts: np.ndarray
    labels: tuple[str, ...]

    def __post_init__(self):
        arr = np.array(self.counts, dtype=np.int64)
        arr.setflags(write=False)
        object.__setattr__(self, "counts", arr)
        object.__setattr__(self, "labels", tuple(str(s) for s in self.labels))
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise ValueError(f"counts must be square, got shape {arr.shape}")
        n = arr.shape[0]
        if len(self.labels) != n:
            raise ValueError(f"expected {n} labels, got {len(self.labels)}")
        if arr.min(initial=0) < 0:
            raise ValueError("counts must be nonnegative")
        row_sums = arr.sum(axis=1)
        if n and (row_sums != row_sums[0]).any():
            raise ValueError("every class row must tally the same number of trials")

    @property
    def n(self) -> int:
        return self.counts.shape[0]

    @property
    def trials_per_class(self) -> int:
        return int(self.counts.sum(axis=1)[0]) if self.n else 0

    def __eq__(self, other) -> bool:
        if not isinstance(other, ConfusionMatrix):
            return NotImplemented
        return self.labels == other.labels and np.array_equal(self.counts, other.counts)


@dataclass(frozen=True)
class AccuracyStats:
    overall: float
    per_class: tuple[float, ...]


def _flatten(frame_or_array) -> np.ndarray:
    values = frame_or_array.values if isinstance(frame_or_array, Frame) else frame_or_array
    return np.asarray(values, dtype=np.float64).ravel()


def nn_classify(train, query, metric: DistanceMetric = DistanceMetric.EUCLIDEAN) -> str:
    """Label of the training feature map nearest to the query.

    `train` is a list of (feature map, label); feature maps may be Frames or
    plain arrays and are compared flattened.  Ties go to the earliest
    training-list position.
    """
    if not train:
        raise ValueError("training set is empty")
    q = _flatten(query)
    best_label = None
    best = np.inf
    for features, label in train:
        x = _flatten(features)
        if x.size != q.size:
            raise ValueError(f"feature size mismatch: {x.size} vs {q.size}")
        dist = _metric_distance(x, q, metric)
        if dist < best:
            best = dist
            best_label = label
    return best_label


def _metric_distance(a: np.ndarray, b: np.ndarray, metric: DistanceMetric) -> float:
    if metric == DistanceMetric.EUCLIDEAN:
        diff = a - b
        return float(np.sqrt((diff * diff).sum()))
    if metric == DistanceMetric.ONE_MINUS_CC:
        da = a - a.mean()
        db = b - b.mean()
        sa = float(np.sqrt((da * da).sum()))
        sb = float(np.sqrt((db * db).sum()))
        if sa == 0.0 or sb == 0.0:
            raise ValueError("correlation undefined: feature map has zero variance")
        return 1.0 - float((da * db).sum() / (sa * sb))
    raise ValueError(f"unknown metric {metric!r}")


def loocv(
    ds: EndStateDataset,
    subset: ScanlineSubset,
    metric: DistanceMetric = DistanceMetric.EUCLIDEAN,
) -> ConfusionMatrix:
    """Leave-one-out NN classification over the subset's feature maps.

    Samples are ordered class-major then trial-major; each is classified
    against all others and tallied into counts[true, predicted].  Needs
    k >= 2 so a held-out sample's class still has an exemplar.
    """
    if ds.k < 2:
        raise ValueError(f"LOOCV needs k >= 2 trials per class, got k={ds.k}")
    if subset.indices[-1] >= ds.m:
        raise ValueError(f"subset index {subset.indices[-1]} out of range for m={ds.m}")
    n, k = ds.n, ds.k
    cols = list(subset.indices)
    features = ds.values[:, :, cols, :].astype(np.float64).reshape(n * k, -1)
    counts = np.zeros((n, n), dtype=np.int64)
    for held in range(n * k):
        best = np.inf
        best_sample = -1
        for other in range(n * k):
            if other == held:
                continue
            dist = _metric_distance(features[other], features[held], metric)
            if dist < best:
                best = dist
                best_sample = other
        counts[held // k, best_sample // k] += 1
    return ConfusionMatrix(counts, ds.labels)


def accuracy(cm: ConfusionMatrix) -> AccuracyStats:
    """Overall and per-class accuracy of a confusion matrix."""
    total = int(cm.counts.sum())
    if total == 0:
        raise ValueError("confusion matrix is empty")
    diag = np.diag(cm.counts)
    row_sums = cm.counts.sum(axis=1)
    return AccuracyStats(
        overall=float(diag.sum() / total),
        per_class=tuple(float(c / r) for c, r in zip(diag, row_sums)),
    )


def confusion_csv(cm: ConfusionMatrix) -> str:
    """Confusion matrix as CSV with label header row and column."""
    lines = ["class," + ",".join(cm.labels)]
    for label, row in zip(cm.labels, cm.counts):
        lines.append(label + "," + ",".join(str(int(c)) for c in row))
    return "\n".join(lines) + "\n"


def summary_json(cm: ConfusionMatrix, subset: ScanlineSubset, metric: DistanceMetric) -> str:
    """JSON report: overall/per-class accuracy plus subset and metric."""
    stats = accuracy(cm)
    payload = {
        "overall": stats.overall,
        "per_class": {label: acc for label, acc in zip(cm.labels, stats.per_class)},
        "subset": {
            "strategy": subset.strategy.value,
            "indices": list(subset.indices),
            "ranks": list(subset.ranks),
        },
        "metric": metric.value,
    }
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"
