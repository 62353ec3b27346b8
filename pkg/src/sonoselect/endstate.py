"""Motion end-state extraction.

Each trial's frames are correlated against its first (rest) frame; completed
motions show up as valleys in that correlation trace.  The deepest valleys,
subject to prominence and separation constraints, give the end-state frames
assembled into an EndStateDataset.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .seqio import EndStateDataset, Frame, FrameKind, Sequence


class InsufficientValleysError(ValueError):
    """Fewer qualifying valleys than requested motions."""

    def __init__(self, needed: int, found: int):
        super().__init__(f"found {found} qualifying valleys, need {needed}")
        self.needed = needed
        self.found = found


@dataclass(frozen=True)
class CorrelationTrace:
    """Per-frame correlation against the rest frame, values in [-1, 1]."""

    values: np.ndarray
    frame_rate_hz: float

    def __post_init__(self):
        arr = np.array(self.values, dtype=np.float64)
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)
        if arr.ndim != 1:
            raise ValueError("trace values must be 1-D")
        if not np.isfinite(arr).all():
            raise ValueError("trace values must be finite")
        if arr.size and (arr.min() < -1.0 or arr.max() > 1.0):
            raise ValueError("trace values must lie in [-1, 1]")
        if not (self.frame_rate_hz > 0):
            raise ValueError("frame rate must be positive")

    def __len__(self) -> int:
        return self.values.size


@dataclass(frozen=True)
class ValleyParams:
    """Valley detection parameters.

    min_separation=None resolves per trial: half a metronome period when the
    sequence metadata carries one, else ceil(trace length / (2 * n_motions)).
    """

    n_motions: int
    smoothing_window: int = 5
    min_separation: int | None = None
    min_prominence: float = 0.1

    def __post_init__(self):
        if self.n_motions < 1:
            raise ValueError("n_motions must be >= 1")
        if self.smoothing_window < 1 or self.smoothing_window % 2 == 0:
            raise ValueError("smoothing_window must be odd and >= 1")
        if self.min_separation is not None and self.min_separation < 1:
            raise ValueError("min_separation must be >= 1")
        if not (0.0 <= self.min_prominence <= 1.0):
            raise ValueError("min_prominence must lie in [0, 1]")


def resolve_min_separation(
    trace_length: int,
    n_motions: int,
    frame_rate_hz: float,
    metronome_period_s: float | None = None,
) -> int:
    if metronome_period_s is not None:
        return max(1, math.ceil(0.5 * metronome_period_s * frame_rate_hz))
    return max(1, math.ceil(trace_length / (2 * n_motions)))


def moving_average(values: np.ndarray, window: int) -> np.ndarray:
    """Centered moving average with the window shrinking at the boundaries."""
    if window < 1 or window % 2 == 0:
        raise ValueError("window must be odd and >= 1")
    x = np.asarray(values, dtype=np.float64)
    if window == 1:
        return x.copy()
    half = window // 2
    out = np.empty_like(x)
    for i in range(x.size):
        lo = max(0, i - half)
        hi = min(x.size, i + half + 1)
        out[i] = x[lo:hi].mean()
    return out


def pearson_cc(a: Frame, b: Frame) -> float:
    """Pearson correlation over all paired pixels of two equally sized frames."""
    if a.values.shape != b.values.shape:
        raise ValueError(f"frame shapes differ: {a.values.shape} vs {b.values.shape}")
    x = a.values.astype(np.float64).ravel()
    y = b.values.astype(np.float64).ravel()
    dx = x - x.mean()
    dy = y - y.mean()
    sx = float(np.sqrt((dx * dx).sum()))
    sy = float(np.sqrt((dy * dy).sum()))
    if sx == 0.0 or sy == 0.0:
        raise ValueError("correlation undefined: frame has zero variance")
    cc = float((dx * dy).sum() / (sx * sy))
    return min(1.0, max(-1.0, cc))


def cc_trace(seq: Sequence) -> CorrelationTrace:
    """Correlation of every frame against frame 0 (the rest state)."""
    rest = seq.frames[0]
    values = np.empty(seq.n_frames, dtype=np.float64)
    values[0] = 1.0
    for t in range(1, seq.n_frames):
        values[t] = pearson_cc(seq.frames[t], rest)
    return CorrelationTrace(values, frame_rate_hz=seq.frame_rate_hz)


def _valley_prominence(smoothed: np.ndarray, idx: int) -> float:
    """Topographic prominence of the valley at idx: height of the lower of the
    two walls enclosing it, measured from the valley floor."""
    value = smoothed[idx]
    left = smoothed[:idx]
    lower_left = np.nonzero(left < value)[0]
    left_wall = left[lower_left[-1] + 1 :].max() if lower_left.size else left.max()
    right = smoothed[idx + 1 :]
    lower_right = np.nonzero(right < value)[0]
    right_wall = right[: lower_right[0]].max() if lower_right.size else right.max()
    return float(min(left_wall, right_wall) - value)


def detect_endstates(trace: CorrelationTrace, params: ValleyParams) -> list[int]:
    """Frame indices of the n_motions deepest correlation valleys, ascending.

    The trace is smoothed, interior strict local minima are filtered by
    prominence (relative to the smoothed trace's range), then kept greedily
    deepest-first subject to the pairwise separation constraint.
    """
    values = trace.values
    if values.size <= params.smoothing_window:
        raise ValueError(
            f"trace length {values.size} must exceed smoothing window {params.smoothing_window}"
        )
    if float(values.max() - values.min()) == 0.0:
        raise ValueError("trace has zero range; no valleys to detect")
    min_separation = params.min_separation
    if min_separation is None:
        min_separation = resolve_min_separation(values.size, params.n_motions, trace.frame_rate_hz)

    smoothed = moving_average(values, params.smoothing_window)
    spread = float(smoothed.max() - smoothed.min())
    threshold = params.min_prominence * spread

    minima = [
        i
        for i in range(1, smoothed.size - 1)
        if smoothed[i] < smoothed[i - 1] and smoothed[i] < smoothed[i + 1]
    ]
    qualified = [i for i in minima if _valley_prominence(smoothed, i) >= threshold]

    # deepest first, ties toward the lower frame index
    qualified.sort(key=lambda i: (smoothed[i], i))
    kept: list[int] = []
    for i in qualified:
        if all(abs(i - j) >= min_separation for j in kept):
            kept.append(i)
    if len(kept) < params.n_motions:
        raise InsufficientValleysError(params.n_motions, len(kept))
    return sorted(kept[: params.n_motions])


def _params_for_sequence(seq: Sequence, params: ValleyParams) -> ValleyParams:
    if params.min_separation is not None:
        return params
    sep = resolve_min_separation(
        seq.n_frames, params.n_motions, seq.frame_rate_hz, seq.meta.metronome_period_s
    )
    return ValleyParams(
        n_motions=params.n_motions,
        smoothing_window=params.smoothing_window,
        min_separation=sep,
        min_prominence=params.min_prominence,
    )


def build_dataset(
    trials: list[tuple[Sequence, tuple[str, ...]]], params: ValleyParams
) -> EndStateDataset:
    """Detect end-states in every trial and assemble the class-by-trial dataset.

    Each trial pairs a B-mode sequence with its ordered per-motion class
    labels; every trial must contain the same label set.  Classes are ordered
    as in the first trial's labels.
    """
    if not trials:
        raise ValueError("no trials given")
    labels0 = tuple(trials[0][1])
    if len(labels0) != params.n_motions:
        raise ValueError(f"expected {params.n_motions} labels per trial, got {len(labels0)}")
    if len(set(labels0)) != len(labels0):
        raise ValueError("trial labels must be unique")

    n = len(labels0)
    k = len(trials)
    class_of = {label: i for i, label in enumerate(labels0)}
    arrays = None
    for t, (seq, labels) in enumerate(trials):
        trial_name = seq.meta.trial if seq.meta.trial is not None else str(t)
        labels = tuple(labels)
        if set(labels) != set(labels0) or len(labels) != len(labels0):
            raise ValueError(f"trial {trial_name}: inconsistent label set {labels}")
        if seq.kind != FrameKind.BMODE:
            raise ValueError(f"trial {trial_name}: sequence must be B-mode")
        try:
            indices = detect_endstates(cc_trace(seq), _params_for_sequence(seq, params))
        except ValueError as err:
            raise ValueError(f"trial {trial_name}: {err}") from err
        if arrays is None:
            arrays = np.empty((n, k, seq.m, seq.d), dtype=np.float32)
        for label, frame_idx in zip(labels, indices):
            arrays[class_of[label], t] = seq.frames[frame_idx].values
    return EndStateDataset(arrays, labels0)
