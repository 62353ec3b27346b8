"""Scanline subset selection: uniform grids (UDSS) and discriminability-driven
extrema picking on aggregated score curves (DSS on Fisher maxima, CSS on
mutual-information minima)."""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from .endstate import moving_average
from .scoring import AggregatedScore, aggregate
from .seqio import Frame, ScoreMatrix, ScoreMethod


class SubsetStrategy(Enum):
    UDSS = "udss"
    DSS = "dss"
    CSS = "css"


class Polarity(Enum):
    MAXIMA = "maxima"
    MINIMA = "minima"


@dataclass(frozen=True)
class ScanlineSubset:
    """Selected scanline indices (sorted) with their discriminability ranks.

    ranks[i] is the 1-based selection rank of indices[i]: rank 1 was picked
    first (most discriminative for DSS/CSS, leftmost grid slot for UDSS).
    """

    indices: tuple[int, ...]
    strategy: SubsetStrategy
    ranks: tuple[int, ...]

    def __post_init__(self):
        indices = tuple(int(i) for i in self.indices)
        ranks = tuple(int(r) for r in self.ranks)
        object.__setattr__(self, "indices", indices)
        object.__setattr__(self, "ranks", ranks)
        if not indices:
            raise ValueError("subset must contain at least one scanline")
        if any(i < 0 for i in indices):
            raise ValueError("scanline indices must be nonnegative")
        if any(a >= b for a, b in zip(indices, indices[1:])):
            raise ValueError("scanline indices must be strictly increasing")
        if len(ranks) != len(indices) or sorted(ranks) != list(range(1, len(indices) + 1)):
            raise ValueError("ranks must be a permutation of 1..len(indices)")

    def __len__(self) -> int:
        return len(self.indices)

    def to_json(self) -> str:
        payload = {
            "strategy": self.strategy.value,
            "indices": list(self.indices),
            "ranks": list(self.ranks),
        }
        return json.dumps(payload, sort_keys=True, separators=(",", ":")) + "\n"

    @classmethod
    def from_json(cls, text_or_path) -> "ScanlineSubset":
        if isinstance(text_or_path, Path):
            text = text_or_path.read_text(encoding="utf-8")
        else:
            text = str(text_or_path)
            if "\n" not in text and text.endswith(".json"):
                text = Path(text).read_text(encoding="utf-8")
        data = json.loads(text)
        return cls(
            indices=tuple(data["indices"]),
            strategy=SubsetStrategy(data["strategy"]),
            ranks=tuple(data["ranks"]),
        )


def udss(m: int, count: int) -> ScanlineSubset:
    """Uniformly distributed scanlines: one per bin center of an m-wide grid
    split into `count` equal bins."""
    if not (1 <= count <= m):
        raise ValueError(f"count must lie in [1, {m}], got {count}")
    indices = tuple(int((2 * c + 1) * m // (2 * count)) for c in range(count))
    return ScanlineSubset(indices=indices, strategy=SubsetStrategy.UDSS, ranks=tuple(range(1, count + 1)))


def _interior_extrema(smoothed: np.ndarray, polarity: Polarity) -> list[int]:
    """Strict interior extrema; a flat plateau counts once at its leftmost point."""
    sign = 1.0 if polarity == Polarity.MAXIMA else -1.0
    x = sign * smoothed
    result = []
    i = 1
    last = x.size - 1
    while i < last:
        if x[i] <= x[i - 1]:
            i += 1
            continue
        j = i
        while j < last and x[j + 1] == x[i]:
            j += 1
        if j < last and x[j + 1] < x[i]:
            result.append(i)  # leftmost point of the plateau
        i = j + 1
    return result


def extrema_select(
    agg,
    count: int,
    polarity: Polarity,
    smoothing_window: int = 5,
) -> ScanlineSubset:
    """Pick `count` scanlines at the strongest local extrema of the smoothed
    aggregated curve (an AggregatedScore or any nonnegative 1-D signal;
    selection depends only on value ranking, so scaling is irrelevant).

    Extrema are ranked by value (descending for maxima, ascending for minima,
    ties to the lower index).  If fewer interior extrema exist, remaining
    slots are filled by global value ranking, skipping indices within +/-2 of
    anything already chosen; the neighbor exclusion is dropped only if it
    would leave slots unfilled.
    """
    values = agg.values if isinstance(agg, AggregatedScore) else agg
    values = np.asarray(values, dtype=np.float64)
    m = values.size
    if not (1 <= count <= m):
        raise ValueError(f"count must lie in [1, {m}], got {count}")
    smoothed = moving_average(values, smoothing_window)
    descending = polarity == Polarity.MAXIMA

    def rank_key(i: int):
        return (-smoothed[i], i) if descending else (smoothed[i], i)

    chosen: list[int] = sorted(_interior_extrema(smoothed, polarity), key=rank_key)[:count]
    if len(chosen) < count:
        everywhere = sorted(range(m), key=rank_key)
        taken = set(chosen)
        for i in everywhere:
            if len(chosen) >= count:
                break
            if any(abs(i - j) <= 2 for j in chosen):
                continue
            chosen.append(i)
            taken.add(i)
        for i in everywhere:  # exclusion left slots open; fill without it
            if len(chosen) >= count:
                break
            if i not in taken:
                chosen.append(i)
                taken.add(i)
    pairs = sorted((idx, pos + 1) for pos, idx in enumerate(chosen))
    strategy = SubsetStrategy.DSS if descending else SubsetStrategy.CSS
    return ScanlineSubset(
        indices=tuple(i for i, _ in pairs),
        strategy=strategy,
        ranks=tuple(r for _, r in pairs),
    )


def dss(fc_matrix: ScoreMatrix, count: int, smoothing_window: int = 5) -> ScanlineSubset:
    """Distance-based selection: local maxima of the aggregated Fisher scores."""
    if fc_matrix.method != ScoreMethod.FC:
        raise ValueError("DSS requires a Fisher-criterion score matrix")
    return extrema_select(aggregate(fc_matrix), count, Polarity.MAXIMA, smoothing_window)


def css(mi_matrix: ScoreMatrix, count: int, smoothing_window: int = 5) -> ScanlineSubset:
    """Correlation-based selection: local minima of the aggregated mutual
    information (low cross-class similarity marks discriminative scanlines)."""
    if mi_matrix.method != ScoreMethod.MI:
        raise ValueError("CSS requires a mutual-information score matrix")
    return extrema_select(aggregate(mi_matrix), count, Polarity.MINIMA, smoothing_window)


def extract_feature_map(frame: Frame, subset: ScanlineSubset) -> Frame:
    """Reduced frame keeping only the subset's scanlines, ascending order."""
    if subset.indices[-1] >= frame.m:
        raise ValueError(
            f"subset index {subset.indices[-1]} out of range for {frame.m} scanlines"
        )
    return Frame(frame.values[list(subset.indices)], frame.kind)
