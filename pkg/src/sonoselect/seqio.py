"""Core data model and file containers.

Frames, recorded sequences, end-state datasets and score matrices, plus the
binary SMG1/SMGD containers and the score CSV format.  Values are stored as
little-endian float32 on disk and in memory; all downstream math promotes to
float64.  Every type is immutable after construction.
"""

from __future__ import annotations

import io
import json
import struct
from dataclasses import dataclass, field
from enum import Enum, IntEnum
from pathlib import Path
from typing import BinaryIO, Iterable, TextIO

import numpy as np

SMG1_MAGIC = b"SMG1"
SMGD_MAGIC = b"SMGD"
CONTAINER_VERSION = 1

# magic(4) version(1) kind(1) reserved(2) n_frames(4) m(4) d(4) frame_rate(4)
_SEQ_HEADER = struct.Struct("<4sBBHIIIf")
# magic(4) version(1) reserved(3) n(4) k(4) m(4) d(4)
_DS_HEADER = struct.Struct("<4sB3sIIII")
_TRAILER_LEN = struct.Struct("<I")


class FormatError(ValueError):
    """Raised when a container or CSV violates its format contract."""


class FrameKind(IntEnum):
    RF = 0
    BMODE = 1


class ScoreMethod(Enum):
    FC = "fc"
    MI = "mi"


def _readonly_f32(values, shape_name: str, ndim: int) -> np.ndarray:
    arr = np.array(values, dtype=np.float32, order="C")
    if arr.ndim != ndim:
        raise ValueError(f"{shape_name} must be {ndim}-dimensional, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Frame:
    """One ultrasound frame: m scanlines by d depth samples."""

    values: np.ndarray
    kind: FrameKind = FrameKind.BMODE

    def __post_init__(self):
        arr = _readonly_f32(self.values, "frame values", 2)
        object.__setattr__(self, "values", arr)
        m, d = arr.shape
        if m < 1 or d < 2:
            raise ValueError(f"frame must have m >= 1 scanlines and d >= 2 depth samples, got {m}x{d}")
        if not np.isfinite(arr).all():
            raise ValueError("frame values must be finite")
        if self.kind == FrameKind.BMODE and (arr.min() < 0.0 or arr.max() > 1.0):
            raise ValueError("B-mode frame values must lie in [0, 1]")

    @property
    def m(self) -> int:
        return self.values.shape[0]

    @property
    def d(self) -> int:
        return self.values.shape[1]

    def __eq__(self, other) -> bool:
        if not isinstance(other, Frame):
            return NotImplemented
        return self.kind == other.kind and np.array_equal(self.values, other.values)


@dataclass(frozen=True)
class SequenceMeta:
    """Optional acquisition metadata carried in the container trailer."""

    subject: str | None = None
    trial: str | None = None
    metronome_period_s: float | None = None

    def to_dict(self) -> dict:
        out = {}
        if self.subject is not None:
            out["subject"] = self.subject
        if self.trial is not None:
            out["trial"] = self.trial
        if self.metronome_period_s is not None:
            out["metronome_period_s"] = self.metronome_period_s
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "SequenceMeta":
        period = data.get("metronome_period_s")
        return cls(
            subject=data.get("subject"),
            trial=data.get("trial"),
            metronome_period_s=None if period is None else float(period),
        )


@dataclass(frozen=True, eq=False)
class Sequence:
    """An ordered recording of frames at a fixed frame rate (one trial)."""

    frames: tuple[Frame, ...]
    frame_rate_hz: float
    meta: SequenceMeta = field(default_factory=SequenceMeta)

    def __post_init__(self):
        frames = tuple(self.frames)
        object.__setattr__(self, "frames", frames)
        if len(frames) < 2:
            raise ValueError(f"sequence needs at least 2 frames, got {len(frames)}")
        first = frames[0]
        for i, f in enumerate(frames):
            if f.values.shape != first.values.shape or f.kind != first.kind:
                raise ValueError(
                    f"frame {i} has shape {f.values.shape} kind {f.kind.name}, "
                    f"expected {first.values.shape} kind {first.kind.name}"
                )
        if not (self.frame_rate_hz > 0):
            raise ValueError(f"frame rate must be positive, got {self.frame_rate_hz}")

    @property
    def n_frames(self) -> int:
        return len(self.frames)

    @property
    def m(self) -> int:
        return self.frames[0].m

    @property
    def d(self) -> int:
        return self.frames[0].d

    @property
    def kind(self) -> FrameKind:
        return self.frames[0].kind

    def stacked(self) -> np.ndarray:
        """All frame values as one (n_frames, m, d) float32 array."""
        return np.stack([f.values for f in self.frames])

    def __eq__(self, other) -> bool:
        if not isinstance(other, Sequence):
            return NotImplemented
        return (
            self.frames == other.frames
            and self.frame_rate_hz == other.frame_rate_hz
            and self.meta == other.meta
        )


@dataclass(frozen=True, eq=False)
class EndStateDataset:
    """End-state frames for n motion classes over k trials each.

    `values` has shape (n, k, m, d) with B-mode intensities in [0, 1];
    `labels` names the n classes in storage order.
    """

    values: np.ndarray
    labels: tuple[str, ...]

    def __post_init__(self):
        arr = _readonly_f32(self.values, "dataset values", 4)
        object.__setattr__(self, "values", arr)
        object.__setattr__(self, "labels", tuple(str(s) for s in self.labels))
        n, k, m, d = arr.shape
        if n < 2:
            raise ValueError(f"dataset needs at least 2 classes, got n={n}")
        if k < 1:
            raise ValueError(f"dataset needs at least 1 trial per class, got k={k}")
        if m < 1 or d < 2:
            raise ValueError(f"dataset frames must be m >= 1 by d >= 2, got {m}x{d}")
        if len(self.labels) != n:
            raise ValueError(f"expected {n} class labels, got {len(self.labels)}")
        if len(set(self.labels)) != n:
            raise ValueError("class labels must be unique")
        if not np.isfinite(arr).all():
            raise ValueError("dataset values must be finite")
        if arr.min() < 0.0 or arr.max() > 1.0:
            raise ValueError("dataset values must lie in [0, 1] (B-mode)")

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def k(self) -> int:
        return self.values.shape[1]

    @property
    def m(self) -> int:
        return self.values.shape[2]

    @property
    def d(self) -> int:
        return self.values.shape[3]

    def frame(self, class_index: int, trial_index: int) -> Frame:
        return Frame(self.values[class_index, trial_index], FrameKind.BMODE)

    def __eq__(self, other) -> bool:
        if not isinstance(other, EndStateDataset):
            return NotImplemented
        return self.labels == other.labels and np.array_equal(self.values, other.values)


@dataclass(frozen=True, eq=False)
class ScoreMatrix:
    """Per-class, per-scanline discriminability scores.

    `per_trial` holds the raw class-vs-rest score sums, shape (n, m, k);
    `averaged` is the trial mean normalized per class row to max 1, shape (n, m).
    """

    method: ScoreMethod
    per_trial: np.ndarray
    averaged: np.ndarray
    labels: tuple[str, ...]

    def __post_init__(self):
        pt = np.array(self.per_trial, dtype=np.float64, order="C")
        av = np.array(self.averaged, dtype=np.float64, order="C")
        pt.setflags(write=False)
        av.setflags(write=False)
        object.__setattr__(self, "per_trial", pt)
        object.__setattr__(self, "averaged", av)
        object.__setattr__(self, "labels", tuple(str(s) for s in self.labels))
        if pt.ndim != 3:
            raise ValueError(f"per_trial must be (n, m, k), got shape {pt.shape}")
        n, m, k = pt.shape
        if av.shape != (n, m):
            raise ValueError(f"averaged must be (n, m) = {(n, m)}, got {av.shape}")
        if len(self.labels) != n:
            raise ValueError(f"expected {n} class labels, got {len(self.labels)}")
        if not (np.isfinite(pt).all() and np.isfinite(av).all()):
            raise ValueError("scores must be finite")
        if pt.min() < 0 or av.min() < 0:
            raise ValueError("scores must be nonnegative")
        if av.max(initial=0.0) > 1.0:
            raise ValueError("averaged scores must lie in [0, 1]")
        row_max = av.max(axis=1)
        bad = (row_max != 1.0) & (row_max != 0.0)
        if bad.any():
            raise ValueError("each averaged class row must have max exactly 1 (or be all zero)")

    @property
    def n(self) -> int:
        return self.per_trial.shape[0]

    @property
    def m(self) -> int:
        return self.per_trial.shape[1]

    @property
    def k(self) -> int:
        return self.per_trial.shape[2]

    def __eq__(self, other) -> bool:
        if not isinstance(other, ScoreMatrix):
            return NotImplemented
        return (
            self.method == other.method
            and self.labels == other.labels
            and np.array_equal(self.per_trial, other.per_trial)
            and np.array_equal(self.averaged, other.averaged)
        )


# ---------------------------------------------------------------------------
# binary containers
# ---------------------------------------------------------------------------


def _json_trailer(payload: dict) -> bytes:
    return json.dumps(payload, sort_keys=True, separators=(",", ":")).encode("utf-8")


def _read_exact(src: BinaryIO, count: int, what: str) -> bytes:
    data = src.read(count)
    if len(data) != count:
        raise FormatError(f"truncated {what}: expected {count} bytes, got {len(data)}")
    return data


def _write_bytes(destination, data: bytes) -> int:
    if isinstance(destination, (str, Path)):
        with open(destination, "wb") as fh:
            fh.write(data)
    else:
        destination.write(data)
    return len(data)


def _as_source(source) -> BinaryIO:
    if isinstance(source, (str, Path)):
        return open(source, "rb")
    if isinstance(source, (bytes, bytearray)):
        return io.BytesIO(source)
    return source


def write_sequence(seq: Sequence, destination) -> int:
    """Serialize a sequence into the SMG1 container; returns bytes written.

    Deterministic: identical sequences produce identical bytes.  The JSON
    metadata trailer is omitted entirely when the metadata is empty.
    """
    header = _SEQ_HEADER.pack(
        SMG1_MAGIC,
        CONTAINER_VERSION,
        int(seq.kind),
        0,
        seq.n_frames,
        seq.m,
        seq.d,
        seq.frame_rate_hz,
    )
    payload = seq.stacked().astype("<f4", copy=False).tobytes()
    meta = seq.meta.to_dict()
    blob = header + payload
    if meta:
        trailer = _json_trailer(meta)
        blob += _TRAILER_LEN.pack(len(trailer)) + trailer
    return _write_bytes(destination, blob)


def _read_trailer(src: BinaryIO, what: str) -> dict:
    rest = src.read()
    if not rest:
        return {}
    if len(rest) < _TRAILER_LEN.size:
        raise FormatError(f"truncated {what} trailer: expected 4 length bytes, got {len(rest)}")
    (length,) = _TRAILER_LEN.unpack_from(rest)
    body = rest[_TRAILER_LEN.size:]
    if len(body) != length:
        raise FormatError(
            f"{what} trailer length mismatch: declared {length} bytes, found {len(body)}"
        )
    try:
        meta = json.loads(body.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as err:
        raise FormatError(f"{what} trailer is not valid JSON: {err}") from err
    if not isinstance(meta, dict):
        raise FormatError(f"{what} trailer must be a JSON object")
    return meta


def read_sequence(source) -> Sequence:
    """Parse an SMG1 container; inverse of write_sequence."""
    src = _as_source(source)
    try:
        raw = _read_exact(src, _SEQ_HEADER.size, "SMG1 header")
        magic, version, kind_code, reserved, n_frames, m, d, rate = _SEQ_HEADER.unpack(raw)
        if magic != SMG1_MAGIC:
            raise FormatError(f"bad magic {magic!r}, expected {SMG1_MAGIC!r}")
        if version != CONTAINER_VERSION:
            raise FormatError(f"unsupported SMG1 version {version}")
        if kind_code not in (0, 1):
            raise FormatError(f"unknown frame kind code {kind_code}")
        if reserved != 0:
            raise FormatError(f"reserved header bytes must be zero, got {reserved}")
        kind = FrameKind(kind_code)
        count = n_frames * m * d
        payload = _read_exact(src, count * 4, "SMG1 payload")
        meta = _read_trailer(src, "SMG1")
    finally:
        if isinstance(source, (str, Path, bytes, bytearray)):
            src.close()
    values = np.frombuffer(payload, dtype="<f4").reshape(n_frames, m, d)
    if not np.isfinite(values).all():
        raise FormatError("payload contains non-finite values")
    if kind == FrameKind.BMODE and count and (values.min() < 0.0 or values.max() > 1.0):
        raise FormatError("B-mode payload values must lie in [0, 1]")
    frames = tuple(Frame(values[i], kind) for i in range(n_frames))
    return Sequence(frames, frame_rate_hz=rate, meta=SequenceMeta.from_dict(meta))


def write_dataset(ds: EndStateDataset, destination) -> int:
    """Serialize an end-state dataset into the SMGD container."""
    header = _DS_HEADER.pack(SMGD_MAGIC, CONTAINER_VERSION, b"\0\0\0", ds.n, ds.k, ds.m, ds.d)
    payload = ds.values.astype("<f4", copy=False).tobytes()
    trailer = _json_trailer({"labels": list(ds.labels)})
    blob = header + payload + _TRAILER_LEN.pack(len(trailer)) + trailer
    return _write_bytes(destination, blob)


def read_dataset(source) -> EndStateDataset:
    """Parse an SMGD container; inverse of write_dataset."""
    src = _as_source(source)
    try:
        raw = _read_exact(src, _DS_HEADER.size, "SMGD header")
        magic, version, reserved, n, k, m, d, = _DS_HEADER.unpack(raw)
        if magic != SMGD_MAGIC:
            raise FormatError(f"bad magic {magic!r}, expected {SMGD_MAGIC!r}")
        if version != CONTAINER_VERSION:
            raise FormatError(f"unsupported SMGD version {version}")
        if reserved != b"\0\0\0":
            raise FormatError("reserved header bytes must be zero")
        count = n * k * m * d
        payload = _read_exact(src, count * 4, "SMGD payload")
        meta = _read_trailer(src, "SMGD")
    finally:
        if isinstance(source, (str, Path, bytes, bytearray)):
            src.close()
    labels = meta.get("labels")
    if not isinstance(labels, list) or len(labels) != n:
        found = len(labels) if isinstance(labels, list) else "none"
        raise FormatError(f"SMGD trailer must list {n} class labels, found {found}")
    values = np.frombuffer(payload, dtype="<f4").reshape(n, k, m, d)
    if not np.isfinite(values).all():
        raise FormatError("payload contains non-finite values")
    if count and (values.min() < 0.0 or values.max() > 1.0):
        raise FormatError("dataset payload values must lie in [0, 1]")
    return EndStateDataset(values, tuple(labels))


# ---------------------------------------------------------------------------
# score CSV
# ---------------------------------------------------------------------------


def format_score(value: float) -> str:
    """Render a score with 9 significant digits (trailing zeros kept)."""
    return format(float(value), "#.9g")


def write_scores(scores: ScoreMatrix, destination=None) -> str:
    """Emit the averaged score matrix as CSV; returns the CSV text.

    Header row is ``class,s0,...,s(m-1)``, one row per class label, plus a
    trailing ``aggregate`` row holding the max-normalized column sums.
    """
    lines = ["class," + ",".join(f"s{j}" for j in range(scores.m))]
    for label, row in zip(scores.labels, scores.averaged):
        lines.append(label + "," + ",".join(format_score(v) for v in row))
    col_sums = scores.averaged.sum(axis=0)
    peak = col_sums.max(initial=0.0)
    agg = col_sums / peak if peak > 0 else np.zeros_like(col_sums)
    lines.append("aggregate," + ",".join(format_score(v) for v in agg))
    text = "\n".join(lines) + "\n"
    if destination is not None:
        if isinstance(destination, (str, Path)):
            Path(destination).write_text(text, encoding="utf-8")
        else:
            destination.write(text)
    return text


@dataclass(frozen=True)
class ScoreTable:
    """Parsed score CSV: class labels, averaged rows, optional aggregate row."""

    labels: tuple[str, ...]
    averaged: np.ndarray
    aggregate: np.ndarray | None

    @property
    def m(self) -> int:
        return self.averaged.shape[1]


def read_scores(source) -> ScoreTable:
    """Parse a score CSV produced by write_scores; `source` may be a path,
    the CSV text itself, or a text stream."""
    if isinstance(source, Path):
        text = source.read_text(encoding="utf-8")
    elif isinstance(source, str):
        text = Path(source).read_text(encoding="utf-8") if "\n" not in source else source
    else:
        text = source.read()
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise FormatError("empty score CSV")
    header = lines[0].split(",")
    if header[0] != "class" or header[1:] != [f"s{j}" for j in range(len(header) - 1)]:
        raise FormatError(f"bad score CSV header: {lines[0]!r}")
    m = len(header) - 1
    labels: list[str] = []
    rows: list[list[float]] = []
    aggregate = None
    for ln in lines[1:]:
        cells = ln.split(",")
        if len(cells) != m + 1:
            raise FormatError(f"score CSV row has {len(cells) - 1} values, expected {m}")
        try:
            values = [float(c) for c in cells[1:]]
        except ValueError as err:
            raise FormatError(f"score CSV has a non-numeric value: {err}") from err
        if cells[0] == "aggregate":
            aggregate = values
        else:
            labels.append(cells[0])
            rows.append(values)
    if not rows:
        raise FormatError("score CSV has no class rows")
    return ScoreTable(
        labels=tuple(labels),
        averaged=np.asarray(rows, dtype=np.float64),
        aggregate=None if aggregate is None else np.asarray(aggregate, dtype=np.float64),
    )
