"""RF to B-mode conversion: envelope detection, square-root compression,
max normalization."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .seqio import Frame, FrameKind, Sequence


class NormalizationScope(Enum):
    PER_FRAME = "per_frame"
    PER_SEQUENCE = "per_sequence"


@dataclass(frozen=True)
class PreprocessConfig:
    normalization_scope: NormalizationScope = NormalizationScope.PER_FRAME


def analytic_envelope(scanline) -> np.ndarray:
    """Envelope of one scanline as the magnitude of its analytic signal.

    The analytic signal is built in the frequency domain: keep DC (and the
    Nyquist bin for even lengths), double positive frequencies, zero negative
    frequencies.  Input must be finite with at least 2 samples.
    """
    x = np.asarray(scanline, dtype=np.float64)
    if x.ndim != 1 or x.size < 2:
        raise ValueError(f"scanline must be a 1-D vector with d >= 2, got shape {x.shape}")
    if not np.isfinite(x).all():
        raise ValueError("scanline contains non-finite values")
    d = x.size
    spectrum = np.fft.fft(x)
    gain = np.zeros(d)
    gain[0] = 1.0
    if d % 2 == 0:
        gain[1 : d // 2] = 2.0
        gain[d // 2] = 1.0
    else:
        gain[1 : (d + 1) // 2] = 2.0
    return np.abs(np.fft.ifft(spectrum * gain))


def _sqrt_normalize(values: np.ndarray, peak: float) -> np.ndarray:
    compressed = np.sqrt(values)
    if peak <= 0.0:
        return np.zeros_like(compressed)
    return compressed / peak


def compress_normalize(frame: Frame, cfg: PreprocessConfig = PreprocessConfig()) -> Frame:
    """Square-root compress a nonnegative envelope frame and normalize to [0, 1].

    A single frame is its own normalization scope, so both scope settings
    behave identically here; an all-zero frame maps to all zeros.
    """
    values = np.asarray(frame.values, dtype=np.float64)
    if values.min() < 0.0:
        raise ValueError("envelope values must be nonnegative")
    peak = float(np.sqrt(values.max()))
    return Frame(_sqrt_normalize(values, peak), FrameKind.BMODE)


def preprocess_sequence(seq: Sequence, cfg: PreprocessConfig = PreprocessConfig()) -> Sequence:
    """Convert an RF sequence to a normalized B-mode sequence.

    Each scanline is envelope-detected, square-root compressed, then divided
    by the maximum over the configured scope (frame or whole sequence).
    Dimensions, frame rate and metadata are preserved.
    """
    if seq.kind != FrameKind.RF:
        raise ValueError("sequence is already B-mode")
    envelopes = []
    for frame in seq.frames:
        env = np.empty(frame.values.shape, dtype=np.float64)
        for j in range(frame.m):
            env[j] = analytic_envelope(frame.values[j].astype(np.float64))
        envelopes.append(env)
    if cfg.normalization_scope == NormalizationScope.PER_SEQUENCE:
        peak = float(np.sqrt(max(env.max() for env in envelopes)))
        frames = tuple(Frame(_sqrt_normalize(env, peak), FrameKind.BMODE) for env in envelopes)
    else:
        frames = tuple(
            Frame(_sqrt_normalize(env, float(np.sqrt(env.max()))), FrameKind.BMODE)
            for env in envelopes
        )
    return Sequence(frames, frame_rate_hz=seq.frame_rate_hz, meta=seq.meta)
