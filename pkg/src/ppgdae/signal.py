"""Signal containers, segmentation, normalization and the erase/merge algebra."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import NamedTuple, Optional, Sequence

import numpy as np

SEGMENT_SECONDS = 30.0
DEFAULT_FS = 64.0


class Span(NamedTuple):
    """A run of output samples ``[start, stop)`` copied from source segment ``index``.

    ``t0`` is the source time (seconds) of sample ``start``.
    """

    start: int
    stop: int
    index: int
    t0: float


@dataclass(frozen=True, eq=False)
class Signal:
    """Uniformly sampled trace.

    Parameters
    ----------
    samples : array_like
        Amplitudes, stored as float64.
    fs : float
        Sampling rate in Hz.
    t0 : float
        Start time in seconds relative to the parent recording.
    provenance : tuple of Span
        Set by :func:`join`; empty for a contiguous signal.
    """

    samples: np.ndarray
    fs: float = DEFAULT_FS
    t0: float = 0.0
    provenance: tuple = field(default=())

    def __post_init__(self):
        arr = np.asarray(self.samples, dtype=np.float64)
        if arr.ndim != 1:
            raise ValueError("signal samples must be one-dimensional")
        if arr.size == 0:
            raise ValueError("empty signal")
        if not self.fs > 0:
            raise ValueError("sampling rate must be positive")
        arr.setflags(write=False)
        object.__setattr__(self, "samples", arr)

    def __len__(self) -> int:
        return self.samples.size

    @property
    def duration(self) -> float:
        return self.samples.size / self.fs

    def times(self) -> np.ndarray:
        """Source time of every sample, following the provenance map when present."""
        if not self.provenance:
            return self.t0 + np.arange(self.samples.size) / self.fs
        t = np.empty(self.samples.size)
        for span in self.provenance:
            t[span.start : span.stop] = span.t0 + np.arange(span.stop - span.start) / self.fs
        return t

    def spans(self) -> list[Span]:
        """Provenance spans, or one span covering the whole signal."""
        if self.provenance:
            return list(self.provenance)
        return [Span(0, self.samples.size, 0, self.t0)]

    def contiguous_regions(self) -> list[tuple[int, int]]:
        """Sample ranges not interrupted by a time discontinuity."""
        regions: list[list[int]] = []
        prev: Optional[Span] = None
        for span in self.spans():
            if prev is not None and span.index == prev.index + 1 and np.isclose(
                span.t0, prev.t0 + (prev.stop - prev.start) / self.fs
            ):
                regions[-1][1] = span.stop
            else:
                regions.append([span.start, span.stop])
            prev = span
        return [(a, b) for a, b in regions]

    def discontinuities(self) -> list[int]:
        """Sample positions where the source time jumps."""
        return [start for start, _ in self.contiguous_regions()[1:]]

    def with_samples(self, samples) -> "Signal":
        return replace(self, samples=samples)


@dataclass(frozen=True, eq=False)
class BinaryMask:
    """Per-sample 0/1 flags aligned with a :class:`Signal`."""

    flags: np.ndarray
    fs: float = DEFAULT_FS

    def __post_init__(self):
        arr = np.asarray(self.flags)
        if arr.ndim != 1:
            raise ValueError("mask must be one-dimensional")
        if arr.size and not np.isin(arr, (0, 1)).all():
            raise ValueError("mask values must be 0 or 1")
        arr = arr.astype(np.uint8)
        arr.setflags(write=False)
        object.__setattr__(self, "flags", arr)

    def __len__(self) -> int:
        return self.flags.size

    @property
    def corrupted_fraction(self) -> float:
        return float(self.flags.mean()) if self.flags.size else 0.0

    @classmethod
    def zeros(cls, n: int, fs: float = DEFAULT_FS) -> "BinaryMask":
        return cls(np.zeros(n, dtype=np.uint8), fs)

    def runs(self) -> list[tuple[int, int]]:
        """``[start, stop)`` ranges where the flag is 1."""
        padded = np.concatenate(([0], self.flags.astype(np.int8), [0]))
        edges = np.flatnonzero(np.diff(padded))
        return [(int(a), int(b)) for a, b in zip(edges[::2], edges[1::2])]

    def slice(self, start: int, stop: int) -> "BinaryMask":
        return BinaryMask(self.flags[start:stop], self.fs)


@dataclass(frozen=True, eq=False)
class Segment:
    signal: Signal
    source_id: str = ""
    index: int = 0

    def __len__(self) -> int:
        return len(self.signal)


def segment_length(fs: float, window_s: float = SEGMENT_SECONDS) -> int:
    return int(round(window_s * fs))


def segment(recording: Signal, window_s: float = SEGMENT_SECONDS, source_id: str = "") -> list[Segment]:
    """Split into consecutive non-overlapping windows, dropping a short remainder."""
    if not window_s > 0:
        raise ValueError("window_s must be positive")
    n = segment_length(recording.fs, window_s)
    count = len(recording) // n
    x = recording.samples
    return [
        Segment(Signal(x[i * n : (i + 1) * n], recording.fs, recording.t0 + i * n / recording.fs), source_id, i)
        for i in range(count)
    ]


def normalize_minmax(signal: Signal) -> Signal:
    """Affine map onto [0, 1]; a constant signal maps to 0.5 everywhere."""
    x = signal.samples
    lo, hi = x.min(), x.max()
    if hi == lo:
        return signal.with_samples(np.full_like(x, 0.5))
    return signal.with_samples((x - lo) / (hi - lo))


def _check_same_length(*arrays) -> None:
    lengths = {len(a) for a in arrays}
    if len(lengths) != 1:
        raise ValueError(f"length mismatch: {sorted(lengths)}")


def erase(signal: Signal, mask: BinaryMask) -> Signal:
    """Zero the samples flagged in ``mask``."""
    _check_same_length(signal.samples, mask.flags)
    return signal.with_samples(signal.samples * (1 - mask.flags))


def merge(x_in: Signal, y_out: Signal, mask: BinaryMask) -> Signal:
    """Take ``y_out`` where the mask is set and ``x_in`` elsewhere.

    Unflagged samples are copied from ``x_in`` untouched rather than computed
    as ``x * 1 + y * 0``, which would not be bit-exact for ``y`` = inf/nan.
    """
    _check_same_length(x_in.samples, y_out.samples, mask.flags)
    out = np.where(mask.flags.astype(bool), y_out.samples, x_in.samples)
    return x_in.with_samples(out)


def join(segments: Sequence[Segment]) -> Signal:
    """Concatenate accepted segments and record where each one came from."""
    if not segments:
        raise ValueError("nothing to join")
    fs = segments[0].signal.fs
    if any(s.signal.fs != fs for s in segments):
        raise ValueError("mixed sampling rates")
    spans, pos = [], 0
    for seg in segments:
        n = len(seg.signal)
        spans.append(Span(pos, pos + n, seg.index, seg.signal.t0))
        pos += n
    samples = np.concatenate([s.signal.samples for s in segments])
    return Signal(samples, fs, segments[0].signal.t0, tuple(spans))
