"""Beat detection, windowed heart rate, HRV statistics and error scoring."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .signal import Signal

HR_SANITY_BPM = (20.0, 300.0)


@dataclass(frozen=True, eq=False)
class BeatSeries:
    """Peak times plus the source-time spans they were detected in.

    Intervals are only formed between consecutive peaks of the same span, so
    a gap left by a discarded segment never shows up as one long interval.
    """

    peak_times_s: np.ndarray
    spans: tuple[tuple[float, float], ...] = ()

    def __post_init__(self):
        t = np.asarray(self.peak_times_s, dtype=np.float64)
        if t.ndim != 1 or (t.size > 1 and np.any(np.diff(t) <= 0)):
            raise ValueError("peak times must be strictly increasing")
        object.__setattr__(self, "peak_times_s", t)

    @classmethod
    def from_times(cls, times, start: float, stop: float) -> "BeatSeries":
        return cls(np.asarray(times, dtype=float), ((float(start), float(stop)),))

    def _span_ids(self, times: np.ndarray) -> np.ndarray:
        if not self.spans:
            return np.zeros(times.size, dtype=int)
        ids = np.full(times.size, -1)
        for i, (a, b) in enumerate(self.spans):
            ids[(times >= a) & (times < b)] = i
        return ids

    def intervals(self, start: float = -np.inf, stop: float = np.inf) -> np.ndarray:
        """R-R intervals in ms between consecutive peaks inside ``[start, stop]``."""
        t = self.peak_times_s
        t = t[(t >= start) & (t <= stop)]
        if t.size < 2:
            return np.empty(0)
        ids = self._span_ids(t)
        same = (ids[1:] == ids[:-1]) & (ids[1:] >= 0)
        return (np.diff(t) * 1000.0)[same]

    @property
    def rr_intervals_ms(self) -> np.ndarray:
        return self.intervals()

    def covers(self, start: float, stop: float) -> bool:
        """True when ``[start, stop]`` lies inside a single span."""
        if not self.spans:
            return True
        return any(a - 1e-9 <= start and stop <= b + 1e-9 for a, b in self.spans)


# -- peak detection ------------------------------------------------------------


@dataclass(frozen=True)
class PeakDetectorConfig:
    """Two-moving-average systolic peak detector settings."""

    peak_window_s: float = 0.111
    beat_window_s: float = 0.667
    beta: float = 0.02
    min_relative_amp: float = 0.5
    neighbour_s: float = 1.0
    refine: bool = True


def _moving_average(x: np.ndarray, width: int) -> np.ndarray:
    if width <= 1:
        return x.copy()
    kernel = np.ones(width) / width
    padded = np.pad(x, (width // 2, width - 1 - width // 2), mode="edge")
    return np.convolve(padded, kernel, mode="valid")


def _peak_indices(x: np.ndarray, fs: float, cfg: PeakDetectorConfig) -> np.ndarray:
    y = np.clip(x, 0.0, None) ** 2
    w1 = max(int(round(cfg.peak_window_s * fs)), 1)
    w2 = max(int(round(cfg.beat_window_s * fs)), 1)
    ma_peak = _moving_average(y, w1)
    ma_beat = _moving_average(y, w2)
    thr = ma_beat + cfg.beta * y.mean()
    active = np.concatenate(([0], (ma_peak > thr).astype(np.int8), [0]))
    edges = np.flatnonzero(np.diff(active))
    idx = np.array([a + int(np.argmax(x[a:b])) for a, b in zip(edges[::2], edges[1::2]) if b - a >= w1], dtype=int)
    if idx.size == 0 or cfg.min_relative_amp <= 0:
        return idx
    # drop secondary (dicrotic) waves much smaller than a nearby beat
    amp = np.clip(x[idx], 0.0, None)
    reach = cfg.neighbour_s * fs
    keep = np.array([amp[j] >= cfg.min_relative_amp * amp[np.abs(idx - i) <= reach].max() for j, i in enumerate(idx)])
    return idx[keep]


def _refine(x: np.ndarray, idx: np.ndarray) -> np.ndarray:
    """Parabolic sub-sample offset around each peak index."""
    pos = idx.astype(float)
    inner = (idx > 0) & (idx < x.size - 1)
    i = idx[inner]
    a, b, c = x[i - 1], x[i], x[i + 1]
    denom = a - 2 * b + c
    with np.errstate(divide="ignore", invalid="ignore"):
        off = np.where(denom < 0, 0.5 * (a - c) / denom, 0.0)
    pos[inner] += np.clip(off, -0.5, 0.5)
    return pos


def detect_peaks(signal: Signal, cfg: PeakDetectorConfig = PeakDetectorConfig()) -> BeatSeries:
    """Systolic peaks of a band-passed, normalized PPG signal.

    The signal is mean-centred and its positive part squared; blocks where the
    short (peak-width) moving average rises above the long (beat-width) one
    plus ``beta`` times the mean energy, and that are at least one peak-window
    wide, each contribute their maximum as one beat. A candidate smaller than
    ``min_relative_amp`` of the largest candidate within ``neighbour_s`` is
    dropped; at low heart rates the dicrotic wave otherwise forms its own block.
    Peak positions are refined to sub-sample precision by a parabola fit.
    """
    if signal.duration < 2.0:
        raise ValueError("signal shorter than 2 s")
    times_of = signal.times()
    spans, beats = [], []
    for start, stop in signal.contiguous_regions():
        x = signal.samples[start:stop]
        idx = _peak_indices(x - x.mean(), signal.fs, cfg)
        pos = _refine(x, idx) if cfg.refine else idx.astype(float)
        t_start = times_of[start]
        spans.append((t_start, t_start + (stop - start) / signal.fs))
        beats.append(t_start + pos / signal.fs)
    times = np.concatenate(beats) if beats else np.empty(0)
    return BeatSeries(times, tuple(spans))


# -- heart rate ----------------------------------------------------------------


@dataclass(frozen=True)
class HrWindowConfig:
    window_s: float = 8.0
    step_s: float = 2.0

    def __post_init__(self):
        if not (self.window_s > 0 and 0 < self.step_s):
            raise ValueError("window and step must be positive")

    @property
    def overlap_s(self) -> float:
        return self.window_s - self.step_s


@dataclass(frozen=True)
class HrvWindowConfig:
    window_s: float = 300.0
    overlap_frac: float = 0.95

    def __post_init__(self):
        if not (self.window_s > 0 and 0 <= self.overlap_frac < 1):
            raise ValueError("window must be positive and overlap in [0, 1)")

    @property
    def step_s(self) -> float:
        return self.window_s * (1.0 - self.overlap_frac)


class HrWindow(NamedTuple):
    t_start: float
    bpm: Optional[float]


def window_starts(duration_s: float, window_s: float, step_s: float, t0: float = 0.0) -> np.ndarray:
    count = int(np.floor((duration_s - window_s) / step_s + 1e-9)) + 1
    return t0 + step_s * np.arange(max(count, 0))


def estimate_hr_windows(
    beats: BeatSeries, duration_s: float, cfg: HrWindowConfig = HrWindowConfig(), t0: float = 0.0
) -> list[HrWindow]:
    """Mean-interval heart rate per sliding window.

    A window is missing (``bpm=None``) when it holds fewer than two peaks,
    straddles a time discontinuity, or yields a rate outside 20-300 bpm.
    """
    out = []
    for start in window_starts(duration_s, cfg.window_s, cfg.step_s, t0):
        stop = start + cfg.window_s
        bpm = None
        if beats.covers(start, stop):
            rr = beats.intervals(start, stop)
            if rr.size:
                value = 60000.0 / rr.mean()
                if HR_SANITY_BPM[0] <= value <= HR_SANITY_BPM[1]:
                    bpm = float(value)
        out.append(HrWindow(float(start), bpm))
    return out


# -- scoring -------------------------------------------------------------------


class MaeResult(NamedTuple):
    mae: float
    used: int
    dropped: int


def _as_float(values) -> np.ndarray:
    return np.array([np.nan if v is None else float(v) for v in values], dtype=float)


def compare(est: Sequence, truth: Sequence) -> MaeResult:
    """MAE over index pairs where neither side is missing, with coverage counts."""
    e, t = _as_float(est), _as_float(truth)
    if e.size != t.size:
        raise ValueError(f"length mismatch: {e.size} estimates vs {t.size} references")
    ok = ~(np.isnan(e) | np.isnan(t))
    if not ok.any():
        raise ValueError("no comparable windows")
    return MaeResult(float(np.mean(np.abs(e[ok] - t[ok]))), int(ok.sum()), int((~ok).sum()))


def mae(est: Sequence, truth: Sequence) -> float:
    return compare(est, truth).mae


# -- HRV -----------------------------------------------------------------------


def iqr_filter(rr_ms: Sequence[float]) -> np.ndarray:
    """Keep intervals inside the Tukey fences [Q1 - 1.5 IQR, Q3 + 1.5 IQR]."""
    rr = np.asarray(rr_ms, dtype=float)
    if rr.size < 4:
        raise ValueError("insufficient intervals")
    q1, q3 = np.percentile(rr, [25, 75])
    iqr = q3 - q1
    keep = (rr >= q1 - 1.5 * iqr) & (rr <= q3 + 1.5 * iqr)
    return rr[keep]


def sdnn(rr_ms: Sequence[float]) -> float:
    """Population standard deviation of the intervals (ms)."""
    rr = np.asarray(rr_ms, dtype=float)
    if rr.size < 2:
        raise ValueError("insufficient intervals")
    return float(np.std(rr))


def rmssd(rr_ms: Sequence[float]) -> float:
    rr = np.asarray(rr_ms, dtype=float)
    if rr.size < 2:
        raise ValueError("insufficient intervals")
    d = np.diff(rr)
    return float(np.sqrt(np.mean(d * d)))


class HrvWindow(NamedTuple):
    t_start: float
    sdnn: Optional[float]
    rmssd: Optional[float]


def estimate_hrv_windows(
    beats: BeatSeries, duration_s: float, cfg: HrvWindowConfig = HrvWindowConfig(), t0: float = 0.0
) -> list[HrvWindow]:
    """SDNN and RMSSD per window after IQR outlier rejection.

    Recordings shorter than one window get a single window spanning the whole
    recording. Intervals are pooled across the contiguous spans of the window.
    """
    window = min(cfg.window_s, duration_s)
    out = []
    for start in window_starts(duration_s, window, cfg.step_s, t0):
        rr = beats.intervals(start, start + window)
        s = r = None
        if rr.size >= 4:
            kept = iqr_filter(rr)
            if kept.size >= 2:
                s, r = sdnn(kept), rmssd(kept)
        out.append(HrvWindow(float(start), s, r))
    return out
