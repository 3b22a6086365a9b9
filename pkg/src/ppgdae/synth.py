"""Synthetic PPG with known beats, and motion-artifact style corruption.

Every random draw goes through ``numpy.random.Generator(PCG64(seed))``. PCG64
is numpy's documented default bit generator and its stream for a given seed is
stable across platforms, so seeded corpora regenerate identically.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy import optimize, signal as sps

from .signal import DEFAULT_FS, SEGMENT_SECONDS, BinaryMask, Signal, normalize_minmax, segment_length

MAX_CORRUPTED_FRACTION = 0.75
HR_LIMITS_BPM = (30.0, 220.0)


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def derive_seed(master: int, stage: str) -> int:
    """Stable 63-bit seed for a named stage of a run seeded with ``master``.

    The stage name is folded in byte by byte so the derivation does not depend
    on Python's salted ``hash``.
    """
    words = [int(master) & 0xFFFFFFFF, (int(master) >> 32) & 0xFFFFFFFF] + list(stage.encode("utf-8"))
    return int(np.random.SeedSequence(words).generate_state(1, dtype=np.uint64)[0] >> 1)


@dataclass(frozen=True)
class BeatTemplateParams:
    """Two-Gaussian pulse: a systolic lobe at the beat time and a later dicrotic lobe.

    Widths are Gaussian standard deviations in seconds; the dicrotic delay is
    a fraction of the current beat period.
    """

    systolic_amp: float = 1.0
    systolic_width_s: float = 0.08
    dicrotic_amp: float = 0.35
    dicrotic_width_s: float = 0.12
    dicrotic_delay_frac: float = 0.45

    def __post_init__(self):
        if not (self.systolic_amp > 0 and self.dicrotic_amp > 0):
            raise ValueError("template amplitudes must be positive")
        if not (self.systolic_width_s > 0 and self.dicrotic_width_s > 0):
            raise ValueError("template widths must be positive")
        if not self.dicrotic_amp < self.systolic_amp:
            raise ValueError("dicrotic lobe must be smaller than the systolic lobe")
        if not 0 < self.dicrotic_delay_frac < 1:
            raise ValueError("dicrotic_delay_frac must lie in (0, 1)")


@dataclass(frozen=True)
class HrvModulation:
    depth_bpm: float = 0.0
    freq_hz: float = 0.1


@dataclass(frozen=True)
class NoiseSpec:
    """Corruption recipe.

    ``bw_amp`` and ``burst_amp`` are relative to the unit range of a normalized
    clean signal. ``fm_jitter_frac`` bounds the fractional change of the local
    beat period inside bursts.
    """

    bw_amp: float = 0.3
    bw_freq_hz: float = 0.2
    fm_jitter_frac: float = 0.2
    burst_amp: float = 2.0
    burst_count: int = 3
    burst_len_s: tuple[float, float] = (2.0, 8.0)
    seed: int = 0

    def __post_init__(self):
        if self.bw_amp < 0 or self.burst_amp < 0 or self.fm_jitter_frac < 0:
            raise ValueError("noise amplitudes must be non-negative")
        if self.bw_amp > 0 and not 0.05 <= self.bw_freq_hz <= 0.5:
            raise ValueError("bw_freq_hz must lie in [0.05, 0.5]")
        if self.burst_count < 0:
            raise ValueError("burst_count must be non-negative")
        lo, hi = self.burst_len_s
        if not 0 < lo <= hi:
            raise ValueError("burst_len_s must be a positive range")


@dataclass(frozen=True, eq=False)
class GroundTruth:
    peak_times_s: np.ndarray
    noise_mask: BinaryMask
    hr_trajectory_bpm: np.ndarray = field(repr=False)

    def rr_ms(self) -> np.ndarray:
        return np.diff(self.peak_times_s) * 1000.0


class CorruptionBudgetError(ValueError):
    pass


def _phase(t, hr_base, depth, freq, theta, phi0):
    """Cumulative beat count at time ``t`` for the sinusoidally modulated rate."""
    t = np.asarray(t, dtype=float)
    beats = hr_base / 60.0 * t
    if depth:
        w = 2 * np.pi * freq
        beats = beats - depth / 60.0 / w * (np.cos(w * t + theta) - np.cos(theta))
    return phi0 + beats


def beat_times(duration_s, hr_base_bpm, hrv: HrvModulation, theta, phi0, margin_s=0.0) -> np.ndarray:
    """Times where the modulated phase crosses an integer, within ``[-margin, duration + margin)``."""
    args = (hr_base_bpm, hrv.depth_bpm, hrv.freq_hz, theta, phi0)
    lo, hi = -margin_s, duration_s + margin_s
    k_lo = int(np.ceil(_phase(lo, *args)))
    k_hi = int(np.floor(_phase(hi, *args)))
    # phase is strictly increasing, so each integer has exactly one crossing
    step = 60.0 / (hr_base_bpm + hrv.depth_bpm)
    times = []
    t_prev = lo
    for k in range(k_lo, k_hi + 1):
        f = lambda t: _phase(t, *args) - k
        upper = t_prev + step
        while f(upper) < 0:
            upper += step
        t_k = optimize.brentq(f, t_prev, upper, xtol=1e-12, rtol=1e-14)
        times.append(t_k)
        t_prev = t_k
    times = np.array(times)
    return times[(times >= lo) & (times < hi)]


def render_beats(t: np.ndarray, peaks: np.ndarray, template: BeatTemplateParams) -> np.ndarray:
    x = np.zeros_like(t)
    periods = np.diff(peaks)
    periods = np.append(periods, periods[-1] if periods.size else 1.0)
    for tk, period in zip(peaks, periods):
        near = np.abs(t - tk) < 6 * max(template.systolic_width_s, template.dicrotic_width_s) + period
        tt = t[near]
        x[near] += template.systolic_amp * np.exp(-0.5 * ((tt - tk) / template.systolic_width_s) ** 2)
        td = tk + template.dicrotic_delay_frac * period
        x[near] += template.dicrotic_amp * np.exp(-0.5 * ((tt - td) / template.dicrotic_width_s) ** 2)
    return x


def gen_clean(
    duration_s: float,
    hr_base_bpm: float,
    hrv_mod: HrvModulation = HrvModulation(),
    template: BeatTemplateParams = BeatTemplateParams(),
    seed: int = 0,
    fs: float = DEFAULT_FS,
) -> tuple[Signal, GroundTruth]:
    """Render a clean normalized pulse train with a sinusoidally modulated heart rate.

    The seed draws the modulation phase and the position of the first beat.
    """
    lo_hr, hi_hr = hr_base_bpm - abs(hrv_mod.depth_bpm), hr_base_bpm + abs(hrv_mod.depth_bpm)
    if lo_hr < HR_LIMITS_BPM[0] or hi_hr > HR_LIMITS_BPM[1]:
        raise ValueError(f"heart rate range [{lo_hr}, {hi_hr}] bpm outside {HR_LIMITS_BPM}")
    if duration_s < SEGMENT_SECONDS:
        raise ValueError("duration_s must be at least 30 s")
    rng = make_rng(seed)
    theta = rng.uniform(0, 2 * np.pi)
    phi0 = rng.uniform(0, 1)

    n = int(round(duration_s * fs))
    t = np.arange(n) / fs
    all_peaks = beat_times(duration_s, hr_base_bpm, hrv_mod, theta, phi0, margin_s=3.0)
    x = render_beats(t, all_peaks, template)
    peaks = all_peaks[(all_peaks >= 0) & (all_peaks < n / fs)]
    hr = hr_base_bpm + hrv_mod.depth_bpm * np.sin(2 * np.pi * hrv_mod.freq_hz * t + theta)
    gt = GroundTruth(peaks, BinaryMask.zeros(n, fs), hr)
    return normalize_minmax(Signal(x, fs)), gt


def _window_fractions_ok(flags: np.ndarray, window: int) -> bool:
    for start in range(0, flags.size, window):
        chunk = flags[start : start + window]
        if chunk.size == window and chunk.mean() > MAX_CORRUPTED_FRACTION:
            return False
    return flags.mean() <= MAX_CORRUPTED_FRACTION


def place_bursts(n: int, fs: float, spec: NoiseSpec, rng: np.random.Generator) -> list[tuple[int, int]]:
    """Non-overlapping burst intervals, rejection-sampled under the corruption cap.

    The cap applies to the whole signal and to every aligned 30 s window, so
    no segment the pipeline sees is more than 75% corrupted.
    """
    lo, hi = spec.burst_len_s
    window = segment_length(fs)
    flags = np.zeros(n, dtype=np.uint8)
    bursts: list[tuple[int, int]] = []
    for _ in range(spec.burst_count):
        for _attempt in range(1000):
            length = int(round(rng.uniform(lo, hi) * fs))
            length = min(max(length, 1), n)
            start = int(rng.integers(0, n - length + 1))
            if flags[start : start + length].any():
                continue
            trial = flags.copy()
            trial[start : start + length] = 1
            if not _window_fractions_ok(trial, window):
                continue
            flags = trial
            bursts.append((start, start + length))
            break
        else:
            raise CorruptionBudgetError("corruption budget exceeded")
    return sorted(bursts)


def _time_warp(x: np.ndarray, start: int, stop: int, fs: float, jitter: float, rng) -> np.ndarray:
    """Resample ``x[start:stop]`` along a smooth warp whose slope stays within ``jitter``."""
    length = stop - start
    if length < 2 or jitter <= 0:
        return x[start:stop].copy()
    cycles = int(rng.integers(1, 4))
    sign = rng.choice((-1.0, 1.0))
    u = np.arange(length) / (length - 1)
    duration = (length - 1) / fs
    amp = jitter * duration / (np.pi * cycles)
    shift = sign * amp * 0.5 * (1 - np.cos(2 * np.pi * cycles * u))
    t = np.arange(x.size) / fs
    return np.interp(t[start:stop] + shift, t, x)


def _burst_noise(length: int, fs: float, amp: float, rng) -> np.ndarray:
    white = rng.standard_normal(length + int(4 * fs))
    sos = sps.butter(4, [0.5, min(8.0, 0.45 * fs)], btype="band", fs=fs, output="sos")
    colored = sps.sosfiltfilt(sos, white)[int(2 * fs) : int(2 * fs) + length]
    peak = np.abs(colored).max()
    noise = colored / peak * (amp / 2.0) if peak > 0 else colored
    ramp = min(int(0.25 * fs), length // 2)
    if ramp > 0:
        taper = 0.5 * (1 - np.cos(np.pi * np.arange(ramp) / ramp))
        noise[:ramp] *= taper
        noise[length - ramp :] *= taper[::-1]
    return noise


def corrupt(clean: Signal, gt: GroundTruth, spec: NoiseSpec) -> tuple[Signal, GroundTruth]:
    """Add baseline wander everywhere and jittered, noisy bursts at random places.

    The returned ground truth keeps the clean beat times and carries the burst
    mask. Output is renormalized to [0, 1].
    """
    x = clean.samples
    if x.min() < 0 or x.max() > 1:
        raise ValueError("clean signal must be normalized to [0, 1]")
    rng = make_rng(spec.seed)
    fs, n = clean.fs, x.size
    bursts = place_bursts(n, fs, spec, rng)

    y = x.copy()
    flags = np.zeros(n, dtype=np.uint8)
    for start, stop in bursts:
        flags[start:stop] = 1
        warped = _time_warp(x, start, stop, fs, spec.fm_jitter_frac, rng)
        y[start:stop] = warped + _burst_noise(stop - start, fs, spec.burst_amp, rng)
    if spec.bw_amp > 0:
        t = np.arange(n) / fs
        y = y + spec.bw_amp * np.sin(2 * np.pi * spec.bw_freq_hz * t + rng.uniform(0, 2 * np.pi))
    noisy = normalize_minmax(clean.with_samples(y))
    return noisy, replace(gt, noise_mask=BinaryMask(flags, fs))


# -- corpora -------------------------------------------------------------------


@dataclass(frozen=True)
class CorpusSpec:
    """Ranges the corpus builders draw per-recording parameters from."""

    hr_range_bpm: tuple[float, float] = (50.0, 120.0)
    depth_range_bpm: tuple[float, float] = (0.0, 8.0)
    hrv_freq_range_hz: tuple[float, float] = (0.05, 0.3)
    template_jitter: float = 0.15
    clean_bw_range: tuple[float, float] = (0.0, 0.3)


def _draw_template(rng, jitter: float) -> BeatTemplateParams:
    base = BeatTemplateParams()
    scale = lambda: 1.0 + rng.uniform(-jitter, jitter)
    return BeatTemplateParams(
        systolic_amp=1.0,
        systolic_width_s=base.systolic_width_s * scale(),
        dicrotic_amp=base.dicrotic_amp * scale(),
        dicrotic_width_s=base.dicrotic_width_s * scale(),
        dicrotic_delay_frac=base.dicrotic_delay_frac * scale(),
    )


def random_recording(duration_s: float, seed: int, corpus: CorpusSpec = CorpusSpec(), fs: float = DEFAULT_FS):
    """Clean recording with heart rate, variability and pulse shape drawn from ``corpus``."""
    rng = make_rng(seed)
    hr = rng.uniform(*corpus.hr_range_bpm)
    depth = rng.uniform(*corpus.depth_range_bpm)
    depth = min(depth, hr - HR_LIMITS_BPM[0], HR_LIMITS_BPM[1] - hr)
    hrv = HrvModulation(depth, rng.uniform(*corpus.hrv_freq_range_hz))
    template = _draw_template(rng, corpus.template_jitter)
    return gen_clean(duration_s, hr, hrv, template, int(rng.integers(2**62)), fs)


def clean_training_segments(count: int, seed: int, corpus: CorpusSpec = CorpusSpec(), fs: float = DEFAULT_FS):
    """``count`` artifact-free 30 s segments.

    Each carries a small random baseline wander: wander is not an artifact,
    and the pipeline feeds the model segments that contain it.
    """
    rng = make_rng(seed)
    out = []
    for _ in range(count):
        clean, gt = random_recording(SEGMENT_SECONDS, int(rng.integers(2**62)), corpus, fs)
        bw = rng.uniform(*corpus.clean_bw_range)
        spec = NoiseSpec(bw_amp=bw, burst_count=0, seed=int(rng.integers(2**62)))
        x, _ = corrupt(clean, gt, spec)
        out.append(x)
    return out


def noisy_test_recordings(
    count: int,
    duration_s: float,
    seed: int,
    noise: NoiseSpec = NoiseSpec(),
    corpus: CorpusSpec = CorpusSpec(),
    fs: float = DEFAULT_FS,
):
    """Paired (clean, noisy, ground truth) recordings."""
    rng = make_rng(seed)
    out = []
    for _ in range(count):
        clean, gt = random_recording(duration_s, int(rng.integers(2**62)), corpus, fs)
        noisy, gt = corrupt(clean, gt, replace(noise, seed=int(rng.integers(2**62))))
        out.append((clean, noisy, gt))
    return out
