import math

import numpy as np
import pytest

from ppgdae.filters import bandpass
from ppgdae.metrics import (
    BeatSeries,
    HrvWindowConfig,
    HrWindowConfig,
    compare,
    detect_peaks,
    estimate_hr_windows,
    estimate_hrv_windows,
    iqr_filter,
    mae,
    rmssd,
    sdnn,
)
from ppgdae.signal import Signal, join, segment
from ppgdae.synth import HrvModulation, gen_clean

FS = 64.0


def _brute_sdnn(rr):
    mean = sum(rr) / len(rr)
    return math.sqrt(sum((v - mean) ** 2 for v in rr) / len(rr))


def _brute_rmssd(rr):
    diffs = [b - a for a, b in zip(rr, rr[1:])]
    return math.sqrt(sum(d * d for d in diffs) / len(diffs))


def _brute_quantile(sorted_rr, q):
    pos = q * (len(sorted_rr) - 1)
    lo = int(math.floor(pos))
    hi = min(lo + 1, len(sorted_rr) - 1)
    return sorted_rr[lo] + (pos - lo) * (sorted_rr[hi] - sorted_rr[lo])


def _brute_iqr(rr):
    s = sorted(rr)
    q1, q3 = _brute_quantile(s, 0.25), _brute_quantile(s, 0.75)
    lo, hi = q1 - 1.5 * (q3 - q1), q3 + 1.5 * (q3 - q1)
    return [v for v in rr if lo <= v <= hi]


def _matched(found, truth, tol):
    return sum(np.min(np.abs(found - t)) <= tol for t in truth) if found.size else 0


class TestHrvStatistics:
    def test_examples(self):
        rr = [800, 810, 790, 805]
        assert sdnn(rr) == pytest.approx(7.395, abs=5e-4)
        assert rmssd(rr) == pytest.approx(15.546, abs=5e-4)
        assert rmssd([800, 820]) == pytest.approx(20.0)
        assert sdnn([900] * 5) == 0.0 and rmssd([900] * 5) == 0.0

    def test_iqr_examples(self):
        np.testing.assert_array_equal(iqr_filter([800, 810, 790, 805]), [800, 810, 790, 805])
        np.testing.assert_array_equal(iqr_filter([800, 810, 790, 805, 2000]), [800, 810, 790, 805])
        np.testing.assert_array_equal(iqr_filter([700] * 6), [700] * 6)

    @pytest.mark.parametrize("fn", [sdnn, rmssd])
    def test_too_few(self, fn):
        with pytest.raises(ValueError, match="insufficient intervals"):
            fn([800])

    def test_iqr_too_few(self):
        with pytest.raises(ValueError, match="insufficient intervals"):
            iqr_filter([800, 810, 790])

    def test_match_brute_force(self, rng):
        for _ in range(200):
            rr = list(rng.normal(850, 60, size=int(rng.integers(4, 60))))
            if rng.random() < 0.3:
                rr[int(rng.integers(len(rr)))] = float(rng.uniform(1500, 2500))
            assert sdnn(rr) == pytest.approx(_brute_sdnn(rr), rel=1e-9)
            assert rmssd(rr) == pytest.approx(_brute_rmssd(rr), rel=1e-9)
            assert iqr_filter(rr).tolist() == _brute_iqr(rr)


class TestScoring:
    def test_mae_examples(self):
        assert mae([62, 58], [60, 60]) == 2.0
        assert mae([70.5, 71.0], [70.5, 71.0]) == 0.0

    def test_missing_pairs_dropped(self):
        result = compare([62, None, 58, 61], [60, 60, None, 60])
        assert result.mae == pytest.approx(1.5)
        assert (result.used, result.dropped) == (2, 2)

    def test_brute_force(self, rng):
        est, ref = rng.uniform(40, 180, 100), rng.uniform(40, 180, 100)
        assert mae(est, ref) == pytest.approx(sum(abs(a - b) for a, b in zip(est, ref)) / 100, rel=1e-12)

    def test_errors(self):
        with pytest.raises(ValueError, match="no comparable windows"):
            mae([None, 60], [60, None])
        with pytest.raises(ValueError):
            mae([60], [60, 60])


class TestHrWindows:
    def test_window_count(self):
        beats = BeatSeries.from_times(np.arange(0.5, 30, 1.0), 0, 30)
        windows = estimate_hr_windows(beats, 30.0, HrWindowConfig(8, 2))
        assert [w.t_start for w in windows] == list(range(0, 23, 2))
        assert all(w.bpm == pytest.approx(60.0) for w in windows)

    def test_half_second_rr(self):
        beats = BeatSeries.from_times(np.arange(0.1, 30, 0.5), 0, 30)
        assert all(w.bpm == pytest.approx(120.0) for w in estimate_hr_windows(beats, 30.0))

    def test_missing_windows(self):
        beats = BeatSeries.from_times([1.0, 25.0, 26.0], 0, 30)
        windows = estimate_hr_windows(beats, 30.0)
        assert windows[0].bpm is None
        assert windows[-1].bpm == pytest.approx(60.0)

    def test_discontinuity_marks_missing(self):
        beats = BeatSeries(np.arange(0.5, 60, 1.0), ((0.0, 30.0), (60.0, 90.0)))
        windows = estimate_hr_windows(beats, 90.0, t0=0.0)
        by_start = {w.t_start: w.bpm for w in windows}
        assert by_start[22.0] == pytest.approx(60.0)
        assert by_start[24.0] is None

    def test_intervals_never_span_gaps(self):
        beats = BeatSeries(np.array([28.5, 29.5, 60.5, 61.5]), ((0.0, 30.0), (60.0, 90.0)))
        np.testing.assert_allclose(beats.rr_intervals_ms, [1000.0, 1000.0])


class TestHrvWindows:
    def test_short_recording_single_window(self):
        # 171 beats give 170 intervals alternating 1.02 s and 1.0 s
        rr = np.full(171, 1.0)
        rr[1::2] = 1.02
        beats = BeatSeries.from_times(np.cumsum(rr) - 0.5, 0, 180)
        (w,) = estimate_hrv_windows(beats, 180.0)
        assert w.sdnn == pytest.approx(10.0, rel=1e-6)
        assert w.rmssd == pytest.approx(20.0, rel=1e-6)

    def test_sliding_windows(self):
        beats = BeatSeries.from_times(np.arange(0.5, 600, 1.0), 0, 600)
        windows = estimate_hrv_windows(beats, 600.0, HrvWindowConfig(300, 0.95))
        assert len(windows) == 21
        assert windows[1].t_start == pytest.approx(15.0)

    def test_too_few_beats(self):
        beats = BeatSeries.from_times([1.0, 2.0, 3.0], 0, 30)
        assert estimate_hrv_windows(beats, 30.0)[0].sdnn is None


class TestDetectPeaks:
    def test_sixty_bpm(self):
        x, gt = gen_clean(60.0, 60.0, seed=0)
        found = detect_peaks(bandpass(x)).peak_times_s
        assert abs(found.size - 60) <= 1
        assert _matched(found, gt.peak_times_s, 3 / FS) >= 59

    def test_hundred_eighty_bpm(self):
        x, gt = gen_clean(60.0, 180.0, seed=1)
        found = detect_peaks(bandpass(x)).peak_times_s
        assert abs(found.size - 180) <= 2

    @pytest.mark.parametrize("hr", [45.0, 50.0, 72.0, 100.0, 140.0])
    def test_no_dicrotic_double_counting(self, hr):
        x, gt = gen_clean(60.0, hr, HrvModulation(3.0, 0.1), seed=2)
        found = detect_peaks(bandpass(x)).peak_times_s
        interior = gt.peak_times_s[(gt.peak_times_s > 0.1) & (gt.peak_times_s < 59.9)]
        assert _matched(found, interior, 3 / FS) == interior.size
        assert abs(found.size - gt.peak_times_s.size) <= 1

    def test_constant_signal(self):
        assert detect_peaks(Signal(np.full(640, 0.5), FS)).peak_times_s.size == 0

    def test_translation_equivariance(self):
        x, _ = gen_clean(60.0, 75.0, seed=3)
        filtered = bandpass(x).samples
        shift = 37
        full = detect_peaks(Signal(filtered, FS)).peak_times_s
        cropped = detect_peaks(Signal(filtered[shift:], FS, t0=shift / FS)).peak_times_s
        inner = full[(full > 2.0) & (full < 58.0)]
        assert _matched(cropped, inner, 0.5 / FS) == inner.size

    def test_spans_follow_provenance(self):
        x, gt = gen_clean(90.0, 70.0, seed=4)
        segs = segment(bandpass(x))
        beats = detect_peaks(join([segs[0], segs[2]]))
        assert beats.spans == ((0.0, 30.0), (60.0, 90.0))
        assert not np.any((beats.peak_times_s > 30.0) & (beats.peak_times_s < 60.0))

    def test_too_short(self):
        with pytest.raises(ValueError):
            detect_peaks(Signal(np.zeros(100), FS))
