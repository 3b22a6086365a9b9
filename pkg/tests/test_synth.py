import numpy as np
import pytest

from ppgdae.filters import bandpass
from ppgdae.signal import Signal, normalize_minmax
from ppgdae.synth import (
    BeatTemplateParams,
    CorruptionBudgetError,
    HrvModulation,
    NoiseSpec,
    clean_training_segments,
    corrupt,
    derive_seed,
    gen_clean,
    noisy_test_recordings,
)

QUIET = NoiseSpec(bw_amp=0.0, burst_count=0)


def _analytic_rr(duration_s, hr, depth, freq, dt=1e-4):
    """Beat times of the modulated rate found by brute-force phase integration."""
    t = np.arange(0, duration_s, dt)
    rate = (hr + depth * np.sin(2 * np.pi * freq * t)) / 60.0
    phase = np.concatenate([[0.0], np.cumsum(rate[:-1] * dt)])
    k = np.arange(1, int(phase[-1]))
    beats = np.interp(k, phase, t)
    return np.diff(beats)


class TestGenClean:
    def test_sixty_bpm(self):
        x, gt = gen_clean(60.0, 60.0, seed=3)
        assert len(x) == 3840
        assert abs(gt.peak_times_s.size - 60) <= 1
        np.testing.assert_allclose(np.diff(gt.peak_times_s), 1.0, atol=1e-12)

    def test_hundred_twenty_bpm(self):
        _, gt = gen_clean(30.0, 120.0, seed=4)
        assert abs(gt.peak_times_s.size - 60) <= 1

    def test_normalized_and_clean_mask(self):
        x, gt = gen_clean(30.0, 75.0, seed=5)
        assert x.samples.min() == 0.0 and x.samples.max() == 1.0
        assert not gt.noise_mask.flags.any()
        assert len(gt.hr_trajectory_bpm) == len(x)

    def test_sdnn_matches_brute_force_oracle(self):
        # 0.1 Hz modulation over 300 s covers 30 full cycles, so the
        # modulation phase drawn from the seed does not matter
        _, gt = gen_clean(300.0, 60.0, HrvModulation(6.0, 0.1), seed=6)
        sdnn = np.std(gt.rr_ms())
        oracle = np.std(_analytic_rr(300.0, 60.0, 6.0, 0.1)) * 1000.0
        assert sdnn == pytest.approx(oracle, rel=0.05)

    def test_peaks_sit_on_systolic_maxima(self):
        x, gt = gen_clean(60.0, 70.0, HrvModulation(4.0, 0.2), seed=7)
        s = x.samples
        for tp in gt.peak_times_s[1:-1]:
            i = int(round(tp * x.fs))
            lo, hi = max(i - 8, 0), min(i + 9, s.size)
            assert abs(lo + int(np.argmax(s[lo:hi])) - tp * x.fs) <= 1.0

    def test_deterministic(self):
        a, ga = gen_clean(30.0, 80.0, HrvModulation(5.0, 0.1), seed=11)
        b, gb = gen_clean(30.0, 80.0, HrvModulation(5.0, 0.1), seed=11)
        np.testing.assert_array_equal(a.samples, b.samples)
        np.testing.assert_array_equal(ga.peak_times_s, gb.peak_times_s)

    @pytest.mark.parametrize("hr, depth", [(25.0, 0.0), (215.0, 10.0), (35.0, 8.0)])
    def test_hr_bounds(self, hr, depth):
        with pytest.raises(ValueError):
            gen_clean(30.0, hr, HrvModulation(depth, 0.1))

    def test_short_duration(self):
        with pytest.raises(ValueError):
            gen_clean(20.0, 60.0)

    def test_template_invariants(self):
        with pytest.raises(ValueError):
            BeatTemplateParams(dicrotic_amp=1.2)
        with pytest.raises(ValueError):
            BeatTemplateParams(systolic_width_s=0.0)
        with pytest.raises(ValueError):
            BeatTemplateParams(dicrotic_delay_frac=1.0)


class TestCorrupt:
    def test_identity_case(self):
        x, gt = gen_clean(30.0, 70.0, seed=1)
        y, gy = corrupt(x, gt, QUIET)
        np.testing.assert_array_equal(y.samples, x.samples)
        assert not gy.noise_mask.flags.any()

    def test_single_burst_fraction(self):
        x, gt = gen_clean(30.0, 70.0, seed=1)
        _, gy = corrupt(x, gt, NoiseSpec(burst_count=1, burst_len_s=(5.0, 5.0), seed=2))
        assert gy.noise_mask.corrupted_fraction == pytest.approx(5 / 30)
        assert len(gy.noise_mask.runs()) == 1

    def test_wander_removed_by_bandpass(self):
        x, gt = gen_clean(60.0, 70.0, seed=1)
        y, _ = corrupt(x, gt, NoiseSpec(bw_amp=0.3, bw_freq_hz=0.2, burst_count=0, seed=3))
        r = np.corrcoef(bandpass(y).samples, bandpass(x).samples)[0, 1]
        assert r >= 0.95
        assert np.corrcoef(bandpass(y).samples, x.samples)[0, 1] >= 0.95

    def test_budget_exceeded(self):
        x, gt = gen_clean(30.0, 70.0, seed=1)
        with pytest.raises(CorruptionBudgetError, match="corruption budget exceeded"):
            corrupt(x, gt, NoiseSpec(burst_count=4, burst_len_s=(8.0, 8.0)))

    def test_cap_holds(self, rng):
        x, gt = gen_clean(90.0, 70.0, seed=1)
        for _ in range(20):
            spec = NoiseSpec(burst_count=5, burst_len_s=(1.0, 8.0), seed=int(rng.integers(2**31)))
            _, gy = corrupt(x, gt, spec)
            flags = gy.noise_mask.flags
            assert flags.mean() <= 0.75
            assert all(flags[i : i + 1920].mean() <= 0.75 for i in range(0, flags.size, 1920))

    def test_outside_bursts_only_affine(self):
        x, gt = gen_clean(30.0, 70.0, seed=1)
        y, gy = corrupt(x, gt, NoiseSpec(bw_amp=0.0, burst_count=2, seed=5))
        keep = gy.noise_mask.flags == 0
        a, b = np.polyfit(x.samples[keep], y.samples[keep], 1)
        np.testing.assert_allclose(a * x.samples[keep] + b, y.samples[keep], atol=1e-12)

    def test_peaks_preserved_and_deterministic(self):
        x, gt = gen_clean(30.0, 70.0, seed=1)
        spec = NoiseSpec(seed=9)
        y1, g1 = corrupt(x, gt, spec)
        y2, g2 = corrupt(x, gt, spec)
        np.testing.assert_array_equal(y1.samples, y2.samples)
        np.testing.assert_array_equal(g1.peak_times_s, gt.peak_times_s)
        assert y1.samples.min() == 0.0 and y1.samples.max() == 1.0

    def test_rejects_unnormalized_input(self):
        x, gt = gen_clean(30.0, 70.0, seed=1)
        with pytest.raises(ValueError):
            corrupt(Signal(x.samples * 2, x.fs), gt, QUIET)

    def test_noise_spec_validation(self):
        with pytest.raises(ValueError):
            NoiseSpec(bw_freq_hz=0.9)
        with pytest.raises(ValueError):
            NoiseSpec(burst_len_s=(3.0, 1.0))


class TestCorpora:
    def test_derive_seed_stable(self):
        assert derive_seed(1, "masks") == derive_seed(1, "masks")
        assert derive_seed(1, "masks") != derive_seed(1, "init")
        assert derive_seed(1, "masks") != derive_seed(2, "masks")

    def test_training_segments(self):
        segs = clean_training_segments(3, seed=0)
        assert [len(s) for s in segs] == [1920] * 3
        again = clean_training_segments(3, seed=0)
        for a, b in zip(segs, again):
            np.testing.assert_array_equal(a.samples, b.samples)
        for s in segs:
            np.testing.assert_array_equal(normalize_minmax(s).samples, s.samples)

    def test_test_recordings(self):
        recs = noisy_test_recordings(2, 60.0, seed=0)
        assert len(recs) == 2
        for clean, noisy, gt in recs:
            assert len(clean) == len(noisy) == len(gt.noise_mask) == 3840
            assert gt.noise_mask.flags.any()
