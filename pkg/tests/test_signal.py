import numpy as np
import pytest

from ppgdae.io import read_mask, read_peaks, read_signal, read_signal_meta, write_mask, write_peaks, write_signal
from ppgdae.signal import (
    BinaryMask,
    Segment,
    Signal,
    Span,
    erase,
    join,
    merge,
    normalize_minmax,
    segment,
)

FS = 64.0


def _recording(seconds, fs=FS, seed=0):
    return Signal(np.random.default_rng(seed).random(int(round(seconds * fs))), fs)


class TestSignalTypes:
    def test_empty_signal_rejected(self):
        with pytest.raises(ValueError, match="empty signal"):
            Signal(np.array([]), FS)

    def test_nonpositive_rate_rejected(self):
        with pytest.raises(ValueError):
            Signal(np.ones(4), 0.0)

    def test_samples_are_read_only_float64(self):
        s = Signal([1, 2, 3], FS)
        assert s.samples.dtype == np.float64
        with pytest.raises(ValueError):
            s.samples[0] = 5.0

    def test_mask_rejects_non_binary(self):
        with pytest.raises(ValueError):
            BinaryMask(np.array([0, 2, 1]), FS)

    def test_mask_fraction_and_runs(self):
        m = BinaryMask(np.array([0, 1, 1, 0, 1]), FS)
        assert m.corrupted_fraction == pytest.approx(0.6)
        assert m.runs() == [(1, 3), (4, 5)]


class TestSegment:
    def test_trailing_remainder_dropped(self):
        segs = segment(_recording(95))
        assert len(segs) == 3
        assert all(len(s) == 1920 for s in segs)
        assert sum(len(s) for s in segs) == 95 * 64 - 320

    def test_single_window_is_identity(self):
        rec = _recording(30)
        (only,) = segment(rec)
        np.testing.assert_array_equal(only.signal.samples, rec.samples)

    def test_t0_and_index(self):
        segs = segment(_recording(60), source_id="r1")
        assert [s.signal.t0 for s in segs] == [0.0, 30.0]
        assert [s.index for s in segs] == [0, 1]
        assert {s.source_id for s in segs} == {"r1"}

    def test_shorter_than_window_gives_nothing(self):
        assert segment(_recording(20)) == []

    def test_bad_window(self):
        with pytest.raises(ValueError):
            segment(_recording(30), window_s=0)


class TestNormalize:
    @pytest.mark.parametrize(
        "x, expected",
        [([2, 4, 6], [0, 0.5, 1]), ([0, 1], [0, 1]), ([3, 3, 3], [0.5, 0.5, 0.5])],
    )
    def test_examples(self, x, expected):
        np.testing.assert_allclose(normalize_minmax(Signal(x, FS)).samples, expected)

    def test_range_and_idempotence(self, rng):
        for _ in range(50):
            s = Signal(rng.normal(size=200) * rng.uniform(0.1, 100) + rng.normal() * 10, FS)
            once = normalize_minmax(s)
            assert once.samples.min() == 0.0 and once.samples.max() == 1.0
            np.testing.assert_allclose(normalize_minmax(once).samples, once.samples, rtol=0, atol=1e-15)

    def test_keeps_time_metadata(self):
        s = Signal([1.0, 2.0, 4.0], FS, t0=12.5)
        assert normalize_minmax(s).t0 == 12.5


class TestEraseMerge:
    def test_erase_example(self):
        out = erase(Signal([0.2, 0.8, 0.5], FS), BinaryMask(np.array([0, 1, 0]), FS))
        np.testing.assert_array_equal(out.samples, [0.2, 0.0, 0.5])

    def test_erase_zero_mask_is_identity(self, rng):
        x = Signal(rng.random(100), FS)
        np.testing.assert_array_equal(erase(x, BinaryMask.zeros(100, FS)).samples, x.samples)

    def test_erase_patch_index_arithmetic(self, rng):
        x = Signal(rng.random(1920) + 0.1, FS)
        flags = np.zeros(1920, dtype=np.uint8)
        flags[5 * 64 : 8 * 64] = 1
        out = erase(x, BinaryMask(flags, FS)).samples
        assert np.flatnonzero(out == 0).tolist() == list(range(320, 512))

    def test_merge_examples(self, rng):
        x_in, y_out = Signal([0.1, 0.0, 0.3], FS), Signal([0.9, 0.7, 0.9], FS)
        np.testing.assert_array_equal(merge(x_in, y_out, BinaryMask(np.array([0, 1, 0]), FS)).samples, [0.1, 0.7, 0.3])
        np.testing.assert_array_equal(merge(x_in, y_out, BinaryMask.zeros(3, FS)).samples, x_in.samples)
        np.testing.assert_array_equal(merge(x_in, y_out, BinaryMask(np.ones(3, dtype=np.uint8), FS)).samples, y_out.samples)

    def test_merge_preserves_unmasked_even_against_nonfinite_output(self):
        x_in = Signal([0.1, 0.2, 0.3], FS)
        y_out = Signal([np.nan, np.inf, -np.inf], FS)
        out = merge(x_in, y_out, BinaryMask(np.array([0, 1, 0]), FS)).samples
        assert out[0] == 0.1 and out[2] == 0.3 and np.isposinf(out[1])

    def test_length_mismatch(self):
        with pytest.raises(ValueError, match="length mismatch"):
            erase(Signal([1.0, 2.0], FS), BinaryMask(np.array([0, 1, 0]), FS))
        with pytest.raises(ValueError, match="length mismatch"):
            merge(Signal([1.0, 2.0], FS), Signal([1.0], FS), BinaryMask(np.array([0, 1]), FS))


class TestJoin:
    def test_concatenation_and_identity(self):
        segs = segment(_recording(60))
        joined = join(segs)
        assert len(joined) == 3840
        np.testing.assert_array_equal(join(segs[:1]).samples, segs[0].signal.samples)

    def test_segment_then_join_reproduces_recording(self):
        rec = _recording(90)
        joined = join(segment(rec))
        np.testing.assert_array_equal(joined.samples, rec.samples)
        assert joined.contiguous_regions() == [(0, len(rec))]
        np.testing.assert_allclose(joined.times(), rec.times())

    def test_discard_gap_recorded(self):
        segs = segment(_recording(90))
        joined = join([segs[0], segs[2]])
        assert len(joined) == 3840
        assert joined.provenance == (Span(0, 1920, 0, 0.0), Span(1920, 3840, 2, 60.0))
        assert joined.discontinuities() == [1920]
        assert joined.times()[1920] == pytest.approx(60.0)

    def test_mixed_rates(self):
        a = Segment(Signal(np.ones(1920), 64.0))
        b = Segment(Signal(np.ones(3000), 100.0), index=1)
        with pytest.raises(ValueError, match="mixed sampling rates"):
            join([a, b])

    def test_empty(self):
        with pytest.raises(ValueError):
            join([])


class TestFiles:
    def test_signal_round_trip_nine_digits(self, tmp_path, rng):
        s = Signal(rng.random(500), FS, t0=30.0)
        write_signal(tmp_path / "a.ppg.csv", s, {"seed": 7})
        back = read_signal(tmp_path / "a.ppg.csv")
        assert back.fs == FS and back.t0 == 30.0
        np.testing.assert_allclose(back.samples, s.samples, rtol=1e-8)
        assert read_signal_meta(tmp_path / "a.ppg.csv")["seed"] == 7

    def test_header_line(self, tmp_path):
        write_signal(tmp_path / "b.ppg.csv", Signal([0.25, 0.5], FS))
        assert (tmp_path / "b.ppg.csv").read_text().splitlines() == ["fs=64", "0.25", "0.5"]

    def test_provenance_round_trip(self, tmp_path):
        segs = segment(_recording(90))
        joined = join([segs[0], segs[2]])
        write_signal(tmp_path / "j.ppg.csv", joined)
        back = read_signal(tmp_path / "j.ppg.csv")
        assert back.provenance == joined.provenance
        assert back.discontinuities() == [1920]

    def test_mask_and_peaks_round_trip(self, tmp_path):
        m = BinaryMask(np.array([0, 1, 1, 0]), FS)
        write_mask(tmp_path / "m.mask.csv", m)
        np.testing.assert_array_equal(read_mask(tmp_path / "m.mask.csv").flags, m.flags)
        write_peaks(tmp_path / "p.peaks.csv", [0.5, 1.25], {"seed": 1})
        np.testing.assert_allclose(read_peaks(tmp_path / "p.peaks.csv"), [0.5, 1.25])

    def test_missing_header(self, tmp_path):
        (tmp_path / "bad.ppg.csv").write_text("0.1\n0.2\n")
        with pytest.raises(ValueError, match="fs="):
            read_signal(tmp_path / "bad.ppg.csv")
