"""Evaluation harness: heart rate and HRV error of several signal variants.

For a paired clean/noisy synthetic recording the harness scores

* ``raw``: the noisy recording, each 30 s segment min-max normalized;
* ``bandpass``: the noisy recording after the 0.9-5 Hz band-pass only;
* ``simnoise``: a DAE trained on simulated-noise pairs, applied to every
  segment in full (only when such a model is supplied);
* ``spear``: erase and reconstruct the detected artifacts, then band-pass.

Ground truth comes from the generator's beat times, not from the clean
signal, so the peak detector's own error is part of every variant's score.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from .detect import Detector
from .filters import bandpass
from .metrics import (
    BeatSeries,
    HrvWindowConfig,
    HrWindowConfig,
    MaeResult,
    compare,
    detect_peaks,
    estimate_hr_windows,
    estimate_hrv_windows,
)
from .nn import DaeModel
from .pipeline import normalized_segments, spear_filtered
from .signal import Segment, Signal, join
from .synth import GroundTruth

VARIANTS = ("raw", "bandpass", "simnoise", "spear")


@dataclass(frozen=True, eq=False)
class VariantWindows:
    """Per-window estimates of one variant on one recording (None = missing)."""

    hr: list
    sdnn: list
    rmssd: list


@dataclass(frozen=True, eq=False)
class RecordingEval:
    """Window-level estimates for every variant plus the ground truth."""

    recording_id: str
    hr_starts: list
    hrv_starts: list
    truth: VariantWindows
    variants: dict
    discarded_segments: int = 0

    def scores(self) -> dict:
        return {name: _score([self], name) for name in self.variants}


def _hr(beats: BeatSeries, duration: float, cfg: HrWindowConfig) -> list:
    return [w.bpm for w in estimate_hr_windows(beats, duration, cfg)]


def _hrv(beats: BeatSeries, duration: float, cfg: HrvWindowConfig) -> tuple[list, list]:
    wins = estimate_hrv_windows(beats, duration, cfg)
    return [w.sdnn for w in wins], [w.rmssd for w in wins]


def _windows(signal: Signal, duration: float, hr_cfg, hrv_cfg) -> VariantWindows:
    beats = detect_peaks(signal)
    return VariantWindows(_hr(beats, duration, hr_cfg), *_hrv(beats, duration, hrv_cfg))


def _full_reconstruction(recording: Signal, model: DaeModel) -> Signal:
    segs = normalized_segments(recording)
    out = model.predict(np.stack([s.signal.samples for s in segs]))
    return join([Segment(s.signal.with_samples(row), s.source_id, s.index) for s, row in zip(segs, out)])


def eval_harness(
    clean: Signal,
    noisy: Signal,
    gt: GroundTruth,
    model: Optional[DaeModel],
    detector: Detector,
    simnoise_model: Optional[DaeModel] = None,
    hr_cfg: HrWindowConfig = HrWindowConfig(),
    hrv_cfg: HrvWindowConfig = HrvWindowConfig(),
    recording_id: str = "",
) -> RecordingEval:
    """Window-level HR and HRV estimates of each variant against ground truth.

    Windows are laid over the noisy recording's full duration; a variant that
    has no signal in a window (for example a discarded segment) reports it as
    missing and the comparison drops it.

    Parameters
    ----------
    clean : Signal
        Clean counterpart; must have the noisy recording's length.
    noisy : Signal
    gt : GroundTruth
        Beat times used as reference.
    model : DaeModel or None
        SPEAR autoencoder; with ``None`` the ``spear`` variant is skipped.
    detector : Detector
    simnoise_model : DaeModel, optional
    """
    if len(clean) != len(noisy) or clean.fs != noisy.fs:
        raise ValueError("clean and noisy recordings must have the same length and rate")
    duration = noisy.duration
    truth_beats = BeatSeries.from_times(
        gt.peak_times_s[(gt.peak_times_s >= 0) & (gt.peak_times_s < duration)], 0.0, duration
    )
    truth = VariantWindows(_hr(truth_beats, duration, hr_cfg), *_hrv(truth_beats, duration, hrv_cfg))

    variants = {
        "raw": _windows(join(normalized_segments(noisy)), duration, hr_cfg, hrv_cfg),
        "bandpass": _windows(bandpass(noisy), duration, hr_cfg, hrv_cfg),
    }
    if simnoise_model is not None:
        variants["simnoise"] = _windows(bandpass(_full_reconstruction(noisy, simnoise_model)), duration, hr_cfg, hrv_cfg)
    discarded = 0
    if model is not None:
        filtered, _, report = spear_filtered(noisy, model, detector)
        variants["spear"] = _windows(filtered, duration, hr_cfg, hrv_cfg)
        discarded = report.segments_discarded
    hr_starts = [w.t_start for w in estimate_hr_windows(truth_beats, duration, hr_cfg)]
    hrv_starts = [w.t_start for w in estimate_hrv_windows(truth_beats, duration, hrv_cfg)]
    return RecordingEval(recording_id, hr_starts, hrv_starts, truth, variants, discarded)


# -- corpus scoring ----------------------------------------------------------------


def _pool(evals: Sequence[RecordingEval], name: str, attr: str) -> tuple[list, list]:
    est, ref = [], []
    for ev in evals:
        est += getattr(ev.variants[name], attr)
        ref += getattr(ev.truth, attr)
    return est, ref


def _safe_compare(est, ref) -> Optional[MaeResult]:
    try:
        return compare(est, ref)
    except ValueError:
        return None


def _score(evals: Sequence[RecordingEval], name: str) -> dict:
    out = {}
    for metric in ("hr", "sdnn", "rmssd"):
        est, ref = _pool(evals, name, metric)
        res = _safe_compare(est, ref)
        out[f"{metric}_mae"] = None if res is None else res.mae
        out[f"{metric}_windows_used"] = 0 if res is None else res.used
        out[f"{metric}_windows_dropped"] = len(est) if res is None else res.dropped
    return out


@dataclass
class CorpusReport:
    """Pooled scores over a set of recordings.

    MAE is taken over all comparable windows of all recordings together.
    """

    evals: list = field(default_factory=list)
    config: dict = field(default_factory=dict)

    @property
    def variant_names(self) -> list[str]:
        names = {n for ev in self.evals for n in ev.variants}
        return [v for v in VARIANTS if v in names]

    def scores(self) -> dict:
        return {name: _score([e for e in self.evals if name in e.variants], name) for name in self.variant_names}

    def to_dict(self, digits: int = 6) -> dict:
        def rnd(v):
            return None if v is None else round(float(v), digits)

        scores = {
            name: {k: (rnd(v) if k.endswith("_mae") else v) for k, v in s.items()}
            for name, s in self.scores().items()
        }
        recordings = []
        for ev in sorted(self.evals, key=lambda e: e.recording_id):
            per = {name: {k: (rnd(v) if k.endswith("_mae") else v) for k, v in s.items()} for name, s in ev.scores().items()}
            recordings.append({"id": ev.recording_id, "discarded_segments": ev.discarded_segments, "scores": per})
        return {"config": self.config, "scores": scores, "recordings": recordings}

    def to_json(self, **extra) -> str:
        return json.dumps({**extra, **self.to_dict()}, indent=2, sort_keys=True) + "\n"

    def window_rows(self, digits: int = 6) -> list[str]:
        """CSV lines ``recording,variant,metric,t_start,estimate,truth`` sorted canonically."""

        def fmt(v):
            return "" if v is None else f"{round(float(v), digits):.{digits}f}"

        rows = ["recording,variant,metric,t_start,estimate,truth"]
        for ev in sorted(self.evals, key=lambda e: e.recording_id):
            for name in [v for v in VARIANTS if v in ev.variants]:
                w = ev.variants[name]
                for t, e, r in zip(ev.hr_starts, w.hr, ev.truth.hr):
                    rows.append(f"{ev.recording_id},{name},hr,{t:.3f},{fmt(e)},{fmt(r)}")
                for metric in ("sdnn", "rmssd"):
                    for t, e, r in zip(ev.hrv_starts, getattr(w, metric), getattr(ev.truth, metric)):
                        rows.append(f"{ev.recording_id},{name},{metric},{t:.3f},{fmt(e)},{fmt(r)}")
        return rows


def evaluate_corpus(
    recordings: Iterable[tuple[Signal, Signal, GroundTruth]],
    model: Optional[DaeModel],
    detector_for: Callable[[GroundTruth], Detector],
    simnoise_model: Optional[DaeModel] = None,
    hr_cfg: HrWindowConfig = HrWindowConfig(),
    hrv_cfg: HrvWindowConfig = HrvWindowConfig(),
    config: Optional[dict] = None,
) -> CorpusReport:
    """Run :func:`eval_harness` on each (clean, noisy, gt) triple and pool the windows.

    ``detector_for(gt)`` builds the detector for one recording; the oracle
    detector needs that recording's ground-truth mask.
    """
    evals = [
        eval_harness(clean, noisy, gt, model, detector_for(gt), simnoise_model, hr_cfg, hrv_cfg, f"rec{i:03d}")
        for i, (clean, noisy, gt) in enumerate(recordings)
    ]
    return CorpusReport(evals, dict(config or {}))
