"""Inference path: detect, discard, erase, reconstruct, merge, then band-pass.

Each 30 s segment of a recording is min-max normalized and handed to an
artifact detector. Segments flagged over more than 75% of their length are
dropped. In the rest, flagged samples are zeroed, the autoencoder fills them
in, and only those samples are taken from the network output; every other
sample is the normalized input, bit for bit. Accepted segments are joined with
a provenance map so later stages know where the time gaps are.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .detect import Decision, Detector, detect, discard_rule
from .filters import bandpass
from .nn import DaeModel
from .signal import (
    SEGMENT_SECONDS,
    Segment,
    Signal,
    erase,
    join,
    merge,
    normalize_minmax,
    segment,
    segment_length,
)

__all__ = ["DenoiseReport", "SegmentRecord", "bandpass", "spear_denoise", "spear_filtered", "normalized_segments"]


@dataclass(frozen=True)
class SegmentRecord:
    """What happened to one 30 s segment.

    ``regions`` are the reconstructed ``[start, stop)`` sample runs, relative
    to the start of the segment.
    """

    index: int
    t0: float
    corrupted_fraction: float
    decision: Decision
    regions: tuple[tuple[int, int], ...] = ()


@dataclass(frozen=True)
class DenoiseReport:
    segments: tuple[SegmentRecord, ...] = field(default_factory=tuple)

    @property
    def segments_total(self) -> int:
        return len(self.segments)

    @property
    def segments_discarded(self) -> int:
        return sum(s.decision is Decision.DISCARD for s in self.segments)

    @property
    def fractions(self) -> list[float]:
        return [s.corrupted_fraction for s in self.segments]

    def to_dict(self) -> dict:
        return {
            "segments_total": self.segments_total,
            "segments_discarded": self.segments_discarded,
            "fractions": [round(f, 6) for f in self.fractions],
            "segments": [
                {
                    "index": s.index,
                    "t0": s.t0,
                    "decision": s.decision.value,
                    "regions": [list(r) for r in s.regions],
                }
                for s in self.segments
            ],
        }

    def to_json(self, **extra) -> str:
        return json.dumps({**extra, **self.to_dict()}, indent=2, sort_keys=True) + "\n"


def normalized_segments(recording: Signal, source_id: str = "") -> list[Segment]:
    """30 s segments of ``recording``, each min-max normalized on its own."""
    return [
        Segment(normalize_minmax(s.signal), s.source_id, s.index)
        for s in segment(recording, SEGMENT_SECONDS, source_id)
    ]


def spear_denoise(recording: Signal, model: DaeModel, detector: Detector) -> tuple[Signal, DenoiseReport]:
    """Reconstruct flagged samples and join the recoverable segments.

    Parameters
    ----------
    recording : Signal
        Raw recording; any trailing partial segment is ignored.
    model : DaeModel
        Trained on segments of ``model.architecture.input_length`` samples.
    detector : Detector

    Returns
    -------
    Signal
        Joined denoised signal (not yet band-passed) with provenance.
    DenoiseReport

    Raises
    ------
    ValueError
        Segment length differs from the model input, or every segment is
        discarded ("no recoverable signal").
    """
    n = segment_length(recording.fs, SEGMENT_SECONDS)
    if n != model.architecture.input_length:
        raise ValueError(
            f"model expects {model.architecture.input_length}-sample segments; "
            f"30 s at {recording.fs} Hz is {n} samples"
        )
    records, kept, pending = [], [], []
    for seg in normalized_segments(recording):
        mask = detect(seg, detector).mask
        decision = discard_rule(mask)
        records.append(
            SegmentRecord(seg.index, seg.signal.t0, mask.corrupted_fraction, decision, tuple(mask.runs()))
        )
        if decision is Decision.DISCARD:
            continue
        x_in = erase(seg.signal, mask)
        kept.append([seg, x_in, mask])
        if mask.flags.any():
            pending.append(len(kept) - 1)

    if not kept:
        raise ValueError("no recoverable signal")

    if pending:
        # one batched forward pass; eval-mode batch norm makes rows independent
        y_out = model.predict(np.stack([kept[i][1].samples for i in pending]))
        for row, i in zip(y_out, pending):
            seg, x_in, mask = kept[i]
            kept[i][0] = Segment(merge(x_in, x_in.with_samples(row), mask), seg.source_id, seg.index)

    return join([k[0] for k in kept]), DenoiseReport(tuple(records))


def spear_filtered(recording: Signal, model: DaeModel, detector: Detector) -> tuple[Signal, Signal, DenoiseReport]:
    """:func:`spear_denoise` followed by the band-pass used before beat detection.

    Returns the filtered signal, the unfiltered denoised signal and the report.
    """
    denoised, report = spear_denoise(recording, model, detector)
    return bandpass(denoised), denoised, report
