"""Artifact detection: per-sample probabilities, thresholding and the discard rule.

Three detectors share one small protocol (``probabilities(segment)``):

* :class:`OracleDetector` replays a known artifact mask (synthetic evaluation).
* :class:`HeuristicDetector` flags frames whose activity is an outlier for the segment.
* :class:`ExternalMaskDetector` reads a mask produced by any outside model.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Protocol, Union

import numpy as np

from .io import read_mask
from .signal import SEGMENT_SECONDS, BinaryMask, Segment, segment_length

THRESHOLD = 0.5
DISCARD_FRACTION = 0.75


class Decision(str, Enum):
    KEEP = "keep"
    DISCARD = "discard"


class Detector(Protocol):
    def probabilities(self, segment: Segment) -> np.ndarray: ...


@dataclass(frozen=True, eq=False)
class DetectorOutput:
    probs: np.ndarray
    mask: BinaryMask


class _RecordingMask:
    """Slices a recording-level mask at each segment's position."""

    def __init__(self, mask: BinaryMask):
        self.mask = mask

    def probabilities(self, segment: Segment) -> np.ndarray:
        sig = segment.signal
        start = int(round(sig.t0 * sig.fs))
        flags = self.mask.flags[start : start + len(sig)]
        if flags.size != len(sig):
            raise ValueError(
                f"mask of {len(self.mask)} samples does not cover segment at t0={sig.t0} s"
            )
        return flags.astype(np.float64)


class OracleDetector(_RecordingMask):
    """Returns the known ground-truth artifact mask."""

    @classmethod
    def from_ground_truth(cls, gt) -> "OracleDetector":
        return cls(gt.noise_mask)


class ExternalMaskDetector(_RecordingMask):
    """Mask read from a ``.mask.csv`` file covering the whole recording."""

    def __init__(self, mask: Union[BinaryMask, str, Path]):
        self.path = None
        if not isinstance(mask, BinaryMask):
            self.path = Path(mask)
            mask = read_mask(self.path)
        super().__init__(mask)


def _robust_z(values: np.ndarray, floor_frac: float) -> np.ndarray:
    med = np.median(values)
    scale = max(1.4826 * np.median(np.abs(values - med)), floor_frac * abs(med))
    if scale <= 0:
        # constant features: any strictly larger value is an outlier
        return np.where(values > med, np.inf, 0.0)
    return (values - med) / scale


@dataclass(frozen=True)
class HeuristicDetector:
    """Frame-level outlier detector.

    The segment is cut into ``frame_s`` frames. For each frame the energy of
    the first difference and the peak-to-peak range are scored against the
    segment median with a MAD-based z-score; a frame scoring above ``k`` on
    either feature is an artifact. Flags are dilated by ``dilate_s`` per side.

    The MAD is floored at ``scale_floor`` times the median: when the beat
    period is close to the frame length almost every frame holds one beat,
    the MAD collapses, and a frame that happens to catch two upstrokes would
    otherwise look like an artifact. Such a frame has at most about twice the
    median energy, so the floor keeps ``1 + k * scale_floor`` above 2.
    """

    k: float = 3.5
    frame_s: float = 0.5
    dilate_s: float = 0.25
    scale_floor: float = 0.35

    def frame_scores(self, x: np.ndarray, fs: float) -> np.ndarray:
        frame = max(int(round(self.frame_s * fs)), 2)
        n_frames = int(np.ceil(x.size / frame))
        fill = n_frames * frame - x.size
        padded = np.pad(x, (0, fill), mode="edge").reshape(n_frames, frame)
        slope = np.pad(np.diff(x, prepend=x[0]), (0, fill)).reshape(n_frames, frame)
        energy = (slope**2).sum(axis=1)
        span = padded.max(axis=1) - padded.min(axis=1)
        return np.maximum(_robust_z(energy, self.scale_floor), _robust_z(span, self.scale_floor))

    def probabilities(self, segment: Segment) -> np.ndarray:
        x, fs = segment.signal.samples, segment.signal.fs
        frame = max(int(round(self.frame_s * fs)), 2)
        flagged = self.frame_scores(x, fs) > self.k
        probs = np.repeat(flagged.astype(np.float64), frame)[: x.size]
        grow = int(round(self.dilate_s * fs))
        if grow and probs.any():
            kernel = np.ones(2 * grow + 1)
            probs = (np.convolve(probs, kernel, mode="same") > 0).astype(np.float64)
        return probs


def parse_detector(spec: str, mask: BinaryMask | None = None) -> Detector:
    """Build a detector from ``oracle``, ``heuristic`` or ``external:<path>``.

    ``oracle`` needs the ground-truth ``mask``.
    """
    if spec == "heuristic":
        return HeuristicDetector()
    if spec == "oracle":
        if mask is None:
            raise ValueError("oracle detector needs a ground-truth mask")
        return OracleDetector(mask)
    if spec.startswith("external:"):
        return ExternalMaskDetector(spec.split(":", 1)[1])
    raise ValueError(f"unknown detector {spec!r}; use oracle, heuristic or external:<path>")


def threshold(probs: np.ndarray, fs: float) -> BinaryMask:
    return BinaryMask((np.asarray(probs) >= THRESHOLD).astype(np.uint8), fs)


def detect(segment: Segment, detector: Detector) -> DetectorOutput:
    sig = segment.signal
    expected = segment_length(sig.fs, SEGMENT_SECONDS)
    if len(sig) != expected:
        raise ValueError(f"segment has {len(sig)} samples, expected {expected}")
    probs = np.clip(np.asarray(detector.probabilities(segment), dtype=np.float64), 0.0, 1.0)
    if probs.shape != sig.samples.shape:
        raise ValueError("detector output length differs from segment length")
    return DetectorOutput(probs, threshold(probs, sig.fs))


def is_clean(segment: Segment, detector: Detector) -> bool:
    return not detect(segment, detector).mask.flags.any()


def discard_rule(mask: BinaryMask) -> Decision:
    """Discard a segment only when strictly more than 75% of it is flagged."""
    return Decision.DISCARD if mask.corrupted_fraction > DISCARD_FRACTION else Decision.KEEP
