"""Zero-phase Butterworth band-pass used before peak detection."""

from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy import signal as sps

from .signal import Signal, normalize_minmax

BAND_HZ = (0.9, 5.0)
ORDER = 4
EDGE_PAD_S = 3.0


@lru_cache(maxsize=32)
def design_bandpass(lo_hz: float, hi_hz: float, fs: float, order: int = ORDER) -> np.ndarray:
    """Second-order-section coefficients for the single-pass filter."""
    if not lo_hz < hi_hz:
        raise ValueError(f"invalid band: lo {lo_hz} Hz must be below hi {hi_hz} Hz")
    if not fs > 2 * hi_hz:
        raise ValueError(f"fs {fs} Hz must exceed twice the upper cutoff {hi_hz} Hz")
    # forward-backward filtering squares the magnitude response; move the
    # design edges outward so the combined response is -3 dB at the cutoffs
    factor = (np.sqrt(2.0) - 1.0) ** (1.0 / (2 * order))
    lo, hi = lo_hz * factor, min(hi_hz / factor, 0.49 * fs)
    return sps.butter(order, [lo, hi], btype="band", fs=fs, output="sos")


def filtfilt_reflect(x: np.ndarray, sos: np.ndarray, pad: int) -> np.ndarray:
    """Forward-backward filter with reflect padding trimmed afterwards."""
    pad = min(pad, x.size - 1)
    xp = np.pad(x, pad, mode="reflect") if pad > 0 else x
    y = sps.sosfiltfilt(sos, xp, padlen=0)
    return y[pad : pad + x.size] if pad > 0 else y


def bandpass(
    signal: Signal,
    lo_hz: float = BAND_HZ[0],
    hi_hz: float = BAND_HZ[1],
    renormalize: bool = True,
) -> Signal:
    """Zero-phase 0.9-5 Hz band-pass, then min-max renormalization.

    Each contiguous region of a joined signal is filtered on its own so the
    filter never runs across a time gap left by a discarded segment.
    """
    sos = design_bandpass(float(lo_hz), float(hi_hz), float(signal.fs))
    pad = int(round(EDGE_PAD_S * signal.fs))
    out = np.empty_like(signal.samples)
    for start, stop in signal.contiguous_regions():
        y = filtfilt_reflect(signal.samples[start:stop], sos, pad)
        if renormalize:
            y = normalize_minmax(Signal(y, signal.fs)).samples
        out[start:stop] = y
    return signal.with_samples(out)
