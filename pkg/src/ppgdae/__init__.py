"""Erase-and-reconstruct denoising of wrist PPG signals.

Artifact regions found by a detector are zeroed and filled in by a
convolutional denoising autoencoder trained only on clean signal; everything
outside those regions is passed through untouched. Heart rate and HRV are then
measured with a band-pass filter and a two-moving-average peak detector.
"""

__version__ = "0.1.0"

from .detect import (
    Decision,
    ExternalMaskDetector,
    HeuristicDetector,
    OracleDetector,
    detect,
    discard_rule,
    is_clean,
    parse_detector,
)
from .filters import bandpass, design_bandpass
from .harness import CorpusReport, RecordingEval, eval_harness, evaluate_corpus
from .io import read_mask, read_peaks, read_signal, write_mask, write_peaks, write_signal
from .metrics import (
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
from .nn import DaeArchitecture, DaeModel
from .pipeline import DenoiseReport, normalized_segments, spear_denoise, spear_filtered
from .signal import (
    BinaryMask,
    Segment,
    Signal,
    erase,
    join,
    merge,
    normalize_minmax,
    segment,
)
from .synth import (
    BeatTemplateParams,
    CorpusSpec,
    GroundTruth,
    HrvModulation,
    NoiseSpec,
    clean_training_segments,
    corrupt,
    derive_seed,
    gen_clean,
    make_rng,
    noisy_test_recordings,
    random_recording,
)
from .train import (
    MaskSpec,
    TrainConfig,
    build_dataset,
    erased_rmse,
    fixed_patch_masks,
    gen_masks,
    linear_fill,
    train_dae,
    zero_fill,
)

__all__ = [name for name in dir() if not name.startswith("_")]
