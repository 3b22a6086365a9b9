"""Self-supervised training data and the autoencoder training loop.

Training pairs are made from clean segments only: random patches of a clean
segment are zeroed and the network learns to restore them. In this module a
mask value of 0 marks an erased sample (``input = X * M``), the opposite of
the detector masks used at inference time, where 1 marks an artifact.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .detect import Detector, HeuristicDetector, is_clean
from .nn import AdamState, DaeModel, Tensor, adam_step, rmse_loss
from .signal import DEFAULT_FS, SEGMENT_SECONDS, BinaryMask, Segment, Signal, segment_length
from .synth import CorpusSpec, NoiseSpec, make_rng, noisy_test_recordings

MIN_PATCH_S = 1.0
MAX_PATCH_S = 15.0
DISJOINT_RETRIES = 100


@dataclass(frozen=True)
class MaskSpec:
    """How training masks are drawn.

    Patch lengths are uniform over whole sample counts in
    ``[patch_len_s[0] * fs, patch_len_s[1] * fs]``; the number of patches is
    uniform over ``patch_counts``.
    """

    patch_len_s: tuple[float, float] = (MIN_PATCH_S, MAX_PATCH_S)
    patch_counts: tuple[int, ...] = (1, 2)
    masks_per_signal: int = 10
    seed: int = 0

    def __post_init__(self):
        lo, hi = self.patch_len_s
        if not (MIN_PATCH_S <= lo <= hi <= MAX_PATCH_S):
            raise ValueError(f"patch lengths must lie in [{MIN_PATCH_S}, {MAX_PATCH_S}] s")
        if not self.patch_counts or any(c not in (1, 2) for c in self.patch_counts):
            raise ValueError("patch counts must be 1 or 2")
        if self.masks_per_signal < 1:
            raise ValueError("masks_per_signal must be at least 1")

    def sample_range(self, fs: float) -> tuple[int, int]:
        return int(round(self.patch_len_s[0] * fs)), int(round(self.patch_len_s[1] * fs))


def _draw_patch(rng: np.random.Generator, n: int, lo: int, hi: int) -> tuple[int, int]:
    length = int(rng.integers(lo, hi + 1))
    start = int(rng.integers(0, n - length + 1))
    return start, length


def _draw_mask(rng: np.random.Generator, n: int, spec: MaskSpec, fs: float) -> np.ndarray:
    lo, hi = spec.sample_range(fs)
    count = int(rng.choice(spec.patch_counts))
    patches = [_draw_patch(rng, n, lo, hi)]
    if count == 2:
        a0, al = patches[0]
        for _ in range(DISJOINT_RETRIES):
            b0, bl = _draw_patch(rng, n, lo, hi)
            if b0 + bl <= a0 or a0 + al <= b0:
                break
        # after the retries the last draw is kept even if it overlaps
        patches.append((b0, bl))
    m = np.ones(n, dtype=np.uint8)
    for start, length in patches:
        m[start : start + length] = 0
    return m


def gen_masks(
    segment_len: int,
    spec: MaskSpec = MaskSpec(),
    fs: float = DEFAULT_FS,
    rng: Optional[np.random.Generator] = None,
) -> list[BinaryMask]:
    """``spec.masks_per_signal`` keep-masks (1 keep, 0 erased) for one segment.

    Parameters
    ----------
    segment_len : int
        Must equal one 30 s segment at ``fs``.
    spec : MaskSpec
    fs : float
    rng : numpy.random.Generator, optional
        Draw from this generator instead of a fresh one seeded with
        ``spec.seed``; :func:`build_dataset` threads a single generator
        through all segments.
    """
    expected = segment_length(fs, SEGMENT_SECONDS)
    if segment_len != expected:
        raise ValueError(f"segment length {segment_len} != {expected}")
    rng = rng if rng is not None else make_rng(spec.seed)
    return [BinaryMask(_draw_mask(rng, segment_len, spec, fs), fs) for _ in range(spec.masks_per_signal)]


@dataclass(frozen=True, eq=False)
class MaskedDataset:
    """Erased inputs, clean targets and keep-masks as stacked ``(N, L)`` arrays.

    ``groups[i]`` is the index of the clean segment pair ``i`` came from, so
    a validation split can hold out whole segments.
    """

    inputs: np.ndarray
    targets: np.ndarray
    masks: np.ndarray
    groups: np.ndarray
    fs: float = DEFAULT_FS

    def __post_init__(self):
        shapes = {self.inputs.shape, self.targets.shape, self.masks.shape}
        if len(shapes) != 1 or self.inputs.ndim != 2:
            raise ValueError("inputs, targets and masks must share one (N, L) shape")
        if self.groups.shape != (self.inputs.shape[0],):
            raise ValueError("one group id per pair is required")

    def __len__(self) -> int:
        return self.inputs.shape[0]

    def __getitem__(self, i: int) -> tuple[Signal, Signal]:
        return Signal(self.inputs[i], self.fs), Signal(self.targets[i], self.fs)

    def subset(self, index) -> "MaskedDataset":
        index = np.asarray(index)
        return MaskedDataset(
            self.inputs[index], self.targets[index], self.masks[index], self.groups[index], self.fs
        )

    @property
    def erased(self) -> np.ndarray:
        """Boolean (N, L) array, True where the input was zeroed."""
        return self.masks == 0


def _as_segment(item) -> Segment:
    return item if isinstance(item, Segment) else Segment(item)


def build_dataset(
    clean_segments: Sequence,
    spec: MaskSpec = MaskSpec(),
    detector: Optional[Detector] = None,
) -> MaskedDataset:
    """Pairs ``(X * M_i, X)`` for every clean segment and each of its masks.

    Parameters
    ----------
    clean_segments : sequence of Segment or Signal
        30 s segments, each already normalized.
    spec : MaskSpec
    detector : Detector, optional
        Every segment must pass :func:`is_clean` under this detector
        (default: :class:`HeuristicDetector`). Pass a detector that always
        reports clean to skip the check.

    Raises
    ------
    ValueError
        On an empty input or a segment the detector flags.
    """
    if len(clean_segments) == 0:
        raise ValueError("empty corpus")
    detector = detector if detector is not None else HeuristicDetector()
    segments = [_as_segment(s) for s in clean_segments]
    fs = segments[0].signal.fs
    rng = make_rng(spec.seed)
    inputs, targets, masks, groups = [], [], [], []
    for g, seg in enumerate(segments):
        if seg.signal.fs != fs:
            raise ValueError("mixed sampling rates")
        if not is_clean(seg, detector):
            raise ValueError(f"segment {g} is not clean; training data must be artifact-free")
        x = seg.signal.samples
        for m in gen_masks(len(x), spec, fs, rng):
            inputs.append(x * m.flags)
            targets.append(x)
            masks.append(m.flags)
            groups.append(g)
    return MaskedDataset(
        np.array(inputs), np.array(targets), np.array(masks, dtype=np.uint8), np.array(groups), fs
    )


def build_pair_dataset(inputs: np.ndarray, targets: np.ndarray, fs: float = DEFAULT_FS) -> MaskedDataset:
    """Dataset from arbitrary (input, target) arrays, e.g. simulated-noise pairs.

    Every sample counts as erased, so erased-region scores cover the full
    segment.
    """
    inputs, targets = np.atleast_2d(inputs), np.atleast_2d(targets)
    return MaskedDataset(
        inputs.astype(np.float64),
        targets.astype(np.float64),
        np.zeros(inputs.shape, dtype=np.uint8),
        np.arange(inputs.shape[0]),
        fs,
    )


def simulated_noise_dataset(
    count: int,
    seed: int,
    noise: NoiseSpec = NoiseSpec(burst_count=1),
    corpus: CorpusSpec = CorpusSpec(),
    fs: float = DEFAULT_FS,
) -> MaskedDataset:
    """(noisy, clean) 30 s pairs for the simulated-noise comparison model.

    Unlike :func:`build_dataset` the network sees the corrupted samples, not
    zeros, and is trained to reproduce the whole clean segment.
    """
    if count < 1:
        raise ValueError("empty corpus")
    triples = noisy_test_recordings(count, SEGMENT_SECONDS, seed, noise, corpus, fs)
    return build_pair_dataset(
        np.array([noisy.samples for _, noisy, _ in triples]),
        np.array([clean.samples for clean, _, _ in triples]),
        fs,
    )


# -- training ------------------------------------------------------------------


@dataclass(frozen=True)
class TrainConfig:
    """Training loop settings.

    ``dtype`` selects the compute precision. Gradients are verified in
    float64; float32 trains about twice as fast and is what the bundled
    demos and acceptance run use.
    """

    epochs: int = 50
    batch_size: int = 32
    lr: float = 1e-3
    shuffle_seed: int = 0
    validation_fraction: float = 0.1
    model_seed: int = 0
    dtype: str = "float64"

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be at least 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be at least 1")
        if not self.lr > 0:
            raise ValueError("lr must be positive")
        if not 0 <= self.validation_fraction < 1:
            raise ValueError("validation_fraction must be in [0, 1)")


@dataclass(frozen=True)
class EpochLog:
    epoch: int
    train_rmse: float
    val_rmse: float
    wall_ms: float


@dataclass
class TrainResult:
    """Final-epoch model, best-validation checkpoint and the per-epoch log."""

    model: DaeModel
    best_model: DaeModel
    best_epoch: int
    log: list[EpochLog] = field(default_factory=list)

    def log_csv(self) -> str:
        rows = ["epoch,train_rmse,val_rmse,wall_ms"]
        rows += [f"{e.epoch},{e.train_rmse:.9g},{e.val_rmse:.9g},{e.wall_ms:.1f}" for e in self.log]
        return "\n".join(rows) + "\n"


class TrainingDivergedError(RuntimeError):
    pass


def split_validation(dataset: MaskedDataset, fraction: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Train/validation pair indices, holding out whole source segments."""
    groups = np.unique(dataset.groups)
    n_val = int(round(fraction * groups.size))
    if fraction > 0 and groups.size > 1:
        n_val = min(max(n_val, 1), groups.size - 1)
    else:
        n_val = 0
    held = make_rng(seed).permutation(groups)[:n_val]
    is_val = np.isin(dataset.groups, held)
    return np.flatnonzero(~is_val), np.flatnonzero(is_val)


def evaluate_rmse(model: DaeModel, dataset: MaskedDataset, batch_size: int = 64) -> float:
    """Eval-mode RMSE over every output sample of ``dataset``."""
    pred = model.predict(dataset.inputs, batch_size=batch_size)
    return float(np.sqrt(np.mean((pred - dataset.targets) ** 2)))


def train_dae(
    dataset: MaskedDataset,
    config: TrainConfig = TrainConfig(),
    model: Optional[DaeModel] = None,
    on_epoch: Optional[Callable[[EpochLog], None]] = None,
) -> TrainResult:
    """Mini-batch Adam on ``rmse_loss(model(input), target)``.

    The batch order is drawn from ``config.shuffle_seed`` alone, so the same
    dataset and config give the same parameters. Validation runs with batch
    norm in eval mode; without a validation split the training loss picks the
    best checkpoint.

    Raises
    ------
    ValueError
        Empty dataset.
    TrainingDivergedError
        A batch loss is not finite.
    """
    if len(dataset) == 0:
        raise ValueError("empty corpus")
    model = model if model is not None else DaeModel(seed=config.model_seed, dtype=config.dtype)
    train_idx, val_idx = split_validation(dataset, config.validation_fraction, config.shuffle_seed)
    train_set = dataset.subset(train_idx)
    val_set = dataset.subset(val_idx) if val_idx.size else None
    x_all = train_set.inputs.astype(model.dtype)
    y_all = train_set.targets.astype(model.dtype)
    rng = make_rng(config.shuffle_seed)
    state = AdamState(lr=config.lr)
    params = model.parameters()
    best, best_loss, best_epoch = model.copy(), np.inf, 0
    log = []
    for epoch in range(1, config.epochs + 1):
        t_start = time.perf_counter()
        model.train()
        order = rng.permutation(len(train_set))
        sq_sum = 0.0
        for b, start in enumerate(range(0, order.size, config.batch_size)):
            idx = order[start : start + config.batch_size]
            if idx.size < 2:
                # a one-item batch has no batch statistics to normalize with
                continue
            for p in params:
                p.grad = None
            loss = rmse_loss(model.forward(x_all[idx]), Tensor(y_all[idx][:, None, :]))
            value = float(loss.data)
            if not np.isfinite(value):
                raise TrainingDivergedError(
                    f"non-finite loss (seed={config.shuffle_seed}, model_seed={model.seed}, "
                    f"epoch={epoch}, batch={b})"
                )
            loss.backward()
            adam_step(params, state)
            sq_sum += value * value * idx.size
        train_rmse = float(np.sqrt(sq_sum / order.size))
        val_rmse = evaluate_rmse(model, val_set) if val_set is not None else float("nan")
        score = val_rmse if val_set is not None else train_rmse
        if score < best_loss:
            best, best_loss, best_epoch = model.copy(), score, epoch
        entry = EpochLog(epoch, train_rmse, val_rmse, (time.perf_counter() - t_start) * 1000.0)
        log.append(entry)
        if on_epoch is not None:
            on_epoch(entry)
    model.eval()
    best.eval()
    return TrainResult(model, best, best_epoch, log)


# -- naive reconstructions -------------------------------------------------------


def zero_fill(inputs: np.ndarray, masks: np.ndarray) -> np.ndarray:
    """Leave erased samples at zero."""
    return np.where(masks == 0, 0.0, inputs)


def linear_fill(inputs: np.ndarray, masks: np.ndarray) -> np.ndarray:
    """Straight line across each erased run between its neighbouring kept samples.

    A run touching the segment edge is held at the nearest kept value; a
    fully erased row is filled with 0.5.
    """
    inputs, masks = np.atleast_2d(inputs), np.atleast_2d(masks)
    out = np.array(inputs, dtype=np.float64)
    pos = np.arange(inputs.shape[1])
    for row, keep in zip(out, masks.astype(bool)):
        if not keep.any():
            row[:] = 0.5
        elif not keep.all():
            row[~keep] = np.interp(pos[~keep], pos[keep], row[keep])
    return out


def erased_rmse(pred: np.ndarray, target: np.ndarray, masks: np.ndarray) -> float:
    """RMSE pooled over every erased sample."""
    sel = np.asarray(masks) == 0
    if not sel.any():
        raise ValueError("no erased samples")
    diff = np.asarray(pred)[sel] - np.asarray(target)[sel]
    return float(np.sqrt(np.mean(diff * diff)))


def fixed_patch_masks(
    count: int, patch_len_s: float, seed: int, n: Optional[int] = None, fs: float = DEFAULT_FS
) -> np.ndarray:
    """``count`` single-patch keep-masks of one fixed length at uniform positions."""
    n = n if n is not None else segment_length(fs, SEGMENT_SECONDS)
    length = int(round(patch_len_s * fs))
    if not 1 <= length <= n:
        raise ValueError(f"patch of {length} samples does not fit a {n}-sample segment")
    rng = make_rng(seed)
    masks = np.ones((count, n), dtype=np.uint8)
    for row in masks:
        start = int(rng.integers(0, n - length + 1))
        row[start : start + length] = 0
    return masks
