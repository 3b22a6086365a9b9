"""Command-line entry point: ``ppgdae <command> ...``.

Exit codes: 0 success, 1 usage error, 2 data or stage error, 3 acceptance
failure (``e2e`` only).
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .detect import parse_detector
from .filters import bandpass
from .harness import evaluate_corpus
from .io import read_mask, read_peaks, read_signal, write_mask, write_peaks, write_signal
from .metrics import (
    BeatSeries,
    HrvWindowConfig,
    HrWindowConfig,
    compare,
    detect_peaks,
    estimate_hr_windows,
    estimate_hrv_windows,
)
from .nn import DaeModel
from .pipeline import normalized_segments, spear_denoise
from .synth import (
    CorpusSpec,
    NoiseSpec,
    clean_training_segments,
    derive_seed,
    noisy_test_recordings,
)
from .train import (
    MaskSpec,
    TrainConfig,
    build_dataset,
    erased_rmse,
    fixed_patch_masks,
    linear_fill,
    simulated_noise_dataset,
    train_dae,
    zero_fill,
)

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_ACCEPTANCE = 0, 1, 2, 3

FORMATS = """\
file formats
  ppgcsv      (*.ppg.csv) line 1 "fs=<Hz>", optional "# key=<json>" comment lines, then
              one sample per line. A "# provenance=[[start, stop, segment,
              t0], ...]" comment maps joined samples back to source time.
  mask        same header as ppgcsv, then one 0/1 per line (1 = artifact).
  peaks       optional "# key=<json>" lines, then one peak time (s) per line.
  checkpoint  JSON {"format": "ppgdae-checkpoint", "version": 1,
              "architecture", "seed", "dtype", "arrays"}; arrays hold
              base64 little-endian buffers with dtype and shape.
  reports     JSON with a "config" field recording every option and seed.

detectors
  oracle            replay a ground-truth mask (needs --mask)
  heuristic         frame-level outlier detector
  external:<path>   mask file covering the whole recording
"""


class UsageError(Exception):
    pass


class StageError(Exception):
    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage {stage} failed: {cause}")
        self.stage = stage


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _seed(args, name: str = "seed") -> int:
    value = getattr(args, name)
    if value is None:
        value = int(np.random.SeedSequence().entropy % 2**31)
        print(f"{name}: {value}", file=sys.stderr)
        setattr(args, name, value)
    return value


# where results are written does not change them, so destinations stay out of
# the embedded config and identical runs produce identical files
_NOT_CONFIG = {"func", "verbose", "report", "windows_csv", "json", "csv", "out", "filtered_out", "save", "log", "out_dir"}


def _config(args) -> dict:
    out = {k: (str(v) if isinstance(v, Path) else v) for k, v in vars(args).items() if k not in _NOT_CONFIG}
    out["version"] = __version__
    return out


def _existing(path: Path, what: str) -> Path:
    if not path.exists():
        raise UsageError(f"{what} not found: {path}")
    return path


def _writable(path: Optional[Path]) -> None:
    if path is not None and not path.parent.exists():
        raise UsageError(f"output directory does not exist: {path.parent}")


def _noise_spec(args) -> NoiseSpec:
    return NoiseSpec(
        bw_amp=args.bw_amp,
        bw_freq_hz=args.bw_freq,
        fm_jitter_frac=args.fm_jitter,
        burst_amp=args.burst_amp,
        burst_count=args.burst_count,
        burst_len_s=(args.burst_min, args.burst_max),
    )


def _add_noise_flags(p) -> None:
    d = NoiseSpec()
    p.add_argument("--bw-amp", type=float, default=d.bw_amp, help="baseline wander amplitude")
    p.add_argument("--bw-freq", type=float, default=d.bw_freq_hz, help="baseline wander frequency (Hz)")
    p.add_argument("--fm-jitter", type=float, default=d.fm_jitter_frac, help="beat-period jitter inside bursts")
    p.add_argument("--burst-amp", type=float, default=d.burst_amp, help="burst noise amplitude")
    p.add_argument("--burst-count", type=int, default=d.burst_count, help="bursts per recording")
    p.add_argument("--burst-min", type=float, default=d.burst_len_s[0], help="shortest burst (s)")
    p.add_argument("--burst-max", type=float, default=d.burst_len_s[1], help="longest burst (s)")


# -- synth ---------------------------------------------------------------------


def cmd_synth(args) -> int:
    seed = _seed(args)
    out = args.out_dir
    out.mkdir(parents=True, exist_ok=True)
    meta = {"config": _config(args)}
    if args.kind == "clean":
        for i, sig in enumerate(clean_training_segments(args.count, seed)):
            write_signal(out / f"seg{i:04d}.ppg.csv", sig, meta)
    else:
        triples = noisy_test_recordings(args.count, args.duration, seed, _noise_spec(args))
        for i, (clean, noisy, gt) in enumerate(triples):
            stem = f"rec{i:03d}"
            write_signal(out / f"{stem}.ppg.csv", clean, meta)
            write_signal(out / f"{stem}.noisy.ppg.csv", noisy, meta)
            write_mask(out / f"{stem}.mask.csv", gt.noise_mask, meta)
            write_peaks(out / f"{stem}.peaks.csv", gt.peak_times_s, meta)
    (out / "manifest.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    print(f"wrote {args.count} {args.kind} recordings to {out}")
    return EXIT_OK


# -- train ---------------------------------------------------------------------


def _load_corpus(directory: Path) -> list:
    files = sorted(f for f in directory.glob("*.ppg.csv") if not f.name.endswith(".noisy.ppg.csv"))
    if not files:
        raise ValueError(f"empty corpus: no clean .ppg.csv files in {directory}")
    segments = []
    for f in files:
        segments += normalized_segments(read_signal(f), f.stem)
    if not segments:
        raise ValueError("empty corpus: no file holds a full 30 s segment")
    return segments


def cmd_train(args) -> int:
    seed = _seed(args)
    _existing(args.corpus, "corpus directory")
    _writable(args.save)
    _writable(args.log)
    segments = _load_corpus(args.corpus)
    detector = parse_detector(args.detector) if args.detector != "none" else _AlwaysClean()
    dataset = build_dataset(segments, MaskSpec(seed=derive_seed(seed, "masks")), detector)
    config = TrainConfig(
        epochs=args.epochs,
        batch_size=args.batch,
        lr=args.lr,
        shuffle_seed=derive_seed(seed, "shuffle"),
        validation_fraction=args.val_fraction,
        model_seed=derive_seed(seed, "init"),
        dtype=args.dtype,
    )
    progress = (lambda e: print(f"epoch {e.epoch}: train {e.train_rmse:.5f} val {e.val_rmse:.5f}", file=sys.stderr)) if args.verbose else None
    result = train_dae(dataset, config, on_epoch=progress)
    chosen = result.best_model if args.keep == "best" else result.model
    chosen.save(args.save, {"config": _config(args)})
    if args.log is not None:
        args.log.write_text(f"# config={json.dumps(_config(args), sort_keys=True)}\n" + result.log_csv())
    print(f"trained on {len(dataset)} pairs from {len(segments)} segments; best epoch {result.best_epoch}; saved {args.save}")
    return EXIT_OK


class _AlwaysClean:
    def probabilities(self, segment):
        return np.zeros(len(segment.signal))


# -- denoise -------------------------------------------------------------------


def _detector_from_args(args):
    mask = read_mask(_existing(args.mask, "mask file")) if args.mask is not None else None
    try:
        return parse_detector(args.detector, mask)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def cmd_denoise(args) -> int:
    _existing(args.input, "input signal")
    _existing(args.model, "model checkpoint")
    _writable(args.out)
    _writable(args.report)
    detector = _detector_from_args(args)
    recording = read_signal(args.input)
    model = DaeModel.load(args.model)
    denoised, report = spear_denoise(recording, model, detector)
    meta = {"config": _config(args)}
    write_signal(args.out, denoised, meta)
    if args.filtered_out is not None:
        write_signal(args.filtered_out, bandpass(denoised), meta)
    if args.report is not None:
        args.report.write_text(report.to_json(config=_config(args)))
    print(f"{report.segments_total} segments, {report.segments_discarded} discarded; wrote {args.out}")
    return EXIT_OK


# -- eval-hr / eval-hrv ----------------------------------------------------------


def _source_end(signal) -> float:
    return max(span.t0 + (span.stop - span.start) / signal.fs for span in signal.spans())


def _eval_inputs(args):
    _existing(args.signal, "signal")
    _existing(args.peaks, "peaks file")
    _writable(args.csv)
    _writable(args.json)
    signal = read_signal(args.signal)
    if not args.no_filter:
        signal = bandpass(signal)
    start = signal.t0
    stop = args.duration + start if args.duration is not None else _source_end(signal)
    truth_times = read_peaks(args.peaks)
    truth_times = truth_times[(truth_times >= start) & (truth_times < stop)]
    return detect_peaks(signal), BeatSeries.from_times(truth_times, start, stop), start, stop - start


def _fmt(v) -> str:
    return "" if v is None else f"{v:.6f}"


def _write_eval(args, header: str, rows: list[str], summary: dict) -> None:
    summary = {**summary, "config": _config(args)}
    text = json.dumps(summary, indent=2, sort_keys=True) + "\n"
    if args.csv is not None:
        args.csv.write_text(f"# config={json.dumps(_config(args), sort_keys=True)}\n{header}\n" + "".join(r + "\n" for r in rows))
    if args.json is not None:
        args.json.write_text(text)
    else:
        sys.stdout.write(text)


def cmd_eval_hr(args) -> int:
    beats, truth, t0, duration = _eval_inputs(args)
    cfg = HrWindowConfig(args.window, args.step)
    est = estimate_hr_windows(beats, duration, cfg, t0)
    ref = estimate_hr_windows(truth, duration, cfg, t0)
    res = compare([w.bpm for w in est], [w.bpm for w in ref])
    rows = [f"{e.t_start:.3f},{_fmt(e.bpm)},{_fmt(r.bpm)}" for e, r in zip(est, ref)]
    _write_eval(args, "t_start,bpm,truth_bpm", rows, {"hr_mae": res.mae, "windows_used": res.used, "windows_dropped": res.dropped})
    return EXIT_OK


def cmd_eval_hrv(args) -> int:
    beats, truth, t0, duration = _eval_inputs(args)
    cfg = HrvWindowConfig(args.window, args.overlap)
    est = estimate_hrv_windows(beats, duration, cfg, t0)
    ref = estimate_hrv_windows(truth, duration, cfg, t0)
    s = compare([w.sdnn for w in est], [w.sdnn for w in ref])
    r = compare([w.rmssd for w in est], [w.rmssd for w in ref])
    rows = [
        f"{e.t_start:.3f},{_fmt(e.sdnn)},{_fmt(t.sdnn)},{_fmt(e.rmssd)},{_fmt(t.rmssd)}" for e, t in zip(est, ref)
    ]
    summary = {"sdnn_mae": s.mae, "rmssd_mae": r.mae, "windows_used": s.used, "windows_dropped": s.dropped}
    _write_eval(args, "t_start,sdnn,truth_sdnn,rmssd,truth_rmssd", rows, summary)
    return EXIT_OK


# -- e2e -----------------------------------------------------------------------

HR_MAE_LIMIT_BPM = 5.0
HOLDOUT_PATCHES_S = (1.0, 5.0, 10.0)


def acceptance_checks(scores: dict, reconstruction: dict) -> dict:
    """Pass/fail flags for the orderings an end-to-end run must show."""
    checks = {}
    raw, bp, sp = scores.get("raw", {}), scores.get("bandpass", {}), scores.get("spear", {})

    def ordered(metric):
        vals = [sp.get(f"{metric}_mae"), bp.get(f"{metric}_mae"), raw.get(f"{metric}_mae")]
        return None not in vals and vals[0] < vals[1] < vals[2]

    checks["hr_ordering"] = ordered("hr")
    checks["hr_spear_within_limit"] = sp.get("hr_mae") is not None and sp["hr_mae"] <= HR_MAE_LIMIT_BPM
    checks["sdnn_ordering"] = ordered("sdnn")
    checks["rmssd_ordering"] = ordered("rmssd")
    for key, r in reconstruction.items():
        checks[f"reconstruction_{key}"] = r["model"] < r["zero_fill"] and r["model"] < r["linear"]
    return checks


def _stage(name, fn, *a, **kw):
    try:
        return fn(*a, **kw)
    except (UsageError, KeyboardInterrupt):
        raise
    except Exception as exc:
        raise StageError(name, exc) from exc


def run_e2e(args, log=lambda msg: None) -> dict:
    """Build corpora, train, denoise and score; returns the report document."""
    seed = args.seed
    if args.train_segments < 1:
        raise StageError("corpus", ValueError("empty corpus"))
    corpus = CorpusSpec()
    noise = _noise_spec(args)
    log("generating corpora")
    train_segs = _stage("corpus", clean_training_segments, args.train_segments, derive_seed(seed, "train-corpus"), corpus)
    test = _stage("corpus", noisy_test_recordings, args.test_recordings, args.duration, derive_seed(seed, "test-corpus"), noise, corpus)
    dataset = _stage("dataset", build_dataset, train_segs, MaskSpec(seed=derive_seed(seed, "masks")))
    config = TrainConfig(
        epochs=args.epochs,
        batch_size=args.batch,
        shuffle_seed=derive_seed(seed, "shuffle"),
        model_seed=derive_seed(seed, "init"),
        dtype=args.dtype,
    )
    log(f"training on {len(dataset)} pairs")
    result = _stage("train", train_dae, dataset, config)
    model = result.model

    simnoise = None
    if args.simnoise:
        log("training simulated-noise model")
        sim_set = _stage("simnoise", simulated_noise_dataset, args.train_segments, derive_seed(seed, "simnoise-corpus"))
        simnoise = _stage("simnoise", train_dae, sim_set, config).model

    log("scoring reconstruction on held-out segments")
    held = np.array([s.samples for s in _stage("holdout", clean_training_segments, args.holdout_segments, derive_seed(seed, "holdout"), corpus)])
    reconstruction = {}
    for patch in HOLDOUT_PATCHES_S:
        masks = fixed_patch_masks(len(held), patch, derive_seed(seed, f"holdout-{patch:g}s"))
        x = held * masks
        reconstruction[f"{patch:g}s"] = {
            "model": round(erased_rmse(model.predict(x), held, masks), 6),
            "zero_fill": round(erased_rmse(zero_fill(x, masks), held, masks), 6),
            "linear": round(erased_rmse(linear_fill(x, masks), held, masks), 6),
        }

    log("denoising and scoring the test corpus")
    detector_for = lambda gt: parse_detector(args.detector, gt.noise_mask)
    report = _stage(
        "evaluate",
        evaluate_corpus,
        test,
        model,
        detector_for,
        simnoise,
        HrWindowConfig(),
        HrvWindowConfig(),
    )
    doc = report.to_dict()
    doc["config"] = _config(args)
    doc["training"] = {
        "pairs": len(dataset),
        "best_epoch": result.best_epoch,
        "final_train_rmse": round(result.log[-1].train_rmse, 6),
        "final_val_rmse": round(result.log[-1].val_rmse, 6),
    }
    doc["reconstruction"] = reconstruction
    doc["acceptance"] = acceptance_checks(doc["scores"], reconstruction)
    doc["window_rows"] = report.window_rows()
    return doc


def cmd_e2e(args) -> int:
    _seed(args)
    _writable(args.report)
    verbose = (lambda msg: print(msg, file=sys.stderr)) if args.verbose else (lambda msg: None)
    t_start = time.perf_counter()
    doc = run_e2e(args, verbose)
    rows = doc.pop("window_rows")
    text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    if args.report is not None:
        args.report.write_text(text)
        if args.windows_csv is not None:
            args.windows_csv.write_text(f"# config={json.dumps(doc['config'], sort_keys=True)}\n" + "\n".join(rows) + "\n")
    else:
        sys.stdout.write(text)
    failed = [k for k, ok in doc["acceptance"].items() if not ok]
    # wall time goes to stderr only so reports stay byte-identical between runs
    print(f"e2e finished in {time.perf_counter() - t_start:.1f} s; failed checks: {failed or 'none'}", file=sys.stderr)
    return EXIT_ACCEPTANCE if failed else EXIT_OK


# -- parser --------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="ppgdae",
        description="Erase-and-reconstruct denoising of PPG signals with a convolutional autoencoder.",
        epilog=FORMATS,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def command(name, func, help_text):
        p = sub.add_parser(name, help=help_text, description=help_text, epilog=FORMATS, formatter_class=argparse.RawDescriptionHelpFormatter)
        p.set_defaults(func=func)
        return p

    p = command("synth", cmd_synth, "generate a seeded synthetic corpus")
    p.add_argument("--out-dir", type=Path, required=True)
    p.add_argument("--kind", choices=("clean", "noisy"), default="noisy", help="clean 30 s training segments or paired noisy test recordings")
    p.add_argument("--count", type=int, default=20)
    p.add_argument("--duration", type=float, default=180.0, help="seconds per noisy recording")
    p.add_argument("--seed", type=int)
    _add_noise_flags(p)

    p = command("train", cmd_train, "train the autoencoder on the clean *.ppg.csv files of a directory")
    p.add_argument("--corpus", type=Path, required=True)
    p.add_argument("--epochs", type=int, default=50)
    p.add_argument("--batch", type=int, default=32)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--val-fraction", type=float, default=0.1)
    p.add_argument("--dtype", choices=("float64", "float32"), default="float64")
    p.add_argument("--detector", default="heuristic", help="cleanness check for training segments (heuristic, external:<path> or none)")
    p.add_argument("--keep", choices=("final", "best"), default="final", help="which checkpoint to save")
    p.add_argument("--seed", type=int)
    p.add_argument("--save", type=Path, required=True)
    p.add_argument("--log", type=Path, help="per-epoch CSV log")
    p.add_argument("--verbose", action="store_true")

    p = command("denoise", cmd_denoise, "erase detected artifacts and reconstruct them")
    p.add_argument("--in", dest="input", type=Path, required=True)
    p.add_argument("--model", type=Path, required=True)
    p.add_argument("--detector", default="heuristic")
    p.add_argument("--mask", type=Path, help="ground-truth mask for the oracle detector")
    p.add_argument("--out", type=Path, required=True, help="denoised ppgcsv (before band-pass)")
    p.add_argument("--filtered-out", type=Path, help="also write the band-passed signal")
    p.add_argument("--report", type=Path)

    for name, func, help_text in (
        ("eval-hr", cmd_eval_hr, "windowed heart-rate error against reference peaks"),
        ("eval-hrv", cmd_eval_hrv, "windowed SDNN/RMSSD error against reference peaks"),
    ):
        p = command(name, func, help_text)
        p.add_argument("--signal", type=Path, required=True)
        p.add_argument("--peaks", type=Path, required=True, help="reference peak times")
        p.add_argument("--no-filter", action="store_true", help="skip the band-pass before peak detection")
        p.add_argument("--duration", type=float, help="seconds of source time to score (default: signal extent)")
        p.add_argument("--csv", type=Path, help="per-window values")
        p.add_argument("--json", type=Path, help="summary (default: stdout)")
        if name == "eval-hr":
            p.add_argument("--window", type=float, default=HrWindowConfig.window_s)
            p.add_argument("--step", type=float, default=HrWindowConfig.step_s)
        else:
            p.add_argument("--window", type=float, default=HrvWindowConfig.window_s)
            p.add_argument("--overlap", type=float, default=HrvWindowConfig.overlap_frac)

    p = command("e2e", cmd_e2e, "generate corpora, train, denoise and score in one seeded run")
    p.add_argument("--seed", type=int)
    p.add_argument("--train-segments", type=int, default=200)
    p.add_argument("--test-recordings", type=int, default=20)
    p.add_argument("--holdout-segments", type=int, default=50)
    p.add_argument("--duration", type=float, default=180.0)
    p.add_argument("--epochs", type=int, default=50)
    p.add_argument("--batch", type=int, default=32)
    p.add_argument("--dtype", choices=("float64", "float32"), default="float32")
    p.add_argument("--detector", default="oracle")
    p.add_argument("--simnoise", action="store_true", help="also train and score a simulated-noise DAE")
    p.add_argument("--report", type=Path)
    p.add_argument("--windows-csv", type=Path)
    p.add_argument("--verbose", action="store_true")
    _add_noise_flags(p)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = None
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"ppgdae: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except StageError as exc:
        print(f"ppgdae {getattr(args, 'command', '')}: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (ValueError, OSError, KeyError, json.JSONDecodeError) as exc:
        print(f"ppgdae {getattr(args, 'command', '')}: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
