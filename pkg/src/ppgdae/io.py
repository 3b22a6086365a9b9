"""Plain-text file formats.

``ppgcsv``: first line ``fs=<Hz>``, then one sample per line written with 9
significant digits. Lines beginning with ``#`` are comments and may carry
metadata (``# key=value``); :func:`read_signal` restores a ``provenance``
comment written by :func:`write_signal`.

Mask files use the same header with one ``0``/``1`` per line. Peak files hold
one peak time in seconds per line.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Iterable, Optional

import numpy as np

from .signal import BinaryMask, Signal, Span


def _format_fs(fs: float) -> str:
    return str(int(fs)) if float(fs).is_integer() else repr(float(fs))


def _comment_lines(meta: Optional[dict]) -> list[str]:
    if not meta:
        return []
    return [f"# {key}={json.dumps(value, sort_keys=True)}" for key, value in meta.items()]


def _read_lines(path) -> tuple[float, list[str], dict]:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or not lines[0].startswith("fs="):
        raise ValueError(f"{path}: first line must be fs=<Hz>")
    fs = float(lines[0][3:])
    values, meta = [], {}
    for line in lines[1:]:
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            key, sep, value = line[1:].strip().partition("=")
            if sep:
                try:
                    meta[key] = json.loads(value)
                except json.JSONDecodeError:
                    meta[key] = value
            continue
        values.append(line)
    return fs, values, meta


def write_signal(path, signal: Signal, meta: Optional[dict] = None) -> None:
    meta = dict(meta or {})
    if signal.provenance:
        meta["provenance"] = [list(s) for s in signal.provenance]
    elif signal.t0:
        meta["t0"] = signal.t0
    body = [f"fs={_format_fs(signal.fs)}", *_comment_lines(meta)]
    body += [f"{v:.9g}" for v in signal.samples]
    Path(path).write_text("\n".join(body) + "\n", encoding="utf-8")


def read_signal(path) -> Signal:
    fs, values, meta = _read_lines(path)
    samples = np.array([float(v) for v in values])
    prov = tuple(Span(int(a), int(b), int(i), float(t)) for a, b, i, t in meta.get("provenance", []))
    t0 = prov[0].t0 if prov else float(meta.get("t0", 0.0))
    return Signal(samples, fs, t0, prov)


def read_signal_meta(path) -> dict:
    return _read_lines(path)[2]


def write_mask(path, mask: BinaryMask, meta: Optional[dict] = None) -> None:
    body = [f"fs={_format_fs(mask.fs)}", *_comment_lines(meta)]
    body += [str(int(v)) for v in mask.flags]
    Path(path).write_text("\n".join(body) + "\n", encoding="utf-8")


def read_mask(path) -> BinaryMask:
    fs, values, _ = _read_lines(path)
    flags = np.array([int(v) for v in values], dtype=np.uint8)
    return BinaryMask(flags, fs)


def write_peaks(path, peak_times_s: Iterable[float], meta: Optional[dict] = None) -> None:
    body = [*_comment_lines(meta)] + [f"{t:.9g}" for t in peak_times_s]
    Path(path).write_text("\n".join(body) + "\n", encoding="utf-8")


def read_peaks(path) -> np.ndarray:
    values = [
        float(line)
        for line in Path(path).read_text(encoding="utf-8").splitlines()
        if line.strip() and not line.lstrip().startswith("#")
    ]
    return np.array(values)
