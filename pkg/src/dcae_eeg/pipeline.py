"""Corpus-level preparation: EDF files -> screened, scaled ``[N, 23, 512]`` window sets."""

from __future__ import annotations

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError, DegenerateScale, MissingChannels, TooShort
from .preprocess import MONTAGE_LABELS, PipelineParams, preprocess_recording
from .signal_io import read_edf
from .windowing import (HOP, KEEP, STD_HIGH, STD_LOW, WINDOW, HistogramScaler,
                        plausibility_check, segment_windows)

log = logging.getLogger(__name__)

SPLITS = ("train", "dev", "eval")
REPORT_COLUMNS = ("split", "file", "kept", "std_high", "std_low", "missing_channels",
                  "too_short", "degenerate_scale", "unreadable")


def worker_count():
    """Worker cap from ``DCAE_THREADS`` (default 1)."""
    try:
        return max(1, int(os.environ.get("DCAE_THREADS", "1")))
    except ValueError:
        return 1


def list_edf(directory):
    return sorted(p for p in Path(directory).rglob("*") if p.suffix.lower() == ".edf")


def split_corpus(corpus_dir, dev_fraction=0.2, eval_fraction=0.0):
    """Map split name -> sorted EDF paths.

    Subdirectories named ``train``/``dev``/``eval`` are used when present.
    Otherwise the sorted files are cut in order: ``train`` first, then
    ``dev_fraction`` of them as ``dev`` and ``eval_fraction`` as ``eval``
    (an empty ``eval`` is omitted).
    """
    root = Path(corpus_dir)
    named = {s: list_edf(root / s) for s in SPLITS if (root / s).is_dir()}
    if named:
        return named
    files = list_edf(root)
    n = len(files)
    n_dev = int(round(n * dev_fraction)) if n > 1 else 0
    n_eval = int(round(n * eval_fraction)) if n > 2 else 0
    cut = max(n - n_dev - n_eval, 1 if n else 0)
    out = {"train": files[:cut], "dev": files[cut:cut + n_dev]}
    if n_eval:
        out["eval"] = files[cut + n_dev:]
    return out


@dataclass
class FileResult:
    file: str
    windows: np.ndarray = None
    starts: list = field(default_factory=list)
    counts: dict = field(default_factory=dict)


def screen_file(path, params=PipelineParams(), window=WINDOW, hop=HOP):
    """Preprocess one file and keep its plausible raw (microvolt) windows."""
    res = FileResult(str(path), counts={k: 0 for k in REPORT_COLUMNS[2:]})
    try:
        matrix = preprocess_recording(read_edf(path), params)
        wins = segment_windows(matrix, params.fs, window, hop)
    except MissingChannels as exc:
        log.info("%s skipped: %s", path, exc)
        res.counts["missing_channels"] = 1
        return res
    except TooShort:
        res.counts["too_short"] = 1
        return res
    except (DataError, OSError, ValueError) as exc:
        log.warning("%s unreadable: %s", path, exc)
        res.counts["unreadable"] = 1
        return res
    keep = []
    for i, w in enumerate(wins):
        verdict = plausibility_check(w)
        if verdict == KEEP:
            keep.append(i)
        elif verdict == STD_HIGH:
            res.counts["std_high"] += 1
        elif verdict == STD_LOW:
            res.counts["std_low"] += 1
    res.windows = wins[keep].astype(np.float32)
    res.starts = [i * hop for i in keep]
    return res


def screen_files(paths, params=PipelineParams(), window=WINDOW, hop=HOP):
    paths = list(paths)
    workers = min(worker_count(), max(len(paths), 1))
    if workers == 1:
        return [screen_file(p, params, window, hop) for p in paths]
    # results come back in input order, so the output does not depend on scheduling
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda p: screen_file(p, params, window, hop), paths))


@dataclass
class WindowSet:
    data: np.ndarray
    source_ids: list

    def __len__(self):
        return self.data.shape[0]


def fit_scaler(results, bin_width=1.0):
    sc = HistogramScaler(MONTAGE_LABELS, bin_width)
    for r in results:
        if r.windows is not None and len(r.windows):
            sc.partial_fit(r.windows)
    sc.stats()
    return sc


def scale_results(results, scaler, clip=1.0):
    """Scale every kept window; windows hitting a degenerate channel scale are dropped."""
    data, ids = [], []
    for r in results:
        if r.windows is None:
            continue
        kept = 0
        for w, start in zip(r.windows, r.starts):
            try:
                data.append(scaler.transform(w, clip).astype(np.float32))
            except DegenerateScale:
                r.counts["degenerate_scale"] += 1
                continue
            ids.append((r.file, start))
            kept += 1
        r.counts["kept"] = kept
    width = next((r.windows.shape[-1] for r in results if r.windows is not None), WINDOW)
    arr = np.stack(data) if data else np.zeros((0, len(MONTAGE_LABELS), width), dtype=np.float32)
    return WindowSet(arr, ids)


def prepare_corpus(corpus_dir, params=PipelineParams(), dev_fraction=0.2, scaler=None,
                   clip=1.0, bin_width=1.0, window=WINDOW, hop=HOP, eval_fraction=0.0):
    """Screen every split, fit the scaler on ``train`` (unless given), scale all splits.

    Returns ``(window_sets, scaler, report_rows)``.
    """
    splits = split_corpus(corpus_dir, dev_fraction, eval_fraction)
    screened = {name: screen_files(paths, params, window, hop) for name, paths in splits.items()}
    if scaler is None:
        scaler = fit_scaler(screened.get("train", []), bin_width)
    sets, report = {}, []
    for name, results in screened.items():
        sets[name] = scale_results(results, scaler, clip)
        for r in results:
            report.append({"split": name, "file": Path(r.file).name, **r.counts})
    return sets, scaler, report
