"""Training loop, evaluation metrics and reconstruction helpers."""

from __future__ import annotations

import csv
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .. import spectral as S
from ..errors import EmptyDataset, NonFiniteLoss, ShapeMismatch
from ..nn.optim import Adam
from ..nn.tensor import Tensor
from ..windowing import random_flip
from .checkpoint import save_checkpoint
from .losses import combined_loss, frequency_error

log = logging.getLogger(__name__)

LOG_COLUMNS = ("epoch", "l_ts", "l_ft", "l_stft", "total", "wall_seconds")


@dataclass
class EpochLog:
    epoch: int
    l_ts: float
    l_ft: float
    l_stft: float
    total: float
    wall_seconds: float
    steps: int = 0
    batch_totals: list = field(default_factory=list, repr=False)

    def row(self):
        return [self.epoch, self.l_ts, self.l_ft, self.l_stft, self.total, self.wall_seconds]


def epoch_rng(seed, epoch):
    return np.random.default_rng([int(seed), int(epoch)])


def train(model, windows, epochs=50, batch_size=256, seed=0, lr=0.001, optimizer=None,
          start_epoch=0, out_dir=None, flip_p=0.5, on_epoch=None):
    """Train ``model`` on ``[N, C, T]`` scaled windows with Adam.

    Each epoch draws its shuffle, flips and dropout masks from a generator
    seeded by ``(seed, epoch)``, so a run resumed from an epoch checkpoint
    continues exactly as an uninterrupted one. The last partial batch is
    dropped. Returns ``(optimizer, [EpochLog, ...])``.
    """
    windows = np.asarray(windows, dtype=model.dtype)
    n = windows.shape[0]
    steps = n // batch_size
    if steps == 0:
        raise EmptyDataset("need at least %d windows for one batch, have %d" % (batch_size, n))
    cfg = model.cfg
    if optimizer is None:
        optimizer = Adam(model.parameters(), lr=lr)
    out_dir = Path(out_dir) if out_dir is not None else None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)

    logs = []
    for epoch in range(start_epoch + 1, epochs + 1):
        t0 = time.perf_counter()
        rng = epoch_rng(seed, epoch)
        order = rng.permutation(n)
        model.train()
        model.set_rng(rng)
        sums = np.zeros(4)
        totals = []
        for b in range(steps):
            idx = order[b * batch_size:(b + 1) * batch_size]
            x = random_flip(windows[idx], rng, flip_p) if flip_p > 0 else windows[idx]
            xt = Tensor(x)
            xh, _ = model(xt)
            loss, bd = combined_loss(xt, xh, cfg.loss_mode, cfg.ft_weight, cfg.stft_weight,
                                     cfg.fs, cfg.band)
            if not math.isfinite(bd.total) or not np.isfinite(loss.item()):
                raise NonFiniteLoss(epoch, b)
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
            sums += (bd.l_ts, bd.l_ft, bd.l_stft, bd.total)
            totals.append(bd)
        mean = sums / steps
        entry = EpochLog(epoch, *mean, wall_seconds=time.perf_counter() - t0, steps=steps,
                         batch_totals=totals)
        logs.append(entry)
        log.info("epoch %d: total %.6f (ts %.6f, ft %.6f, stft %.6f) %.1fs", epoch,
                 entry.total, entry.l_ts, entry.l_ft, entry.l_stft, entry.wall_seconds)
        if out_dir is not None:
            save_checkpoint(out_dir / ("epoch_%03d.ckpt" % epoch), model, optimizer, epoch, seed)
            save_checkpoint(out_dir / "last.ckpt", model, optimizer, epoch, seed)
        if on_epoch is not None:
            on_epoch(entry)
    return optimizer, logs


def write_train_log(path, logs, append=False):
    path = Path(path)
    new = not (append and path.exists())
    with open(path, "a" if append else "w", newline="") as fh:
        w = csv.writer(fh)
        if new:
            w.writerow(LOG_COLUMNS)
        for e in logs:
            w.writerow(e.row())


def _predict(model, windows, batch_size):
    for start in range(0, windows.shape[0], batch_size):
        chunk = windows[start:start + batch_size]
        xh, _ = model(Tensor(chunk))
        yield chunk, xh.data


@dataclass
class Metrics:
    mae_time: float
    mae_frequency: float
    n_windows: int


def evaluate(model, windows, batch_size=256):
    """Time-domain MAE and full-spectrum normalized Fourier MAE, in eval mode."""
    windows = np.asarray(windows, dtype=getattr(model, "dtype", np.float32))
    if windows.shape[0] == 0:
        raise EmptyDataset("no windows to evaluate")
    model.eval()
    t_parts, f_parts = [], []
    for x, xh in _predict(model, windows, batch_size):
        x64, xh64 = x.astype(np.float64), xh.astype(np.float64)
        t_parts.extend(np.abs(x64 - xh64).mean(axis=(1, 2)))
        for a, b in zip(x64, xh64):
            f_parts.append(frequency_error(a, b))
    n = windows.shape[0]
    # fsum keeps the result independent of window order
    return Metrics(math.fsum(t_parts) / n, math.fsum(f_parts) / n, n)


@dataclass
class Reconstruction:
    original: np.ndarray
    reconstruction: np.ndarray
    labels: tuple = ()
    spectra_original: np.ndarray = None
    spectra_reconstruction: np.ndarray = None
    freqs: np.ndarray = None


def reconstruct(model, window, labels=None, channels=None, with_traces=False, fs=256.0):
    """Reconstruct one ``C x T`` window; optionally return traces and raw spectra per channel."""
    cfg = model.cfg
    window = np.asarray(window)
    if window.shape != (cfg.in_channels, cfg.in_time):
        raise ShapeMismatch("expected window %s, got %s" % ((cfg.in_channels, cfg.in_time), window.shape))
    model.eval()
    xh, _ = model(Tensor(window[None].astype(getattr(model, "dtype", np.float32))))
    xh = xh.data[0]
    if not with_traces:
        return xh
    labels = tuple(labels) if labels is not None else tuple(str(i) for i in range(window.shape[0]))
    rows = list(range(len(labels))) if channels is None else [labels.index(c) for c in channels]
    orig = window[rows].astype(np.float64)
    rec = xh[rows].astype(np.float64)
    return Reconstruction(orig, rec, tuple(labels[r] for r in rows),
                          S.rfft_magnitude(orig), S.rfft_magnitude(rec),
                          np.fft.rfftfreq(window.shape[-1], 1.0 / fs))
