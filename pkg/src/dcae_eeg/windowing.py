"""Windowing, plausibility screening, histogram scaling and electrode flipping."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DegenerateScale, EmptyChannel, TooShort
from .preprocess import MONTAGE_LABELS

WINDOW = 512
HOP = 256
STD_HIGH_UV = 5000.0
STD_LOW_UV = 0.01
MAX_FLAT_CHANNELS = 8

KEEP = "keep"
STD_HIGH = "std-high"
STD_LOW = "std-low"


def segment_windows(matrix, fs=256.0, window=WINDOW, hop=HOP):
    """Cut ``C x L`` into ``C x window`` slices starting every ``hop`` samples.

    Returns an array of shape ``[n, C, window]``; the trailing remainder is dropped.
    """
    matrix = np.asarray(matrix)
    length = matrix.shape[-1]
    if length < window:
        raise TooShort("signal of %d samples is shorter than one window (%d)" % (length, window))
    n = (length - window) // hop + 1
    view = np.lib.stride_tricks.sliding_window_view(matrix, window, axis=-1)[:, ::hop][:, :n]
    return np.ascontiguousarray(view.transpose(1, 0, 2))


def plausibility_check(window):
    """Return ``"keep"``, ``"std-high"`` or ``"std-low"`` for one ``C x T`` window (microvolts)."""
    std = np.asarray(window, dtype=np.float64).std(axis=-1)
    if np.any(std > STD_HIGH_UV):
        return STD_HIGH
    if np.count_nonzero(std < STD_LOW_UV) > MAX_FLAT_CHANNELS:
        return STD_LOW
    return KEEP


class _Histogram:
    """Fixed-width bins over a lazily grown index range."""

    def __init__(self, bin_width, origin):
        self.bin_width = float(bin_width)
        self.origin = float(origin)
        self.first = 0
        self.counts = np.zeros(0, dtype=np.int64)

    @property
    def total(self):
        return int(self.counts.sum())

    def add(self, values):
        values = np.asarray(values, dtype=np.float64).ravel()
        if values.size == 0:
            return
        idx = np.floor((values - self.origin) / self.bin_width).astype(np.int64)
        lo, hi = int(idx.min()), int(idx.max())
        self._cover(lo, hi)
        self.counts += np.bincount(idx - self.first, minlength=self.counts.size)

    def _cover(self, lo, hi):
        if self.counts.size == 0:
            self.first = lo
            self.counts = np.zeros(hi - lo + 1, dtype=np.int64)
            return
        last = self.first + self.counts.size - 1
        new_first, new_last = min(lo, self.first), max(hi, last)
        if (new_first, new_last) != (self.first, last):
            grown = np.zeros(new_last - new_first + 1, dtype=np.int64)
            grown[self.first - new_first:self.first - new_first + self.counts.size] = self.counts
            self.first, self.counts = new_first, grown

    def merge(self, other):
        if other.counts.size == 0:
            return
        last = other.first + other.counts.size - 1
        self._cover(other.first, last)
        off = other.first - self.first
        self.counts[off:off + other.counts.size] += other.counts

    def quantile(self, q):
        total = self.total
        target = q * total
        cum = np.cumsum(self.counts)
        # first bin whose cumulative count reaches the target
        b = int(np.searchsorted(cum, target, side="left"))
        b = min(max(b, 0), self.counts.size - 1)
        while self.counts[b] == 0 and b < self.counts.size - 1:
            b += 1
        before = cum[b] - self.counts[b]
        frac = (target - before) / self.counts[b]
        frac = min(max(frac, 0.0), 1.0)
        return self.origin + (self.first + b + frac) * self.bin_width


@dataclass
class ChannelStats:
    median: float
    p5: float
    p95: float


class HistogramScaler:
    """Per-channel expandable histograms giving median, 5th and 95th percentiles.

    Partial scalers over disjoint data combine exactly with :meth:`merge`.
    """

    VERSION = 1

    def __init__(self, labels=MONTAGE_LABELS, bin_width=1.0, origin=None):
        self.labels = tuple(labels)
        self.bin_width = float(bin_width)
        # bins centred on multiples of the width
        self.origin = -0.5 * self.bin_width if origin is None else float(origin)
        self.hists = [_Histogram(self.bin_width, self.origin) for _ in self.labels]
        self._stats = None

    def update(self, channel, values):
        i = channel if isinstance(channel, (int, np.integer)) else self.labels.index(channel)
        self.hists[i].add(values)
        self._stats = None

    def partial_fit(self, windows):
        """Accumulate ``[..., C, T]`` data (channels on the second-to-last axis)."""
        arr = np.asarray(windows)
        arr = arr.reshape(-1, arr.shape[-2], arr.shape[-1])
        for c in range(len(self.labels)):
            self.update(c, arr[:, c, :])
        return self

    def merge(self, other):
        if other.labels != self.labels or other.bin_width != self.bin_width or other.origin != self.origin:
            raise ValueError("can only merge scalers with identical channels and binning")
        for mine, theirs in zip(self.hists, other.hists):
            mine.merge(theirs)
        self._stats = None
        return self

    def counts(self):
        return [h.total for h in self.hists]

    def stats(self):
        if self._stats is None:
            out = []
            for label, h in zip(self.labels, self.hists):
                if h.total == 0:
                    raise EmptyChannel("channel %s saw no samples" % label)
                out.append(ChannelStats(h.quantile(0.5), h.quantile(0.05), h.quantile(0.95)))
            self._stats = out
        return self._stats

    def transform(self, window, clip=1.0):
        """Robust scaling ``(x - median) / (p95 - p5)`` per channel, clipped to ``[-clip, clip]``."""
        st = self.stats()
        med = np.array([s.median for s in st])[:, None]
        spread = np.array([s.p95 - s.p5 for s in st])[:, None]
        bad = [l for l, s in zip(self.labels, spread[:, 0]) if s < 1e-9]
        if bad:
            raise DegenerateScale(bad)
        out = (np.asarray(window, dtype=np.float64) - med) / spread
        return np.clip(out, -clip, clip)

    # -- persistence ---------------------------------------------------
    def to_dict(self):
        return {
            "format": "dcae-histogram-scaler",
            "version": self.VERSION,
            "channels": [
                {"label": l, "bin_width": h.bin_width, "origin": h.origin,
                 "first_bin": h.first, "counts": h.counts.tolist()}
                for l, h in zip(self.labels, self.hists)
            ],
        }

    @classmethod
    def from_dict(cls, doc):
        if doc.get("format") != "dcae-histogram-scaler" or doc.get("version") != cls.VERSION:
            raise ValueError("not a version-%d histogram scaler document" % cls.VERSION)
        chans = doc["channels"]
        widths = {c["bin_width"] for c in chans}
        origins = {c["origin"] for c in chans}
        if len(widths) != 1 or len(origins) != 1:
            raise ValueError("mixed binning across channels is not supported")
        sc = cls([c["label"] for c in chans], widths.pop(), origins.pop())
        for h, c in zip(sc.hists, chans):
            h.first = int(c["first_bin"])
            h.counts = np.asarray(c["counts"], dtype=np.int64)
        return sc

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def load(cls, path):
        return cls.from_dict(json.loads(Path(path).read_text()))


def scaler_fit(windows, labels=MONTAGE_LABELS, bin_width=1.0):
    """Fit a scaler on an iterable of ``C x T`` windows (training split only)."""
    sc = HistogramScaler(labels, bin_width)
    for w in windows:
        sc.partial_fit(w)
    sc.stats()
    return sc


def scaler_apply(scaler, window, clip=1.0):
    return scaler.transform(window, clip)


# ---------------------------------------------------------------------------
# electrode flipping

FLIP_PAIRS = (("FP1", "FP2"), ("F3", "F4"), ("C3", "C4"), ("P3", "P4"), ("O1", "O2"),
              ("F7", "F8"), ("T7", "T8"), ("P7", "P8"), ("A1", "A2"), ("T1", "T2"))
FLIP_FIXED = ("Fz", "Cz", "Pz")


def flip_permutation(labels=MONTAGE_LABELS):
    """Row permutation swapping homologous left/right electrodes."""
    pos = {l: i for i, l in enumerate(labels)}
    perm = np.arange(len(labels))
    for a, b in FLIP_PAIRS:
        if a in pos and b in pos:
            perm[pos[a]], perm[pos[b]] = pos[b], pos[a]
    return perm


_FLIP = flip_permutation()


def flip_electrodes(window):
    """Swap left/right hemisphere rows of a montage-ordered window (or batch of windows)."""
    return np.asarray(window)[..., _FLIP, :]


def random_flip(batch, rng, p=0.5):
    """Flip each window of ``[N, C, T]`` independently with probability ``p``."""
    batch = np.array(batch, copy=True)
    sel = rng.random(batch.shape[0]) < p
    if sel.any():
        batch[sel] = batch[sel][:, _FLIP, :]
    return batch
