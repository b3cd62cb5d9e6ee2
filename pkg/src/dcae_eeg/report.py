"""Figures (SVG via matplotlib) and the delimited tables written next to them.

Every plotted series carries a ``gid`` so that tests and downstream tools can
locate it in the SVG tree. Output is deterministic: the SVG hash salt is fixed
and no creation date is embedded.
"""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

MODEL_COLUMNS = ("DCAE ts-loss", "DCAE ts-ft-loss", "DCAE ts-stft-loss")
MODE_COLUMN = {"TS": MODEL_COLUMNS[0], "TS_FT": MODEL_COLUMNS[1], "TS_STFT": MODEL_COLUMNS[2]}
METRIC_ROWS = (("MAE time (TS)", "mae_time"), ("MAE frequency (FT)", "mae_frequency"))
DEFAULT_CHANNELS = ("O2", "C4", "P7", "CZ")

_RC = {"svg.hashsalt": "dcae-eeg", "svg.fonttype": "none", "font.size": 9}


def _save(fig, path):
    path = Path(path)
    with plt.rc_context(_RC):
        fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)
    return Path(path)


# -- sampling-rate census ---------------------------------------------------

def census_rows(census):
    rows = [[str(rate), n] for rate, n in census.counts.items()]
    rows.append(["unreadable", len(census.unreadable)])
    return rows


def write_census(census, out_dir, stem="census"):
    """``<stem>.csv`` (rate,count plus an ``unreadable`` row) and ``<stem>.svg`` bar chart."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = _write_csv(out / (stem + ".csv"), ["fs_hz", "count"], census_rows(census))
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(5, 3.2))
        rates = list(census.counts)
        heights = [census.counts[r] for r in rates]
        bars = ax.bar(range(len(rates)), heights, color="#4c72b0")
        for rate, bar in zip(rates, bars):
            bar.set_gid("bar-%s" % rate)
        ax.set_xticks(range(len(rates)), [str(r) for r in rates])
        ax.set_xlabel("sampling rate (Hz)")
        ax.set_ylabel("recordings")
        if census.unreadable:
            ax.set_title("%d unreadable file(s) not shown" % len(census.unreadable))
        fig.tight_layout()
    return csv_path, _save(fig, out / (stem + ".svg"))


# -- reconstruction overlays ------------------------------------------------

def write_reconstruction(rec, out_dir, stem="reconstruction", fs=256.0):
    """Time-trace and raw-spectrum overlays for each channel in ``rec``.

    Writes ``<stem>_time.svg``, ``<stem>_spectrum.svg`` and ``<stem>.csv``
    holding exactly the plotted values (one row per channel and sample/bin).
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    n_ch, n_t = rec.original.shape
    t = np.arange(n_t) / fs
    paths = []
    for kind, xs, a, b, xlabel in (
            ("time", t, rec.original, rec.reconstruction, "time (s)"),
            ("spectrum", rec.freqs, rec.spectra_original, rec.spectra_reconstruction, "frequency (Hz)")):
        with plt.rc_context(_RC):
            fig, axes = plt.subplots(n_ch, 1, figsize=(7, 1.6 * n_ch + 0.6), sharex=True,
                                     squeeze=False)
            for i, label in enumerate(rec.labels):
                ax = axes[i, 0]
                ax.plot(xs, a[i], lw=0.8, color="#222222", label="original",
                        gid="%s-%s-original" % (kind, label))
                ax.plot(xs, b[i], lw=0.8, color="#d62728", label="reconstruction",
                        gid="%s-%s-reconstruction" % (kind, label))
                ax.set_ylabel(label)
            axes[0, 0].legend(loc="upper right", fontsize=7)
            axes[-1, 0].set_xlabel(xlabel)
            fig.tight_layout()
        paths.append(_save(fig, out / ("%s_%s.svg" % (stem, kind))))
    rows = []
    for i, label in enumerate(rec.labels):
        for k in range(n_t):
            rows.append(["time", label, k, repr(float(t[k])),
                         repr(float(rec.original[i, k])), repr(float(rec.reconstruction[i, k]))])
        for k in range(rec.freqs.size):
            rows.append(["spectrum", label, k, repr(float(rec.freqs[k])),
                         repr(float(rec.spectra_original[i, k])),
                         repr(float(rec.spectra_reconstruction[i, k]))])
    csv_path = _write_csv(out / (stem + ".csv"),
                          ["panel", "channel", "index", "x", "original", "reconstruction"], rows)
    return [csv_path] + paths


# -- training curves and the three-model comparison -------------------------

def write_training_curves(logs_by_name, out_path):
    """One line per run of the mean epoch total loss."""
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(5, 3.2))
        for name, logs in logs_by_name.items():
            ax.plot([e.epoch for e in logs], [e.total for e in logs], marker="o", ms=2,
                    lw=1, label=name, gid="curve-%s" % name)
        ax.set_xlabel("epoch")
        ax.set_ylabel("training loss (total)")
        ax.set_yscale("log")
        ax.legend(fontsize=7)
        fig.tight_layout()
    return _save(fig, out_path)


def comparison_table(metrics_by_mode):
    """Rows ``[metric label, value per model column]``; missing models are left blank."""
    table = []
    for label, attr in METRIC_ROWS:
        row = [label]
        for mode, col in MODE_COLUMN.items():
            m = metrics_by_mode.get(mode)
            row.append("" if m is None else "%.6f" % getattr(m, attr))
        table.append(row)
    return table


def ordering_verdicts(metrics_by_mode, tolerance=0.15):
    """Check the expected ordering of the three models.

    Returns a dict of property name -> bool:

    * ``ts_best_time``: the TS model has the lowest time MAE;
    * ``ft_best_frequency``: the TS_FT model has the lowest frequency MAE;
    * ``stft_within_tolerance``: TS_STFT is within ``tolerance`` (relative) of
      the best model on both metrics.
    """
    m = metrics_by_mode
    t = {k: v.mae_time for k, v in m.items()}
    f = {k: v.mae_frequency for k, v in m.items()}
    best_t, best_f = min(t.values()), min(f.values())
    return {
        "ts_best_time": t["TS"] <= best_t,
        "ft_best_frequency": f["TS_FT"] <= best_f,
        "stft_within_tolerance": (t["TS_STFT"] <= (1 + tolerance) * best_t
                                  and f["TS_STFT"] <= (1 + tolerance) * best_f),
    }


def verdict_word(ok):
    return "confirmed" if ok else "violated"


def write_seed_tables(per_seed, path):
    """One 2x3 comparison table per seed in a single CSV with a seeds header."""
    seeds = list(per_seed)
    with open(path, "w", newline="") as fh:
        fh.write("# seeds: %s\n" % " ".join(str(s) for s in seeds))
        w = csv.writer(fh)
        w.writerow(["seed", "metric"] + list(MODEL_COLUMNS))
        for s in seeds:
            for row in comparison_table(per_seed[s]):
                w.writerow([s] + row)
    return path


def write_experiment_report(per_seed, out_dir, tolerance=0.15, min_seeds_ok=None):
    """Write ``experiment.csv`` (one 2x3 table per seed) and ``experiment_summary.csv``.

    ``per_seed`` maps seed -> {loss mode -> Metrics}. The summary lists each
    ordering property per seed plus an overall verdict, which holds when every
    property is confirmed for at least ``min_seeds_ok`` seeds (default: a
    strict majority).
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    seeds = list(per_seed)
    if min_seeds_ok is None:
        min_seeds_ok = len(seeds) // 2 + 1
    write_seed_tables(per_seed, out / "experiment.csv")
    verdicts = {s: ordering_verdicts(per_seed[s], tolerance) for s in seeds}
    props = ("ts_best_time", "ft_best_frequency", "stft_within_tolerance")
    seed_ok = {s: all(verdicts[s][p] for p in props) for s in seeds}
    overall = sum(seed_ok.values()) >= min_seeds_ok
    with open(out / "experiment_summary.csv", "w", newline="") as fh:
        fh.write("# seeds: %s\n" % " ".join(str(s) for s in seeds))
        w = csv.writer(fh)
        w.writerow(["seed", "property", "verdict"])
        for s in seeds:
            for p in props:
                w.writerow([s, p, verdict_word(verdicts[s][p])])
            w.writerow([s, "all", verdict_word(seed_ok[s])])
        w.writerow(["overall", "all (>= %d of %d seeds)" % (min_seeds_ok, len(seeds)),
                    verdict_word(overall)])
    _comparison_figure(per_seed, out / "experiment.svg")
    return verdicts, overall


def _comparison_figure(per_seed, path):
    seeds = list(per_seed)
    modes = list(MODE_COLUMN)
    with plt.rc_context(_RC):
        fig, axes = plt.subplots(1, 2, figsize=(8, 3.2))
        width = 0.8 / max(len(seeds), 1)
        for ax, (label, attr) in zip(axes, METRIC_ROWS):
            for j, s in enumerate(seeds):
                vals = [getattr(per_seed[s][m], attr) if m in per_seed[s] else np.nan
                        for m in modes]
                xs = np.arange(len(modes)) + (j - (len(seeds) - 1) / 2) * width
                bars = ax.bar(xs, vals, width, label="seed %s" % s)
                for m, bar in zip(modes, bars):
                    bar.set_gid("bar-%s-%s-%s" % (attr, s, m))
            ax.set_xticks(range(len(modes)), [MODE_COLUMN[m] for m in modes], fontsize=7)
            ax.set_title(label)
        axes[0].legend(fontsize=7)
        fig.tight_layout()
    return _save(fig, path)
