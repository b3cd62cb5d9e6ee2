"""Command-line entry point: ``dcae-eeg <command> [options]``.

Exit codes: 0 success, 1 usage or configuration error, 2 data error,
3 numeric failure.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import report
from .config import load_config
from .dcae import evaluate, load_checkpoint, reconstruct, save_checkpoint, train, write_train_log
from .dcae import build_model
from .errors import ConfigError, DataError, EmptyDataset, NumericError
from .experiment import prepare, run_experiment
from .pipeline import REPORT_COLUMNS, list_edf
from .preprocess import MONTAGE_LABELS, normalize_label
from .signal_io import read_tensor, sampling_rate_census, write_tensor
from .synthgen import generate_corpus
from .windowing import HistogramScaler

log = logging.getLogger("dcae_eeg")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, "%s: error: %s\n" % (self.prog, message))


def _common():
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", type=Path, help="JSON run configuration")
    p.add_argument("--profile", choices=("full", "tiny", "smoke"), default=None,
                   help="named preset applied before the config file")
    p.add_argument("--seed", type=int, help="overrides training, synthesis and experiment seeds")
    p.add_argument("--out", type=Path, help="output directory (default: paths.work_dir)")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def build_parser():
    common = _common()
    parser = _Parser(prog="dcae-eeg", description="EEG autoencoder pipeline")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synth", parents=[common], help="write a synthetic EDF corpus")
    p.add_argument("--files", type=int, help="number of recordings (overrides synth.n_files)")

    p = sub.add_parser("stats", parents=[common], help="sampling-rate census of a corpus")
    p.add_argument("corpus", nargs="?", type=Path, help="EDF directory (default: paths.corpus_dir)")

    p = sub.add_parser("preprocess", parents=[common], help="screen, scale and window a corpus")
    p.add_argument("--corpus", type=Path, help="EDF directory (default: paths.corpus_dir)")
    p.add_argument("--scaler", type=Path, help="reuse a fitted scaler instead of fitting on train")

    p = sub.add_parser("train", parents=[common], help="train one autoencoder")
    p.add_argument("--data", type=Path, help="directory holding windows_train.dcae")
    p.add_argument("--loss-mode", choices=("TS", "TS_FT", "TS_STFT"))
    p.add_argument("--checkpoint", type=Path, action="append",
                   help="resume from this checkpoint")

    p = sub.add_parser("eval", parents=[common], help="reconstruction metrics per checkpoint")
    p.add_argument("--data", type=Path, help="directory holding windows_<split>.dcae")
    p.add_argument("--split", default="dev")
    p.add_argument("--checkpoint", type=Path, action="append", required=True)

    p = sub.add_parser("plot", parents=[common], help="trace and spectrum overlays for one window")
    p.add_argument("--data", type=Path, help="directory holding windows_<split>.dcae")
    p.add_argument("--split", default="dev")
    p.add_argument("--checkpoint", type=Path, action="append", required=True)
    p.add_argument("--window", type=int, default=0, help="window index within the split")
    p.add_argument("--channels", default=",".join(report.DEFAULT_CHANNELS),
                   help="comma-separated channel labels")

    sub.add_parser("experiment", parents=[common], help="train and compare the three loss modes")
    return parser


# -- helpers -----------------------------------------------------------------

def _resolve(args):
    cfg = load_config(args.config, profile=args.profile)
    if args.seed is not None:
        cfg.training = replace(cfg.training, seed=args.seed)
        cfg.synth = dict(cfg.synth, seed=args.seed)
        cfg.experiment = replace(cfg.experiment, seeds=[args.seed])
    out = Path(args.out) if args.out is not None else Path(cfg.paths.work_dir)
    out.mkdir(parents=True, exist_ok=True)
    cfg.save(out / "config.json")
    return cfg, out


def _data_dir(args, cfg):
    return Path(args.data) if args.data is not None else Path(cfg.paths.work_dir)


def _load_windows(directory, split):
    path = Path(directory) / ("windows_%s.dcae" % split)
    if not path.exists():
        raise DataError("missing %s (run preprocess first)" % path)
    arr = read_tensor(path)
    if arr.ndim != 3:
        raise DataError("%s is not a [N, C, T] window tensor" % path)
    return arr


def _single_checkpoint(args):
    if len(args.checkpoint) != 1:
        raise ConfigError("exactly one --checkpoint expected here")
    return args.checkpoint[0]


# -- commands ----------------------------------------------------------------

def cmd_synth(args):
    cfg, out = _resolve(args)
    spec = cfg.synth_spec()
    if args.files is not None:
        spec = replace(spec, n_files=args.files)
    rows = generate_corpus(spec, out)
    print("wrote %d recordings to %s" % (len(rows), out))
    return EXIT_OK


def cmd_stats(args):
    cfg, out = _resolve(args)
    corpus = args.corpus if args.corpus is not None else Path(cfg.paths.corpus_dir)
    paths = list_edf(corpus)
    if not paths:
        log.warning("no EDF files under %s", corpus)
    census = sampling_rate_census(paths)
    for path, msg in census.unreadable.items():
        log.warning("unreadable: %s: %s", path, msg)
    report.write_census(census, out)
    for rate, n in report.census_rows(census):
        print("%s\t%s" % (rate, n))
    return EXIT_OK


def cmd_preprocess(args):
    cfg, out = _resolve(args)
    corpus = args.corpus if args.corpus is not None else Path(cfg.paths.corpus_dir)
    scaler = HistogramScaler.load(args.scaler) if args.scaler is not None else None
    sets, scaler, rows = prepare(cfg, corpus, scaler)
    total = sum(len(s) for s in sets.values())
    with open(out / "preprocess_report.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=REPORT_COLUMNS)
        w.writeheader()
        w.writerows(rows)
    if total == 0:
        raise EmptyDataset("no windows accepted from %s" % corpus)
    scaler.save(out / "scaler.json")
    for name, ws in sets.items():
        write_tensor(out / ("windows_%s.dcae" % name), ws.data)
        with open(out / ("sources_%s.csv" % name), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["index", "file", "start_sample"])
            for i, (f, start) in enumerate(ws.source_ids):
                w.writerow([i, Path(f).name, start])
        print("%s\t%d windows" % (name, len(ws)))
    return EXIT_OK


def cmd_train(args):
    cfg, out = _resolve(args)
    windows = _load_windows(_data_dir(args, cfg), "train")
    tr = cfg.training
    start_epoch, optimizer = 0, None
    if args.checkpoint:
        model, optimizer, meta = load_checkpoint(_single_checkpoint(args))
        start_epoch = int(meta["epoch"])
    else:
        model = build_model(cfg.model_config(args.loss_mode), seed=tr.seed)
    if windows.shape[1:] != (model.cfg.in_channels, model.cfg.in_time):
        raise DataError("windows %s do not fit a model expecting %s"
                        % (windows.shape[1:], (model.cfg.in_channels, model.cfg.in_time)))
    if start_epoch >= tr.epochs:
        log.warning("checkpoint already at epoch %d of %d", start_epoch, tr.epochs)
        return EXIT_OK
    _, logs = train(model, windows, tr.epochs, tr.batch_size, tr.seed, tr.lr, optimizer,
                    start_epoch, out, tr.flip_p)
    write_train_log(out / "train_log.csv", logs, append=start_epoch > 0)
    report.write_training_curves({model.cfg.loss_mode: logs}, out / "train_curve.svg")
    for e in logs:
        print("epoch %d\ttotal %.6f" % (e.epoch, e.total))
    return EXIT_OK


def cmd_eval(args):
    cfg, out = _resolve(args)
    windows = _load_windows(_data_dir(args, cfg), args.split)
    rows, by_mode = [], {}
    for ck in args.checkpoint:
        model, _, meta = load_checkpoint(ck)
        m = evaluate(model, windows, cfg.training.batch_size)
        mode = model.cfg.loss_mode if meta["kind"] == "dcae" else "identity"
        rows.append([str(ck), mode, repr(m.mae_time), repr(m.mae_frequency), m.n_windows])
        if meta["kind"] == "dcae":
            by_mode[mode] = m
        print("%s\t%s\tmae_time %.6f\tmae_frequency %.6f" % (ck, mode, m.mae_time, m.mae_frequency))
    with open(out / "metrics.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["checkpoint", "loss_mode", "mae_time", "mae_frequency", "n_windows"])
        w.writerows(rows)
    if by_mode:
        with open(out / "comparison.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["metric"] + list(report.MODEL_COLUMNS))
            w.writerows(report.comparison_table(by_mode))
    return EXIT_OK


def cmd_plot(args):
    cfg, out = _resolve(args)
    windows = _load_windows(_data_dir(args, cfg), args.split)
    if not 0 <= args.window < windows.shape[0]:
        raise DataError("window %d outside 0..%d" % (args.window, windows.shape[0] - 1))
    model, _, _ = load_checkpoint(_single_checkpoint(args))
    raw = [c.strip() for c in args.channels.split(",") if c.strip()]
    wanted = [normalize_label(c) for c in raw]
    unknown = [c for c, w in zip(raw, wanted) if w not in MONTAGE_LABELS]
    if unknown:
        raise ConfigError("unknown channels: %s" % ", ".join(unknown))
    rec = reconstruct(model, windows[args.window], MONTAGE_LABELS, wanted, with_traces=True,
                      fs=cfg.pipeline.fs)
    stem = "window_%d" % args.window
    for p in report.write_reconstruction(rec, out, stem, cfg.pipeline.fs):
        print(p)
    return EXIT_OK


def cmd_experiment(args):
    cfg, out = _resolve(args)
    modes = set(cfg.experiment.loss_modes)
    if modes != {"TS", "TS_FT", "TS_STFT"}:
        raise ConfigError("the comparison needs loss modes TS, TS_FT and TS_STFT")
    runs = run_experiment(cfg, out)
    per_seed = {s: r.metrics for s, r in runs.items()}
    verdicts, overall = report.write_experiment_report(per_seed, out, cfg.experiment.stft_tolerance)
    held_out = {s: r.eval_metrics for s, r in runs.items() if r.eval_metrics}
    if held_out:
        report.write_seed_tables(held_out, out / "experiment_eval.csv")
    report.write_training_curves({"seed%d-%s" % (s, m): logs for s, r in runs.items()
                                  for m, logs in r.logs.items()}, out / "train_curves.svg")
    for s, v in verdicts.items():
        print("seed %d\t%s" % (s, "\t".join("%s=%s" % (k, report.verdict_word(ok))
                                            for k, ok in v.items())))
    print("overall\t%s" % report.verdict_word(overall))
    return EXIT_OK


COMMANDS = {"synth": cmd_synth, "stats": cmd_stats, "preprocess": cmd_preprocess,
            "train": cmd_train, "eval": cmd_eval, "plot": cmd_plot,
            "experiment": cmd_experiment}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print("config error: %s" % exc, file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print("data error: %s" % exc, file=sys.stderr)
        return EXIT_DATA
    except NumericError as exc:
        print("numeric failure: %s" % exc, file=sys.stderr)
        return EXIT_NUMERIC
    except np.linalg.LinAlgError as exc:
        print("numeric failure: %s" % exc, file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
