"""The three-loss comparison run end to end on seeded synthetic corpora."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

from .dcae import build_model, evaluate, train, write_train_log
from .errors import EmptyDataset
from .pipeline import prepare_corpus
from .preprocess import PipelineParams
from .synthgen import generate_corpus

log = logging.getLogger(__name__)


@dataclass
class SeedRun:
    seed: int
    n_windows: dict
    metrics: dict = field(default_factory=dict)
    eval_metrics: dict = field(default_factory=dict)
    logs: dict = field(default_factory=dict)
    seconds: dict = field(default_factory=dict)


def pipeline_params(cfg):
    p = cfg.pipeline
    return PipelineParams(p.fs, p.band_lo, p.band_hi, p.notch_hz, p.notch_bw)


def window_geometry(cfg):
    """``(window, hop)`` in samples from the pipeline section."""
    p = cfg.pipeline
    window = int(round(p.window_s * p.fs))
    hop = int(round(window * (1.0 - p.overlap)))
    if window <= 0 or hop <= 0:
        raise ValueError("window_s and overlap must give a positive window and hop")
    return window, hop


def prepare(cfg, corpus_dir, scaler=None):
    window, hop = window_geometry(cfg)
    p = cfg.pipeline
    return prepare_corpus(corpus_dir, pipeline_params(cfg), p.dev_fraction, scaler,
                          p.clip, p.bin_width_uv, window, hop, p.eval_fraction)


def run_seed(cfg, seed, out_dir):
    """Generate the seed's corpus, preprocess it and train/evaluate one model per loss mode."""
    out = Path(out_dir)
    corpus = out / "corpus"
    generate_corpus(cfg.synth_spec(seed), corpus)
    sets, scaler, _ = prepare(cfg, corpus)
    train_set, dev_set, eval_set = sets.get("train"), sets.get("dev"), sets.get("eval")
    if train_set is None or not len(train_set) or dev_set is None or not len(dev_set):
        raise EmptyDataset("seed %d: synthetic corpus produced no train or dev windows" % seed)
    scaler.save(out / "scaler.json")
    run = SeedRun(seed, {k: len(v) for k, v in sets.items()})
    tr = cfg.training
    for mode in cfg.experiment.loss_modes:
        t0 = time.perf_counter()
        model = build_model(cfg.model_config(mode), seed=seed)
        _, logs = train(model, train_set.data, tr.epochs, tr.batch_size, seed, tr.lr,
                        flip_p=tr.flip_p)
        run.metrics[mode] = evaluate(model, dev_set.data, tr.batch_size)
        if eval_set is not None and len(eval_set):
            run.eval_metrics[mode] = evaluate(model, eval_set.data, tr.batch_size)
        run.logs[mode] = logs
        run.seconds[mode] = time.perf_counter() - t0
        write_train_log(out / ("train_log_%s.csv" % mode), logs)
        log.info("seed %d %s: mae_time %.6f mae_frequency %.6f (%.0fs)", seed, mode,
                 run.metrics[mode].mae_time, run.metrics[mode].mae_frequency, run.seconds[mode])
    return run


def run_experiment(cfg, out_dir, seeds=None):
    """Run every seed; returns ``{seed: SeedRun}``."""
    seeds = list(cfg.experiment.seeds if seeds is None else seeds)
    return {s: run_seed(cfg, s, Path(out_dir) / ("seed_%d" % s)) for s in seeds}
