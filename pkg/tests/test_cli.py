import csv
import xml.etree.ElementTree as ET

import numpy as np
import pytest
from numpy.testing import assert_allclose

from dcae_eeg import cli, report
from dcae_eeg.dcae import LOG_COLUMNS, Metrics
from dcae_eeg.errors import NonFiniteLoss
from dcae_eeg.signal_io import read_tensor, sampling_rate_census


def run(*argv):
    return cli.main([str(a) for a in argv])


def svg_ids(path):
    root = ET.parse(path).getroot()
    return {el.get("id") for el in root.iter() if el.get("id")}


def read_rows(path):
    with open(path, newline="") as fh:
        return [r for r in csv.reader(fh) if r and not r[0].startswith("#")]


@pytest.fixture(scope="module")
def work(tmp_path_factory):
    """Smoke corpus, preprocessed windows and one trained checkpoint per loss mode."""
    root = tmp_path_factory.mktemp("cli")
    assert run("synth", "--profile", "smoke", "--out", root / "corpus") == 0
    assert run("preprocess", "--profile", "smoke", "--corpus", root / "corpus", "--out", root / "data") == 0
    for mode in ("TS", "TS_FT", "TS_STFT"):
        assert run("train", "--profile", "smoke", "--data", root / "data", "--loss-mode", mode,
                   "--out", root / mode) == 0
    return root


# -- stats ----------------------------------------------------------------------------------------

def test_stats_census(work, tmp_path, capsys):
    assert run("stats", work / "corpus", "--out", tmp_path) == 0
    rows = read_rows(tmp_path / "census.csv")
    assert rows[0] == ["fs_hz", "count"]
    census = sampling_rate_census(sorted((work / "corpus").glob("*.edf")))
    assert {r[0]: int(r[1]) for r in rows[1:]} == dict(
        {str(k): v for k, v in census.counts.items()}, unreadable=0)
    ids = svg_ids(tmp_path / "census.svg")
    assert {"bar-%s" % r for r in census.counts} <= ids


def test_stats_counts_corrupt_file(work, tmp_path):
    corpus = tmp_path / "c"
    corpus.mkdir()
    src = sorted((work / "corpus").glob("*.edf"))[0]
    (corpus / src.name).write_bytes(src.read_bytes())
    (corpus / "broken.edf").write_bytes(b"0       garbage")
    assert run("stats", corpus, "--out", tmp_path / "o") == 0
    rows = dict(read_rows(tmp_path / "o" / "census.csv")[1:])
    assert rows["unreadable"] == "1"


def test_stats_empty_corpus(tmp_path):
    (tmp_path / "empty").mkdir()
    assert run("stats", tmp_path / "empty", "--out", tmp_path / "o") == 0
    assert read_rows(tmp_path / "o" / "census.csv")[1:] == [["unreadable", "0"]]


# -- preprocess and train determinism ------------------------------------------------------------------

def test_preprocess_outputs(work):
    data = work / "data"
    for split in ("train", "dev"):
        w = read_tensor(data / ("windows_%s.dcae" % split))
        assert w.shape[1:] == (23, 512) and np.all(np.abs(w) <= 1.0)
        src = read_rows(data / ("sources_%s.csv" % split))
        assert src[0] == ["index", "file", "start_sample"] and len(src) - 1 == w.shape[0]
    rep = read_rows(data / "preprocess_report.csv")
    assert rep[0][:3] == ["split", "file", "kept"]


def test_preprocess_rerun_bit_identical(work, tmp_path):
    assert run("preprocess", "--profile", "smoke", "--corpus", work / "corpus", "--out", tmp_path) == 0
    for f in ("windows_train.dcae", "windows_dev.dcae", "scaler.json"):
        assert (tmp_path / f).read_bytes() == (work / "data" / f).read_bytes()


def test_train_rerun_same_epoch_one(work, tmp_path):
    assert run("train", "--profile", "smoke", "--data", work / "data", "--loss-mode", "TS",
               "--out", tmp_path) == 0
    a = read_rows(tmp_path / "train_log.csv")
    b = read_rows(work / "TS" / "train_log.csv")
    assert a[0] == list(LOG_COLUMNS)
    assert a[1][1:5] == b[1][1:5]
    assert "curve-TS" in svg_ids(tmp_path / "train_curve.svg")


def test_train_resume_appends(work, tmp_path):
    ck = work / "TS" / "epoch_001.ckpt"
    assert run("train", "--profile", "smoke", "--data", work / "data", "--checkpoint", ck,
               "--out", tmp_path) == 0
    rows = read_rows(tmp_path / "train_log.csv")
    full = read_rows(work / "TS" / "train_log.csv")
    assert [r[0] for r in rows[1:]] == ["2"]
    assert rows[1][1:5] == full[2][1:5]


# -- eval and plot ----------------------------------------------------------------------------------------

def test_eval_table(work, tmp_path):
    cks = [work / m / "last.ckpt" for m in ("TS", "TS_FT", "TS_STFT")]
    args = ["eval", "--profile", "smoke", "--data", work / "data", "--out", tmp_path]
    for ck in cks:
        args += ["--checkpoint", ck]
    assert run(*args) == 0
    metrics = read_rows(tmp_path / "metrics.csv")
    assert metrics[0] == ["checkpoint", "loss_mode", "mae_time", "mae_frequency", "n_windows"]
    assert [r[1] for r in metrics[1:]] == ["TS", "TS_FT", "TS_STFT"]
    table = read_rows(tmp_path / "comparison.csv")
    assert table[0] == ["metric"] + list(report.MODEL_COLUMNS)
    assert [r[0] for r in table[1:]] == ["MAE time (TS)", "MAE frequency (FT)"]
    assert all(len(r) == 4 and all(float(v) > 0 for v in r[1:]) for r in table[1:])
    assert float(table[1][1]) == pytest.approx(float(metrics[1][2]), abs=1e-6)


def test_plot_series_and_values(work, tmp_path):
    assert run("plot", "--profile", "smoke", "--data", work / "data",
               "--checkpoint", work / "TS" / "last.ckpt", "--window", 1, "--out", tmp_path) == 0
    for kind in ("time", "spectrum"):
        ids = svg_ids(tmp_path / ("window_1_%s.svg" % kind))
        for ch in report.DEFAULT_CHANNELS:
            label = "Cz" if ch == "CZ" else ch
            assert {"%s-%s-original" % (kind, label), "%s-%s-reconstruction" % (kind, label)} <= ids
    rows = read_rows(tmp_path / "window_1.csv")
    assert rows[0] == ["panel", "channel", "index", "x", "original", "reconstruction"]
    body = rows[1:]
    for ch in ("O2", "Cz"):
        trace = np.array([[float(r[4]), float(r[5])] for r in body if r[0] == "time" and r[1] == ch])
        spec = np.array([[float(r[4]), float(r[5])] for r in body if r[0] == "spectrum" and r[1] == ch])
        assert trace.shape == (512, 2) and spec.shape == (257, 2)
        assert_allclose(spec, np.abs(np.fft.rfft(trace, axis=0)), rtol=1e-6, atol=1e-6)


def test_plot_unknown_channel(work, tmp_path):
    assert run("plot", "--profile", "smoke", "--data", work / "data", "--checkpoint",
               work / "TS" / "last.ckpt", "--channels", "O2,XX9", "--out", tmp_path) == 1


# -- exit codes -------------------------------------------------------------------------------------------

def test_usage_error_exit_one(tmp_path, capsys):
    with pytest.raises(SystemExit) as err:
        cli.main(["train", "--profile", "nope"])
    assert err.value.code == 1


def test_missing_data_exit_two(tmp_path):
    assert run("train", "--profile", "smoke", "--data", tmp_path, "--out", tmp_path / "o") == 2


def test_empty_corpus_preprocess_exit_two(tmp_path):
    (tmp_path / "empty").mkdir()
    assert run("preprocess", "--corpus", tmp_path / "empty", "--out", tmp_path / "o") == 2


def test_bad_config_exit_one(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text('{"training": {"epochz": 3}}')
    assert run("stats", tmp_path, "--config", cfg, "--out", tmp_path / "o") == 1


def test_numeric_failure_exit_three(monkeypatch, tmp_path):
    def boom(args):
        raise NonFiniteLoss(1, 0)
    monkeypatch.setitem(cli.COMMANDS, "stats", boom)
    assert run("stats", tmp_path) == 3


# -- experiment report ---------------------------------------------------------------------------------------

def fake(t, f):
    return Metrics(t, f, 10)


GOOD = {"TS": fake(0.10, 0.042), "TS_FT": fake(0.126, 0.038), "TS_STFT": fake(0.11, 0.040)}
BAD = {"TS": fake(0.10, 0.030), "TS_FT": fake(0.126, 0.038), "TS_STFT": fake(0.20, 0.040)}


def test_ordering_verdicts():
    assert report.ordering_verdicts(GOOD) == {"ts_best_time": True, "ft_best_frequency": True,
                                              "stft_within_tolerance": True}
    v = report.ordering_verdicts(BAD)
    assert v == {"ts_best_time": True, "ft_best_frequency": False, "stft_within_tolerance": False}
    assert report.verdict_word(True) == "confirmed" and report.verdict_word(False) == "violated"


def test_ordering_on_reference_values():
    ref = {"TS": fake(0.107571, 0.042120), "TS_FT": fake(0.126109, 0.038266),
             "TS_STFT": fake(0.109854, 0.040176)}
    assert all(report.ordering_verdicts(ref, 0.15).values())


@pytest.mark.parametrize("seeds, expected", [((GOOD, GOOD, BAD), True), ((GOOD, BAD, BAD), False)])
def test_experiment_report(tmp_path, seeds, expected):
    per_seed = dict(zip((0, 1, 2), seeds))
    verdicts, overall = report.write_experiment_report(per_seed, tmp_path, 0.15)
    assert overall is expected
    lines = (tmp_path / "experiment.csv").read_text().splitlines()
    assert lines[0] == "# seeds: 0 1 2"
    rows = read_rows(tmp_path / "experiment.csv")
    assert rows[0] == ["seed", "metric"] + list(report.MODEL_COLUMNS)
    assert len(rows) == 1 + 3 * 2
    summary = read_rows(tmp_path / "experiment_summary.csv")
    assert summary[-1][0] == "overall"
    assert summary[-1][2] == ("confirmed" if expected else "violated")
    assert {r[2] for r in summary[1:]} <= {"confirmed", "violated"}
    ids = svg_ids(tmp_path / "experiment.svg")
    assert "bar-mae_time-0-TS" in ids and "bar-mae_frequency-2-TS_STFT" in ids


def test_report_files_deterministic(tmp_path):
    report.write_experiment_report({0: GOOD}, tmp_path / "a")
    report.write_experiment_report({0: GOOD}, tmp_path / "b")
    for name in ("experiment.csv", "experiment_summary.csv", "experiment.svg"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_experiment_command_smoke(tmp_path, capsys):
    assert run("experiment", "--profile", "smoke", "--out", tmp_path) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[-1].split("\t")[0] == "overall"
    assert out[-1].split("\t")[1] in ("confirmed", "violated")
    for name in ("experiment.csv", "experiment_eval.csv"):
        lines = (tmp_path / name).read_text().splitlines()
        assert lines[0].startswith("# seeds:")
        rows = read_rows(tmp_path / name)
        assert rows[0] == ["seed", "metric"] + list(report.MODEL_COLUMNS)
        assert all(float(v) > 0 for r in rows[1:] for v in r[2:])
    assert (tmp_path / "train_curves.svg").exists()
