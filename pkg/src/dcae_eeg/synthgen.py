"""Synthetic EEG-like EDF corpora with a manifest of their generating parameters."""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .preprocess import MONTAGE_LABELS
from .signal_io import ChannelSignal, Recording, write_edf_subset
from .windowing import FLIP_PAIRS

# recording-system names as they appear in clinical EDF headers
_RAW_NAMES = {"T7": "T3", "T8": "T4", "P7": "T5", "P8": "T6"}
PHYS_RANGE = (-2000.0, 2000.0)
MANIFEST_COLUMNS = ("file", "fs", "duration_s", "seed", "file_index", "components")


@dataclass
class Oscillation:
    lo_hz: float
    hi_hz: float
    amplitude_uv: float
    # fraction of the amplitude that waxes and wanes (0 = steady rhythm)
    burst_depth: float = 0.0
    burst_hz: float = 0.5


@dataclass
class SynthSpec:
    n_files: int = 10
    duration_s: float = 60.0
    fs_probs: dict = field(default_factory=lambda: {256: 0.7, 250: 0.2, 512: 0.1})
    pink_uv: float = 10.0
    oscillations: list = field(default_factory=lambda: [
        Oscillation(8.0, 12.0, 20.0, burst_depth=0.8),
        Oscillation(14.0, 28.0, 8.0, burst_depth=0.8, burst_hz=1.0),
    ])
    spike_rate_per_min: float = 6.0
    spike_amplitude_uv: float = 80.0
    rho: float = 0.6
    noise_uv: float = 2.0
    # number of shared sources mixed onto the scalp channels (0: every channel
    # carries its own independent background)
    n_sources: int = 4
    seed: int = 0
    extra_channels: bool = True

    def __post_init__(self):
        self.oscillations = [o if isinstance(o, Oscillation) else Oscillation(**o)
                             for o in self.oscillations]
        self.fs_probs = {float(k) if not float(k).is_integer() else int(float(k)): float(v)
                         for k, v in self.fs_probs.items()}
        if self.pink_uv < 0 or self.noise_uv < 0 or self.spike_amplitude_uv < 0:
            raise ValueError("amplitudes must be nonnegative")
        if self.n_sources < 0:
            raise ValueError("n_sources must be nonnegative")
        if not 0.0 <= self.rho <= 1.0:
            raise ValueError("rho must lie in [0, 1]")
        total = sum(self.fs_probs.values())
        if total <= 0:
            raise ValueError("fs_probs must have positive mass")

    def to_dict(self):
        d = asdict(self)
        d["fs_probs"] = {str(k): v for k, v in self.fs_probs.items()}
        return d


def pink_noise(rng, n, fs):
    """Unit-variance noise with a 1/sqrt(f) magnitude spectrum and random phases."""
    freqs = np.fft.rfftfreq(n, 1.0 / fs)
    mag = np.zeros_like(freqs)
    mag[1:] = 1.0 / np.sqrt(freqs[1:])
    phase = rng.uniform(0, 2 * np.pi, size=freqs.size)
    x = np.fft.irfft(mag * np.exp(1j * phase), n=n)
    sd = x.std()
    return x / sd if sd > 0 else x


def biphasic_spike(fs, width_s=0.07):
    """One period of a sine spanning ``width_s`` seconds: a positive then negative lobe."""
    m = max(int(round(width_s * fs)), 2)
    return np.sin(2 * np.pi * np.arange(m) / m)


def source_mixing(spec, n_channels):
    """``[n_channels, n_sources]`` mixing matrix with unit-norm rows, fixed per corpus seed."""
    rng = np.random.default_rng([spec.seed, 0x6D6978])
    mix = rng.standard_normal((n_channels, spec.n_sources))
    return mix / np.linalg.norm(mix, axis=1, keepdims=True)


def _pick_fs(rng, probs):
    rates = list(probs)
    p = np.array([probs[r] for r in rates], dtype=float)
    return rates[int(rng.choice(len(rates), p=p / p.sum()))]


def generate_recording(spec, index):
    """Build the ``index``-th recording of the corpus; returns ``(Recording, info)``."""
    rng = np.random.default_rng([spec.seed, index])
    fs = _pick_fs(rng, spec.fs_probs)
    n = int(round(spec.duration_s * fs))
    t = np.arange(n) / fs
    labels = list(MONTAGE_LABELS)

    # per-file rhythm frequencies and burst phases
    rhythm = []
    for osc in spec.oscillations:
        f = osc.lo_hz if osc.hi_hz <= osc.lo_hz else float(rng.uniform(osc.lo_hz, osc.hi_hz))
        env_phase = float(rng.uniform(0, 2 * np.pi))
        rhythm.append((osc, f, env_phase))

    def base_channel():
        x = spec.pink_uv * pink_noise(rng, n, fs) if spec.pink_uv > 0 else np.zeros(n)
        for osc, f, env_phase in rhythm:
            phase = rng.uniform(0, 2 * np.pi)
            env = 1.0 - osc.burst_depth * 0.5 * (1 + np.sin(2 * np.pi * osc.burst_hz * t + env_phase))
            x = x + osc.amplitude_uv * env * np.sin(2 * np.pi * f * t + phase)
        return x

    if spec.n_sources > 0:
        # each channel is a unit-norm mixture of the shared sources; the
        # mixing is a property of the corpus (one head model), not of a file
        sources = np.stack([base_channel() for _ in range(spec.n_sources)])
        mix = source_mixing(spec, len(labels))
        base = {l: mix[i] @ sources for i, l in enumerate(labels)}
    else:
        base = {l: base_channel() for l in labels}
    # homologous pairs share a component with correlation rho
    c = np.sqrt(max(0.0, 1.0 - spec.rho ** 2))
    for left, right in FLIP_PAIRS:
        base[right] = spec.rho * base[left] + c * base[right]

    spikes = []
    if spec.spike_rate_per_min > 0 and spec.spike_amplitude_uv > 0:
        count = rng.poisson(spec.spike_rate_per_min * spec.duration_s / 60.0)
        shape = biphasic_spike(fs)
        for _ in range(count):
            start = int(rng.integers(0, max(n - shape.size, 1)))
            focus = rng.choice(len(labels), size=int(rng.integers(3, 8)), replace=False)
            amp = spec.spike_amplitude_uv * rng.uniform(0.5, 1.0)
            for ch in focus:
                seg = base[labels[ch]][start:start + shape.size]
                seg += amp * shape[:seg.size]
            spikes.append(start / fs)

    chans = []
    for l in labels:
        x = base[l]
        if spec.noise_uv > 0:
            x = x + spec.noise_uv * rng.standard_normal(n)
        x = np.clip(x, PHYS_RANGE[0] + 1.0, PHYS_RANGE[1] - 1.0)
        chans.append(ChannelSignal("EEG %s-REF" % _RAW_NAMES.get(l, l).upper(), float(fs), x))
    if spec.extra_channels:
        chans.append(ChannelSignal("EEG SP1-REF", float(fs), 5.0 * rng.standard_normal(n)))
        ecg = 100.0 * np.sin(2 * np.pi * 1.2 * t) ** 15
        chans.append(ChannelSignal("ECG EKG-REF", float(fs), ecg))
    info = {"fs": fs, "rhythm_hz": [f for _, f, _ in rhythm], "spike_times_s": spikes}
    return Recording("synth%04d" % index, chans), info


def generate_corpus(spec, out_dir):
    """Write ``spec.n_files`` EDF files plus ``manifest.csv``; returns the manifest rows."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for i in range(spec.n_files):
        rec, info = generate_recording(spec, i)
        name = "synth_%04d.edf" % i
        write_edf_subset(rec, out / name, PHYS_RANGE)
        rows.append({"file": name, "fs": info["fs"], "duration_s": spec.duration_s,
                     "seed": spec.seed, "file_index": i,
                     "components": json.dumps({"rhythm_hz": info["rhythm_hz"],
                                               "n_spikes": len(info["spike_times_s"]),
                                               "rho": spec.rho, "pink_uv": spec.pink_uv,
                                               "noise_uv": spec.noise_uv,
                                               "n_sources": spec.n_sources})})
    with open(out / "manifest.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=MANIFEST_COLUMNS)
        w.writeheader()
        w.writerows(rows)
    return rows


def read_manifest(path):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    for r in rows:
        fs = float(r["fs"])
        r["fs"] = int(fs) if fs.is_integer() else fs
    return rows
