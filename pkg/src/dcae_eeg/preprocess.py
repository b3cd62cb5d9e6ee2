"""Channel cleaning, cubic-spline resampling, IIR filtering and re-referencing."""

from __future__ import annotations

import logging
import math
import re
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import CornerAboveNyquist, MissingChannels, TooShort
from .signal_io import ChannelSignal, Recording

log = logging.getLogger(__name__)

MONTAGE_LABELS = (
    "FP1", "FP2", "F3", "F4", "C3", "C4", "P3", "P4", "O1", "O2", "F7", "F8",
    "T7", "T8", "P7", "P8", "Fz", "Cz", "Pz", "A1", "A2", "T1", "T2",
)

# old 10-20 temporal names -> modern equivalents
SYNONYMS = {"T3": "T7", "T4": "T8", "T5": "P7", "T6": "P8"}

# scalp electrodes of the 10-20 system (plus ear and anterior temporal sites)
SCALP_1020 = frozenset(l.upper() for l in MONTAGE_LABELS) | {"FPZ", "OZ"}

_CANONICAL = {l.upper(): l for l in MONTAGE_LABELS}
_CANONICAL.update({"FPZ": "FPz", "OZ": "Oz"})

INTRACRANIAL = frozenset({"SP1", "SP2"})
_AUX_PATTERN = re.compile(r"ECG|EKG|RESP|PHOTIC|EMG|EOG|LOC|ROC")


@dataclass(frozen=True)
class MontageSpec:
    required_labels: tuple = MONTAGE_LABELS
    reference: str = "Average"

    def __post_init__(self):
        if len(self.required_labels) != 23 or len(set(self.required_labels)) != 23:
            raise ValueError("montage needs exactly 23 distinct labels")
        if self.reference != "Average":
            raise ValueError("only the average reference is supported")


def normalize_label(label):
    """Map a raw EDF label to a canonical 10-20 name, or None if not a scalp electrode.

    ``"EEG T3-REF"`` -> ``"T7"``; ``"EEG SP1-REF"`` -> None.
    """
    name = label.strip().upper()
    if name.startswith("EEG "):
        name = name[4:].strip()
    for suffix in ("-REF", "-LE"):
        if name.endswith(suffix):
            name = name[: -len(suffix)]
    name = SYNONYMS.get(name, name)
    if name in INTRACRANIAL or _AUX_PATTERN.search(name):
        return None
    if name not in SCALP_1020:
        return None
    return _CANONICAL[name]


def clean_channels(rec):
    """Drop intracranial, auxiliary and unrecognized channels; rename the rest canonically."""
    kept = []
    seen = set()
    for ch in rec.channels:
        name = normalize_label(ch.label)
        if name is None:
            continue
        if name in seen:
            log.warning("%s: duplicate channel %s (from %r) dropped", rec.patient_id, name, ch.label)
            continue
        seen.add(name)
        kept.append(ChannelSignal(name, ch.fs, ch.samples))
    return Recording(rec.patient_id, kept)


def resample_cubic(sig, target_fs):
    """Resample with a natural cubic spline through the samples at ``i / fs``.

    The output holds ``floor(duration * target_fs)`` samples taken at ``j / target_fs``.
    """
    n = sig.samples.size
    if n < 4:
        raise TooShort("cubic resampling needs at least 4 samples, got %d" % n)
    if target_fs == sig.fs:
        return ChannelSignal(sig.label, float(target_fs), sig.samples.copy())
    n_out = int(math.floor(n / sig.fs * target_fs + 1e-9))
    t_in = np.arange(n) / sig.fs
    t_out = np.arange(n_out) / target_fs
    spline = CubicSpline(t_in, sig.samples, bc_type="natural", extrapolate=True)
    return ChannelSignal(sig.label, float(target_fs), spline(t_out))


# ---------------------------------------------------------------------------
# IIR design

@dataclass
class BiquadCascade:
    """Second-order sections ``(b0, b1, b2, a1, a2)`` with ``a0 == 1``, and an overall gain."""

    sections: list = field(default_factory=list)
    gain: float = 1.0

    def poles(self):
        out = []
        for b0, b1, b2, a1, a2 in self.sections:
            out.extend(np.roots([1.0, a1, a2]) if a2 != 0 else np.roots([1.0, a1]))
        return np.asarray(out)

    def is_stable(self, margin=1e-9):
        return bool(np.all(np.abs(self.poles()) < 1.0 - margin))

    def frequency_response(self, freqs, fs):
        z = np.exp(-1j * 2 * np.pi * np.asarray(freqs, dtype=float) / fs)
        h = np.full(z.shape, self.gain, dtype=complex)
        for b0, b1, b2, a1, a2 in self.sections:
            h *= (b0 + b1 * z + b2 * z * z) / (1.0 + a1 * z + a2 * z * z)
        return h

    def __add__(self, other):
        return BiquadCascade(self.sections + other.sections, self.gain * other.gain)


def _highpass1(fc, fs):
    k = math.tan(math.pi * fc / fs)
    norm = 1.0 / (1.0 + k)
    return (norm, -norm, 0.0, (k - 1.0) * norm, 0.0)


def _lowpass2(fc, fs, q):
    k = math.tan(math.pi * fc / fs)
    norm = 1.0 / (1.0 + k / q + k * k)
    b0 = k * k * norm
    return (b0, 2.0 * b0, b0, 2.0 * (k * k - 1.0) * norm, (1.0 - k / q + k * k) * norm)


def butterworth_lowpass(order, fc, fs):
    """Even-order Butterworth low-pass as bilinear-transformed (pre-warped) biquads."""
    if order % 2:
        raise ValueError("only even low-pass orders are supported")
    sections = []
    for i in range(order // 2):
        q = 1.0 / (2.0 * math.cos(math.pi * (2 * i + 1) / (2 * order)))
        sections.append(_lowpass2(fc, fs, q))
    return BiquadCascade(sections)


def design_bandpass(fs, low_hz=0.5, high_hz=70.0, lowpass_order=4):
    """First-order Butterworth high-pass at ``low_hz`` followed by a Butterworth low-pass."""
    if not high_hz < fs / 2:
        raise CornerAboveNyquist("low-pass corner %g Hz not below Nyquist (%g Hz)" % (high_hz, fs / 2))
    hp = BiquadCascade([_highpass1(low_hz, fs)])
    return hp + butterworth_lowpass(lowpass_order, high_hz, fs)


def design_notch(fs, f0=60.0, bandwidth=2.0):
    """Second-order notch at ``f0`` with -3 dB bandwidth ``bandwidth`` (Hz)."""
    if not f0 + bandwidth / 2 < fs / 2:
        raise CornerAboveNyquist("notch band edge %g Hz not below Nyquist" % (f0 + bandwidth / 2))
    w0 = 2 * math.pi * f0 / fs
    t = math.tan(math.pi * bandwidth / fs)
    a2 = (1.0 - t) / (1.0 + t)
    a1 = -(1.0 + a2) * math.cos(w0)
    g = (1.0 + a2) / 2.0
    return BiquadCascade([(g, -2.0 * g * math.cos(w0), g, a1, a2)])


def apply_filter(cascade, sig):
    """Causal direct-form II transposed filtering with zero initial state.

    Accepts a :class:`ChannelSignal` or an array (filtered along the last axis).
    """
    if isinstance(sig, ChannelSignal):
        return ChannelSignal(sig.label, sig.fs, apply_filter(cascade, sig.samples))
    from scipy.signal import sosfilt

    y = np.asarray(sig, dtype=np.float64) * cascade.gain
    if not cascade.sections:
        return y.copy()
    sos = np.array([[b0, b1, b2, 1.0, a1, a2] for b0, b1, b2, a1, a2 in cascade.sections])
    return sosfilt(sos, y, axis=-1)


def difference_equation(cascade, x):
    """Reference implementation: naive per-sample evaluation of each section."""
    y = [float(v) * cascade.gain for v in x]
    for b0, b1, b2, a1, a2 in cascade.sections:
        out = []
        x1 = x2 = y1 = y2 = 0.0
        for v in y:
            o = b0 * v + b1 * x1 + b2 * x2 - a1 * y1 - a2 * y2
            x2, x1 = x1, v
            y2, y1 = y1, o
            out.append(o)
        y = out
    return np.array(y)


# ---------------------------------------------------------------------------
# montage

def average_montage(rec, spec=MontageSpec()):
    """Rows in montage order, each minus the per-sample mean over the montage channels."""
    have = {c.label: c for c in rec.channels}
    missing = [l for l in spec.required_labels if l not in have]
    if missing:
        raise MissingChannels(missing)
    rows = [have[l] for l in spec.required_labels]
    lengths = {r.samples.size for r in rows}
    rates = {r.fs for r in rows}
    if len(lengths) != 1 or len(rates) != 1:
        raise ValueError("montage channels must share length and sampling rate")
    x = np.stack([r.samples for r in rows])
    return x - x.mean(axis=0, keepdims=True)


@dataclass
class PipelineParams:
    fs: float = 256.0
    band_lo: float = 0.5
    band_hi: float = 70.0
    notch_hz: float = 60.0
    notch_bw: float = 2.0


def preprocess_recording(rec, params=PipelineParams(), spec=MontageSpec()):
    """clean -> resample -> band-pass -> notch -> average montage; returns ``C x L`` microvolts."""
    rec = clean_channels(rec)
    missing = [l for l in spec.required_labels if l not in rec.labels]
    if missing:
        raise MissingChannels(missing)
    bandpass = design_bandpass(params.fs, params.band_lo, params.band_hi)
    notch = design_notch(params.fs, params.notch_hz, params.notch_bw)
    chain = bandpass + notch
    chans = []
    for label in spec.required_labels:
        ch = resample_cubic(rec.channel(label), params.fs)
        chans.append(apply_filter(chain, ch))
    n = min(c.samples.size for c in chans)
    chans = [ChannelSignal(c.label, c.fs, c.samples[:n]) for c in chans]
    return average_montage(Recording(rec.patient_id, chans), spec)
