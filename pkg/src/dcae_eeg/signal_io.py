"""EDF reading/writing, the DCAE tensor file format, and corpus census.

Only continuous EDF/EDF+C with 16-bit samples is supported. Samples are
converted to physical units (microvolts) on read.
"""

from __future__ import annotations

import logging
import math
import struct
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (ChecksumOrLengthMismatch, DataError, DegenerateCalibration,
                     MalformedHeader, RangeOverflow, UnsupportedFeature)

log = logging.getLogger(__name__)

DIG_MIN = -32768
DIG_MAX = 32767
ANNOTATION_LABEL = "EDF Annotations"


@dataclass
class ChannelSignal:
    label: str
    fs: float
    samples: np.ndarray

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.fs <= 0:
            raise ValueError("sampling rate must be positive, got %r" % self.fs)
        if self.samples.ndim != 1 or self.samples.size == 0:
            raise ValueError("channel %r: samples must be a nonempty 1-D sequence" % self.label)

    @property
    def duration_s(self):
        return self.samples.size / self.fs


@dataclass
class Recording:
    patient_id: str
    channels: list = field(default_factory=list)

    @property
    def duration_s(self):
        return max((c.duration_s for c in self.channels), default=0.0)

    @property
    def labels(self):
        return [c.label for c in self.channels]

    def channel(self, label):
        for c in self.channels:
            if c.label == label:
                return c
        raise KeyError(label)

    def validate(self):
        labels = self.labels
        if len(set(labels)) != len(labels):
            raise DataError("duplicate channel labels in recording %r" % self.patient_id)
        if self.channels:
            d = self.duration_s
            for c in self.channels:
                if abs(c.duration_s - d) > 1.0 / c.fs + 1e-9:
                    raise DataError("channel %r duration %.4f s differs from %.4f s"
                                    % (c.label, c.duration_s, d))
        return self


# ---------------------------------------------------------------------------
# EDF

def digital_to_physical(dig, dig_min, dig_max, phys_min, phys_max):
    """Affine calibration from stored integers to physical units."""
    if dig_max == dig_min:
        raise DegenerateCalibration("digital range is empty (digMax == digMin)")
    gain = (phys_max - phys_min) / (dig_max - dig_min)
    return (np.asarray(dig, dtype=np.float64) - dig_min) * gain + phys_min


def physical_to_digital(phys, dig_min, dig_max, phys_min, phys_max):
    gain = (dig_max - dig_min) / (phys_max - phys_min)
    dig = np.round((np.asarray(phys, dtype=np.float64) - phys_min) * gain + dig_min)
    return np.clip(dig, dig_min, dig_max).astype("<i2")


def _field(raw, start, width, what):
    try:
        return raw[start:start + width].decode("ascii").strip()
    except UnicodeDecodeError as exc:
        raise MalformedHeader("non-ASCII bytes in header field %s" % what) from exc


def _num(text, what, kind=float):
    try:
        return kind(text)
    except ValueError as exc:
        raise MalformedHeader("header field %s is not a number: %r" % (what, text)) from exc


def read_edf(path):
    """Read a continuous EDF file into a :class:`Recording` in physical units."""
    path = Path(path)
    raw = path.read_bytes()
    if len(raw) < 256:
        raise MalformedHeader("%s: file shorter than the 256-byte main header" % path)
    version = raw[0:8]
    if version != b"0       ":
        raise MalformedHeader("%s: version field %r is not EDF" % (path, version))
    patient = _field(raw, 8, 80, "patient")
    header_bytes = _num(_field(raw, 184, 8, "header bytes"), "header bytes", int)
    reserved = _field(raw, 192, 44, "reserved")
    n_records = _num(_field(raw, 236, 8, "record count"), "record count", int)
    record_dur = _num(_field(raw, 244, 8, "record duration"), "record duration")
    ns = _num(_field(raw, 252, 4, "signal count"), "signal count", int)
    if reserved.startswith("EDF+D"):
        raise UnsupportedFeature("%s: discontinuous EDF+D is not supported" % path)
    if ns <= 0 or header_bytes != 256 * (ns + 1):
        raise MalformedHeader("%s: header byte count %d inconsistent with %d signals"
                              % (path, header_bytes, ns))
    if len(raw) < header_bytes:
        raise MalformedHeader("%s: truncated signal headers" % path)
    if record_dur <= 0:
        raise MalformedHeader("%s: non-positive data record duration" % path)

    def column(offset, width, what):
        base = 256 + offset * ns
        return [_field(raw, base + i * width, width, what) for i in range(ns)]

    # per-signal header layout: widths in EDF order
    widths = [("label", 16), ("transducer", 80), ("dimension", 8), ("phys_min", 8),
              ("phys_max", 8), ("dig_min", 8), ("dig_max", 8), ("prefilter", 80),
              ("spr", 8), ("reserved", 32)]
    cols = {}
    offset = 0
    for name, width in widths:
        cols[name] = column(offset, width, name)
        offset += width

    spr = [_num(s, "samples per record", int) for s in cols["spr"]]
    record_samples = sum(spr)
    data_bytes = len(raw) - header_bytes
    if n_records < 0:
        n_records = data_bytes // (2 * record_samples)
    if data_bytes != 2 * record_samples * n_records:
        raise MalformedHeader("%s: data section is %d bytes, header implies %d"
                              % (path, data_bytes, 2 * record_samples * n_records))

    data = np.frombuffer(raw, dtype="<i2", offset=header_bytes).reshape(n_records, record_samples)
    channels = []
    start = 0
    for i in range(ns):
        label = cols["label"][i]
        stop = start + spr[i]
        block = data[:, start:stop]
        start = stop
        if label == ANNOTATION_LABEL:
            continue
        dig_min = _num(cols["dig_min"][i], "digital minimum")
        dig_max = _num(cols["dig_max"][i], "digital maximum")
        phys_min = _num(cols["phys_min"][i], "physical minimum")
        phys_max = _num(cols["phys_max"][i], "physical maximum")
        try:
            samples = digital_to_physical(block.reshape(-1), dig_min, dig_max, phys_min, phys_max)
        except DegenerateCalibration:
            log.warning("%s: dropping channel %r with digMax == digMin", path, label)
            continue
        channels.append(ChannelSignal(label, spr[i] / record_dur, samples))
    return Recording(patient_id=patient.split(" ")[0] if patient else path.stem,
                     channels=channels)


def _pad(text, width):
    encoded = str(text).encode("ascii", "replace")[:width]
    return encoded + b" " * (width - len(encoded))


def _fmt_num(value, width=8):
    """Shortest decimal representation of ``value`` that fits ``width`` characters."""
    if float(value).is_integer() and len(str(int(value))) <= width:
        return str(int(value))
    for digits in range(width, 0, -1):
        text = ("%." + str(digits) + "g") % value
        if len(text) <= width:
            return text
    raise ValueError("cannot format %r in %d characters" % (value, width))


def write_edf_subset(rec, path, phys_range=(-2000.0, 2000.0)):
    """Write ``rec`` as a continuous 16-bit EDF file.

    All channels share the physical range ``phys_range`` (microvolts). When
    every channel holds a whole number of seconds at an integer rate, 1 s
    data records are used; otherwise the file is a single data record.
    """
    phys_min, phys_max = map(float, phys_range)
    if not phys_max > phys_min:
        raise ValueError("physical range must be increasing")
    chans = rec.channels
    if not chans:
        raise DataError("cannot write a recording without channels")
    for c in chans:
        lo, hi = float(np.min(c.samples)), float(np.max(c.samples))
        if lo < phys_min or hi > phys_max:
            raise RangeOverflow("channel %r spans [%g, %g], outside [%g, %g]"
                                % (c.label, lo, hi, phys_min, phys_max))

    one_second = all(float(c.fs).is_integer() and c.samples.size % int(c.fs) == 0 for c in chans)
    if one_second:
        record_dur = 1.0
        n_records = chans[0].samples.size // int(chans[0].fs)
        spr = [int(c.fs) for c in chans]
        if any(c.samples.size != n_records * s for c, s in zip(chans, spr)):
            one_second = False
    if not one_second:
        record_dur = chans[0].samples.size / chans[0].fs
        n_records = 1
        spr = [c.samples.size for c in chans]

    ns = len(chans)
    header = bytearray()
    header += _pad("0", 8)
    header += _pad(rec.patient_id or "X", 80)
    header += _pad("Startdate X X X X", 80)
    header += _pad("01.01.00", 8) + _pad("00.00.00", 8)
    header += _pad(256 * (ns + 1), 8)
    header += _pad("", 44)
    header += _pad(n_records, 8)
    header += _pad(_fmt_num(record_dur), 8)
    header += _pad(ns, 4)
    fields = [
        [_pad(c.label, 16) for c in chans],
        [_pad("", 80)] * ns,
        [_pad("uV", 8)] * ns,
        [_pad(_fmt_num(phys_min), 8)] * ns,
        [_pad(_fmt_num(phys_max), 8)] * ns,
        [_pad(DIG_MIN, 8)] * ns,
        [_pad(DIG_MAX, 8)] * ns,
        [_pad("", 80)] * ns,
        [_pad(s, 8) for s in spr],
        [_pad("", 32)] * ns,
    ]
    for col in fields:
        for item in col:
            header += item
    assert len(header) == 256 * (ns + 1)

    digital = [physical_to_digital(c.samples, DIG_MIN, DIG_MAX, phys_min, phys_max)
               .reshape(n_records, s) for c, s in zip(chans, spr)]
    body = np.concatenate(digital, axis=1).astype("<i2")
    with open(path, "wb") as fh:
        fh.write(bytes(header))
        fh.write(body.tobytes())


def quantization_step(phys_range=(-2000.0, 2000.0)):
    return (phys_range[1] - phys_range[0]) / (DIG_MAX - DIG_MIN)


# ---------------------------------------------------------------------------
# tensor files

TENSOR_MAGIC = b"DCAE"
TENSOR_VERSION = 1
_TENSOR_HEAD = struct.Struct("<4sHB")


def tensor_to_bytes(array):
    arr = np.asarray(array)
    if not np.all(np.isfinite(arr)):
        raise ValueError("tensor files hold finite values only")
    # np.ascontiguousarray would promote a 0-d array to 1-d
    arr = np.asarray(arr, dtype="<f4", order="C")
    head = _TENSOR_HEAD.pack(TENSOR_MAGIC, TENSOR_VERSION, arr.ndim)
    dims = struct.pack("<%dQ" % arr.ndim, *arr.shape)
    return head + dims + arr.tobytes()


def tensor_from_bytes(buf, offset=0):
    """Decode one tensor starting at ``offset``; returns ``(array, next_offset)``."""
    if len(buf) - offset < _TENSOR_HEAD.size:
        raise ChecksumOrLengthMismatch("tensor header truncated")
    magic, version, rank = _TENSOR_HEAD.unpack_from(buf, offset)
    if magic != TENSOR_MAGIC:
        raise ChecksumOrLengthMismatch("bad tensor magic %r" % magic)
    if version != TENSOR_VERSION:
        raise ChecksumOrLengthMismatch("unsupported tensor version %d" % version)
    offset += _TENSOR_HEAD.size
    if len(buf) - offset < 8 * rank:
        raise ChecksumOrLengthMismatch("tensor dims truncated")
    dims = struct.unpack_from("<%dQ" % rank, buf, offset)
    offset += 8 * rank
    nbytes = 4 * math.prod(dims)
    if len(buf) - offset < nbytes:
        raise ChecksumOrLengthMismatch("tensor payload truncated: %d of %d bytes"
                                       % (len(buf) - offset, nbytes))
    arr = np.frombuffer(buf, dtype="<f4", count=math.prod(dims), offset=offset).reshape(dims)
    return arr.astype(np.float32), offset + nbytes


def write_tensor(path, array):
    Path(path).write_bytes(tensor_to_bytes(array))


def read_tensor(path):
    buf = Path(path).read_bytes()
    arr, end = tensor_from_bytes(buf)
    if end != len(buf):
        raise ChecksumOrLengthMismatch("%d trailing bytes after tensor payload" % (len(buf) - end))
    return arr


# ---------------------------------------------------------------------------
# census

@dataclass
class Census:
    counts: dict
    unreadable: dict

    @property
    def n_warnings(self):
        return len(self.unreadable)


def _rate_key(fs):
    return int(fs) if float(fs).is_integer() else float(fs)


def sampling_rate_census(paths):
    """Count files by their highest channel sampling rate.

    Files that fail to parse are collected in ``unreadable`` (path -> message).
    """
    counts = Counter()
    unreadable = {}
    for p in paths:
        try:
            rec = read_edf(p)
            if not rec.channels:
                raise DataError("no usable channels")
        except (DataError, OSError, ValueError) as exc:
            unreadable[str(p)] = str(exc)
            continue
        counts[_rate_key(max(c.fs for c in rec.channels))] += 1
    return Census(dict(sorted(counts.items())), unreadable)
