"""Fourier / short-time Fourier magnitudes, band masks and percentile normalization.

The transforms accept either numpy arrays or :class:`~dcae_eeg.nn.Tensor`
objects (time on the last axis). Tensor inputs produce differentiable
outputs; the gradient of ``|X_k|`` at ``X_k == 0`` is taken as zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import MaskOutOfRange
from .nn.tensor import Tensor

STFT_WINDOW = 64
STFT_HOP = 8
NORM_EPS = 1e-8


@dataclass(frozen=True)
class BandMask:
    """Inclusive FFT-bin range ``[lo_bin, hi_bin]``."""

    lo_bin: int
    hi_bin: int

    @classmethod
    def from_band(cls, fs=256.0, n_time=512, lo_hz=8.0, hi_hz=30.0):
        df = fs / n_time
        # closed interval [lo_hz, hi_hz]; tolerate float noise at exact edges
        lo = math.ceil(lo_hz / df - 1e-9)
        hi = math.floor(hi_hz / df + 1e-9)
        return cls(lo, hi)

    @property
    def n_bins(self):
        return self.hi_bin - self.lo_bin + 1


def _mag_backward_time(z, mag, g, n):
    """Adjoint of ``x -> |rfft(x)|`` applied to ``g`` (one-sided, length ``n``)."""
    with np.errstate(invalid="ignore", divide="ignore"):
        unit = np.where(mag > 0, z / np.where(mag > 0, mag, 1.0), 0.0)
    y = g * unit
    # irfft doubles the interior bins; undo that so each bin counts once
    if n % 2 == 0:
        y[..., 1:-1] *= 0.5
    else:
        y[..., 1:] *= 0.5
    return np.fft.irfft(y, n=n, axis=-1) * n


def rfft_magnitude(x):
    """One-sided DFT magnitude ``|X_k|`` along the last axis; no window, no scaling."""
    if not isinstance(x, Tensor):
        return np.abs(np.fft.rfft(np.asarray(x), axis=-1))
    n = x.shape[-1]
    z = np.fft.rfft(x.data, axis=-1)
    mag = np.abs(z)
    dtype = x.dtype

    def backward(g):
        return (_mag_backward_time(z, mag, g, n).astype(dtype, copy=False),)

    return Tensor.from_op(mag.astype(dtype, copy=False), (x,), backward)


def hann(n):
    """Periodic Hann window of length ``n``."""
    k = np.arange(n)
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * k / n)


@lru_cache(maxsize=32)
def _dft_basis(n, lo, hi, windowed, dtype):
    """``[n, 2K]`` matrix: real then imaginary DFT basis columns for bins ``lo..hi``."""
    t = np.arange(n)[:, None]
    k = np.arange(lo, hi + 1)[None, :]
    ang = 2.0 * np.pi * ((t * k) % n) / n
    taper = hann(n)[:, None] if windowed else 1.0
    basis = np.concatenate([taper * np.cos(ang), -taper * np.sin(ang)], axis=1)
    return np.ascontiguousarray(basis, dtype=dtype)


def _dft_mag_rows(rows, lo, hi, windowed):
    """``|DFT|`` of each row of a 2-D array over bins ``lo..hi`` via one GEMM.

    Returns ``(z, mag, basis)`` where ``z`` holds real parts then imaginary parts.
    """
    dtype = rows.dtype if rows.dtype in (np.float32, np.float64) else np.float64
    basis = _dft_basis(rows.shape[-1], lo, hi, windowed, np.dtype(dtype).str)
    z = rows @ basis
    k = basis.shape[1] // 2
    zz = z * z
    return z, np.sqrt(zz[:, :k] + zz[:, k:]), basis


def _mag_adjoint(z, mag, g, basis):
    # d|X|/dRe = Re/|X|, d|X|/dIm = Im/|X|; zero where |X| == 0
    w = np.zeros_like(mag)
    np.divide(g, mag, out=w, where=mag > 0)
    return (z * np.concatenate([w, w], axis=1)) @ basis.T


def dft_magnitude(x, lo_bin, hi_bin):
    """Magnitudes of DFT bins ``lo_bin..hi_bin`` along the last axis (no window).

    Equal to ``rfft_magnitude(x)[..., lo_bin:hi_bin + 1]`` but only computes the
    requested bins, which is cheaper for narrow bands.
    """
    data = x.data if isinstance(x, Tensor) else np.asarray(x)
    lead, n = data.shape[:-1], data.shape[-1]
    z, mag, basis = _dft_mag_rows(data.reshape(-1, n), lo_bin, hi_bin, False)
    out = mag.reshape(lead + (mag.shape[-1],))
    if not isinstance(x, Tensor):
        return out

    def backward(g):
        gx = _mag_adjoint(z, mag, g.reshape(mag.shape), basis)
        return (gx.reshape(data.shape).astype(x.dtype, copy=False),)

    return Tensor.from_op(out.astype(x.dtype, copy=False), (x,), backward)


def n_frames(n_time, win=STFT_WINDOW, hop=STFT_HOP):
    return (n_time - win) // hop + 1


def _frames(data, win, hop):
    m = n_frames(data.shape[-1], win, hop)
    view = np.lib.stride_tricks.sliding_window_view(data, win, axis=-1)
    return view[..., ::hop, :][..., :m, :]


def stft_magnitude(x, win=STFT_WINDOW, hop=STFT_HOP):
    """Hann-windowed STFT magnitude, output ``[..., win//2 + 1, n_frames]``.

    Frames start at ``0, hop, 2*hop, ...``; no padding at either end.
    """
    data = x.data if isinstance(x, Tensor) else np.asarray(x)
    if not np.issubdtype(data.dtype, np.floating):
        data = data.astype(np.float64)
    n_time = data.shape[-1]
    if n_time < win:
        raise ValueError("signal of length %d shorter than STFT window %d" % (n_time, win))
    frames = _frames(data, win, hop)
    lead, m = frames.shape[:-2], frames.shape[-2]
    z, mag, basis = _dft_mag_rows(frames.reshape(-1, win), 0, win // 2, True)
    out = np.swapaxes(mag.reshape(lead + (m, win // 2 + 1)), -1, -2)
    if not isinstance(x, Tensor):
        return out
    dtype = x.dtype

    def backward(g):
        gm = np.swapaxes(g, -1, -2).reshape(mag.shape)
        gf = _mag_adjoint(z, mag, gm, basis).reshape(lead + (m, win))
        gx = np.zeros(data.shape, dtype=gf.dtype)
        if win % hop == 0:
            per = win // hop
            span = (m + per - 1) * hop
            blocks = np.zeros(lead + (m + per - 1, hop), dtype=gx.dtype)
            for j in range(per):
                blocks[..., j:j + m, :] += gf[..., :, j * hop:(j + 1) * hop]
            gx[..., :span] = blocks.reshape(*lead, span)
        else:
            for f in range(m):
                gx[..., f * hop:f * hop + win] += gf[..., f, :]
        return (gx.astype(dtype, copy=False),)

    return Tensor.from_op(out.astype(dtype, copy=False), (x,), backward)


def band_select(spec, mask):
    """Bins ``mask.lo_bin ..= mask.hi_bin`` of a spectrum (frequency on the last axis)."""
    n_bins = spec.shape[-1]
    if mask.lo_bin < 0 or mask.hi_bin >= n_bins or mask.lo_bin > mask.hi_bin:
        raise MaskOutOfRange("band [%d, %d] outside spectrum of %d bins"
                             % (mask.lo_bin, mask.hi_bin, n_bins))
    return spec[..., mask.lo_bin:mask.hi_bin + 1]


def quantile_linear(data, q):
    """Linear-interpolation quantile along the last axis (numpy's default method)."""
    data = np.asarray(data)
    n = data.shape[-1]
    pos = q * (n - 1)
    lo = int(math.floor(pos))
    frac = pos - lo
    part = np.partition(data, lo, axis=-1)
    below = part[..., lo]
    if lo + 1 >= n:
        return below
    above = part[..., lo + 1:].min(axis=-1)
    return below + (above - below) * frac


def p99_scale(original, axis=None):
    """99th percentile (linear interpolation) of ``original``, floored at 1e-8.

    With ``axis=None`` a single scalar over all elements; otherwise the
    percentile is taken over the flattened trailing axes starting at ``axis``
    and returned with broadcastable shape.
    """
    data = original.data if isinstance(original, Tensor) else np.asarray(original)
    if axis is None:
        return max(float(quantile_linear(data.reshape(-1), 0.99)), NORM_EPS)
    lead = data.shape[:axis]
    flat = data.reshape(*lead, -1)
    s = np.maximum(quantile_linear(flat, 0.99), NORM_EPS)
    return s.reshape(lead + (1,) * (data.ndim - axis)).astype(data.dtype, copy=False)


def p99_normalize(original, reconstruction, axis=None):
    """Divide both inputs by the 99th percentile of ``original``.

    The scale is treated as a constant (no gradient flows through it).
    """
    s = p99_scale(original, axis=axis)
    if isinstance(original, Tensor) or isinstance(reconstruction, Tensor):
        inv = 1.0 / s if np.isscalar(s) else (1.0 / s).astype(s.dtype)
        return _scale(original, inv), _scale(reconstruction, inv)
    return np.asarray(original) / s, np.asarray(reconstruction) / s


def _scale(x, inv):
    if isinstance(x, Tensor):
        return x * inv
    return np.asarray(x) * inv
