"""Time-domain, Fourier and STFT reconstruction losses and their weighted combination."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import spectral as S
from ..errors import ShapeMismatch
from ..nn.tensor import Tensor


def _check(x, xh):
    if tuple(x.shape) != tuple(xh.shape):
        raise ShapeMismatch("original %s vs reconstruction %s" % (tuple(x.shape), tuple(xh.shape)))


def _t(a):
    return a if isinstance(a, Tensor) else Tensor(np.asarray(a))


def _per_window_scale(orig_mag):
    """99th-percentile scale per window (all channels and bins jointly)."""
    data = orig_mag.data if isinstance(orig_mag, Tensor) else orig_mag
    if data.ndim <= 2:
        return S.p99_scale(data)
    return S.p99_scale(data, axis=1)


def _normalized_mae(mx, mxh):
    s = _per_window_scale(mx)
    inv = (1.0 / s) if np.isscalar(s) else (1.0 / s).astype(mx.dtype)
    return ((mxh - mx) * inv).abs().mean()


def loss_ts(x, xh):
    """Mean absolute error over every element."""
    _check(x, xh)
    return (_t(xh) - _t(x)).abs().mean()


def loss_ft(x, xh, fs=256.0, band=(8.0, 30.0)):
    """MAE between p99-normalized Fourier magnitudes restricted to ``band``."""
    _check(x, xh)
    x, xh = _t(x), _t(xh)
    mask = S.BandMask.from_band(fs, x.shape[-1], *band)
    mx = S.dft_magnitude(x.detach(), mask.lo_bin, mask.hi_bin)
    mxh = S.dft_magnitude(xh, mask.lo_bin, mask.hi_bin)
    return _normalized_mae(mx, mxh)


def loss_stft(x, xh):
    """MAE between p99-normalized STFT magnitudes over the full spectrum."""
    _check(x, xh)
    x, xh = _t(x), _t(xh)
    mx = S.stft_magnitude(x.detach())
    mxh = S.stft_magnitude(xh)
    return _normalized_mae(mx, mxh)


def frequency_error(x, xh):
    """Evaluation metric: MAE of p99-normalized full-spectrum magnitudes (numpy in, float out)."""
    _check(x, xh)
    mx = S.rfft_magnitude(np.asarray(x, dtype=np.float64))
    mxh = S.rfft_magnitude(np.asarray(xh, dtype=np.float64))
    s = _per_window_scale(mx)
    return float(np.mean(np.abs(mxh - mx) / s))


@dataclass
class LossBreakdown:
    l_ts: float
    l_ft: float
    l_stft: float
    total: float
    n: int
    objective: float = float("nan")

    def as_row(self):
        return {"l_ts": self.l_ts, "l_ft": self.l_ft, "l_stft": self.l_stft, "total": self.total}


def weighted_total(mode, l_ts, l_ft, l_stft, ft_weight=20.0, stft_weight=20.0):
    if mode == "TS":
        return l_ts
    if mode == "TS_FT":
        return ft_weight * l_ft + 1.0 * l_ts
    if mode == "TS_STFT":
        return stft_weight * l_stft + 1.0 * l_ts
    raise ValueError("unknown loss mode %r" % mode)


def combined_loss(x, xh, mode, ft_weight=20.0, stft_weight=20.0, fs=256.0, band=(8.0, 30.0)):
    """Return ``(total_tensor, LossBreakdown)``.

    All three components are computed for logging; only the ones weighted
    into ``mode`` carry gradient into the total. The scalar components are
    combined in float64, so the differentiated total carries no extra rounding
    from a float32 model. ``objective`` records that total's value.
    """
    lt = loss_ts(x, xh).astype(np.float64)
    lf = loss_ft(x, xh, fs, band).astype(np.float64)
    ls = loss_stft(x, xh).astype(np.float64)
    total = weighted_total(mode, lt, lf, ls, ft_weight, stft_weight)
    bd = LossBreakdown(lt.item(), lf.item(), ls.item(), 0.0, int(np.prod(x.shape)),
                       total.item())
    bd.total = weighted_total(mode, bd.l_ts, bd.l_ft, bd.l_stft, ft_weight, stft_weight)
    return total, bd
