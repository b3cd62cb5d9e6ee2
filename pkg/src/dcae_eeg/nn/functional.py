"""Differentiable layer primitives used by the autoencoder.

All functions take and return :class:`Tensor` objects; shapes follow the
``[batch, channels, time]`` convention.
"""

from __future__ import annotations

import numpy as np

from ..errors import DegenerateBatch, OddLength, ShapeMismatch
from .tensor import Tensor


def conv1d(x, weight, bias=None):
    """Stride-1 cross-correlation with zero "same" padding.

    ``x`` is ``[N, Cin, L]``, ``weight`` is ``[Cout, Cin, k]`` with odd ``k``.
    """
    if x.ndim != 3 or weight.ndim != 3 or x.shape[1] != weight.shape[1]:
        raise ShapeMismatch("conv1d: input %s vs weight %s" % (x.shape, weight.shape))
    k = weight.shape[2]
    if k % 2 != 1:
        raise ShapeMismatch("conv1d needs an odd kernel, got %d" % k)
    pad = (k - 1) // 2
    n, cin, length = x.shape
    cout = weight.shape[0]
    stride = length + 2 * pad
    span = n * stride - 2 * pad
    # channel-major layout with every sequence padded in place: one GEMM per tap
    xp = np.zeros((cin, n, stride), dtype=x.dtype)
    xp[:, :, pad:pad + length] = x.data.transpose(1, 0, 2)
    xf = xp.reshape(cin, n * stride)
    w = weight.data
    taps = np.ascontiguousarray(w.transpose(2, 0, 1))
    acc = taps[0] @ xf[:, 0:span]
    for j in range(1, k):
        acc += taps[j] @ xf[:, j:j + span]
    full = np.empty((cout, n * stride), dtype=acc.dtype)
    full[:, :span] = acc
    out = full.reshape(cout, n, stride)[:, :, :length].transpose(1, 0, 2)
    if bias is not None:
        out = out + bias.data[None, :, None]
    else:
        out = np.ascontiguousarray(out)

    def backward(g):
        gpad = np.zeros((cout, n, stride), dtype=g.dtype)
        gpad[:, :, :length] = g.transpose(1, 0, 2)
        gf = gpad.reshape(cout, n * stride)[:, :span]
        gx = None
        if x.requires_grad:
            gxf = np.zeros((cin, n * stride), dtype=g.dtype)
            taps_t = np.ascontiguousarray(w.transpose(2, 1, 0))
            for j in range(k):
                gxf[:, j:j + span] += taps_t[j] @ gf
            gx = gxf.reshape(cin, n, stride)[:, :, pad:pad + length].transpose(1, 0, 2)
        gw = None
        if weight.requires_grad:
            gw = np.empty_like(w)
            for j in range(k):
                gw[:, :, j] = gf @ xf[:, j:j + span].T
        grads = [gx, gw]
        if bias is not None:
            grads.append(g.sum(axis=(0, 2)))
        return grads

    parents = (x, weight) if bias is None else (x, weight, bias)
    return Tensor.from_op(out, parents, backward)


def dense(x, weight, bias=None):
    """Affine map ``x @ weight.T + bias`` for ``x`` of shape ``[N, Din]``."""
    if x.ndim != 2 or weight.ndim != 2 or x.shape[1] != weight.shape[1]:
        raise ShapeMismatch("dense: input %s vs weight %s" % (x.shape, weight.shape))
    xd, w = x.data, weight.data
    out = xd @ w.T
    if bias is not None:
        out = out + bias.data

    def backward(g):
        grads = [g @ w if x.requires_grad else None,
                 g.T @ xd if weight.requires_grad else None]
        if bias is not None:
            grads.append(g.sum(axis=0))
        return grads

    parents = (x, weight) if bias is None else (x, weight, bias)
    return Tensor.from_op(out, parents, backward)


def relu(x):
    return x.relu()


def batchnorm1d(x, gamma, beta, running_mean, running_var, training,
                momentum=0.1, eps=1e-5):
    """Batch normalization over the batch and time axes of ``[N, C, L]``.

    In training mode the running statistics (plain numpy arrays) are updated
    in place; the running variance uses the unbiased batch variance.
    """
    n, c, length = x.shape
    g4 = gamma.data[None, :, None]
    b4 = beta.data[None, :, None]
    if not training:
        inv_std = 1.0 / np.sqrt(running_var + eps)
        xhat = (x.data - running_mean[None, :, None]) * inv_std[None, :, None]
        out = g4 * xhat + b4

        def backward_eval(g):
            return (g * g4 * inv_std[None, :, None],
                    (g * xhat).sum(axis=(0, 2)),
                    g.sum(axis=(0, 2)))

        return Tensor.from_op(out.astype(x.dtype, copy=False), (x, gamma, beta), backward_eval)

    m = n * length
    if m <= 1:
        raise DegenerateBatch("batchnorm1d in train mode needs N*L > 1")
    mean = x.data.mean(axis=(0, 2))
    centered = x.data - mean[None, :, None]
    var = (centered * centered).mean(axis=(0, 2))
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = centered * inv_std[None, :, None]
    out = g4 * xhat + b4

    running_mean *= 1.0 - momentum
    running_mean += momentum * mean
    running_var *= 1.0 - momentum
    running_var += momentum * var * (m / (m - 1))

    def backward(g):
        dgamma = (g * xhat).sum(axis=(0, 2))
        dbeta = g.sum(axis=(0, 2))
        dxhat = g * g4
        sum_dxhat = dxhat.sum(axis=(0, 2), keepdims=True)
        sum_dxhat_xhat = (dxhat * xhat).sum(axis=(0, 2), keepdims=True)
        dx = (inv_std[None, :, None] / m) * (m * dxhat - sum_dxhat - xhat * sum_dxhat_xhat)
        return dx, dgamma, dbeta

    return Tensor.from_op(out, (x, gamma, beta), backward)


def dropout(x, rate, training, rng=None):
    """Inverted dropout: survivors are scaled by ``1 / (1 - rate)``."""
    if not 0.0 <= rate < 1.0:
        raise ValueError("dropout rate must be in [0, 1), got %r" % rate)
    if not training or rate == 0.0:
        return x
    if rng is None:
        rng = np.random.default_rng()
    mask = (rng.random(x.shape) >= rate).astype(x.dtype) * x.dtype.type(1.0 / (1.0 - rate))
    return Tensor.from_op(x.data * mask, (x,), lambda g: (g * mask,))


def maxpool1d(x, return_indices=False):
    """Max pooling with window 2 and stride 2; ties route to the first element."""
    n, c, length = x.shape
    if length % 2:
        raise OddLength("maxpool1d needs an even length, got %d" % length)
    pairs = x.data.reshape(n, c, length // 2, 2)
    idx = np.argmax(pairs, axis=-1)[..., None]
    out = np.take_along_axis(pairs, idx, axis=-1)[..., 0]

    def backward(g):
        gp = np.zeros_like(pairs)
        np.put_along_axis(gp, idx, g[..., None], axis=-1)
        return (gp.reshape(n, c, length),)

    y = Tensor.from_op(out, (x,), backward)
    if return_indices:
        return y, idx[..., 0]
    return y


def upsample_nn(x, factor=2):
    """Nearest-neighbour upsampling along time: each sample repeated ``factor`` times."""
    n, c, length = x.shape
    out = np.repeat(x.data, factor, axis=2)
    return Tensor.from_op(out, (x,),
                          lambda g: (g.reshape(n, c, length, factor).sum(axis=-1),))


def flatten(x):
    return x.reshape(x.shape[0], -1)


def mae(a, b):
    """Mean absolute error over every element."""
    if a.shape != b.shape:
        raise ShapeMismatch("mae: %s vs %s" % (a.shape, b.shape))
    return (a - b).abs().mean()
