"""Stateful layer wrappers (parameters + buffers) around the functional ops."""

from __future__ import annotations

import math

import numpy as np

from . import functional as F
from .tensor import Tensor


def kaiming_uniform(rng, shape, fan_in, dtype):
    bound = math.sqrt(6.0 / fan_in)
    return rng.uniform(-bound, bound, size=shape).astype(dtype)


class Module:
    training = True

    def named_parameters(self, prefix=""):
        for name, value in vars(self).items():
            if isinstance(value, Tensor) and value.requires_grad:
                yield prefix + name, value
            elif isinstance(value, Module):
                yield from value.named_parameters(prefix + name + ".")
            elif isinstance(value, (list, tuple)):
                for i, sub in enumerate(value):
                    if isinstance(sub, Module):
                        yield from sub.named_parameters("%s%s.%d." % (prefix, name, i))

    def named_buffers(self, prefix=""):
        for name, value in vars(self).items():
            if isinstance(value, np.ndarray):
                yield prefix + name, value
            elif isinstance(value, Module):
                yield from value.named_buffers(prefix + name + ".")
            elif isinstance(value, (list, tuple)):
                for i, sub in enumerate(value):
                    if isinstance(sub, Module):
                        yield from sub.named_buffers("%s%s.%d." % (prefix, name, i))

    def parameters(self):
        return [p for _, p in self.named_parameters()]

    def modules(self):
        yield self
        for value in vars(self).values():
            if isinstance(value, Module):
                yield from value.modules()
            elif isinstance(value, (list, tuple)):
                for sub in value:
                    if isinstance(sub, Module):
                        yield from sub.modules()

    def train(self, mode=True):
        for m in self.modules():
            m.training = mode
        return self

    def eval(self):
        return self.train(False)

    def zero_grad(self):
        for p in self.parameters():
            p.grad = None


class Conv1d(Module):
    def __init__(self, cin, cout, kernel, rng, dtype=np.float32):
        fan_in = cin * kernel
        self.weight = Tensor(kaiming_uniform(rng, (cout, cin, kernel), fan_in, dtype), requires_grad=True)
        self.bias = Tensor(np.zeros(cout, dtype=dtype), requires_grad=True)

    def __call__(self, x):
        return F.conv1d(x, self.weight, self.bias)


class Dense(Module):
    def __init__(self, din, dout, rng, dtype=np.float32):
        self.weight = Tensor(kaiming_uniform(rng, (dout, din), din, dtype), requires_grad=True)
        self.bias = Tensor(np.zeros(dout, dtype=dtype), requires_grad=True)

    def __call__(self, x):
        return F.dense(x, self.weight, self.bias)


class BatchNorm1d(Module):
    def __init__(self, channels, momentum=0.1, eps=1e-5, dtype=np.float32):
        self.gamma = Tensor(np.ones(channels, dtype=dtype), requires_grad=True)
        self.beta = Tensor(np.zeros(channels, dtype=dtype), requires_grad=True)
        self.running_mean = np.zeros(channels, dtype=dtype)
        self.running_var = np.ones(channels, dtype=dtype)
        self.momentum = momentum
        self.eps = eps

    def __call__(self, x):
        return F.batchnorm1d(x, self.gamma, self.beta, self.running_mean, self.running_var,
                             self.training, self.momentum, self.eps)


class Dropout(Module):
    def __init__(self, rate):
        self.rate = rate
        self.rng = None

    def __call__(self, x):
        return F.dropout(x, self.rate, self.training, self.rng)
