"""Central finite-difference gradient checking."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ToleranceExceeded


@dataclass
class GradCheckReport:
    max_rel_error: float
    per_param: dict

    @property
    def worst(self):
        return max(self.per_param, key=self.per_param.get) if self.per_param else None


def relative_error(analytic, numeric):
    """Max elementwise |a - n| / max(|a|, |n|, 1e-8 scale floor) over an array."""
    a = np.asarray(analytic, dtype=np.float64)
    n = np.asarray(numeric, dtype=np.float64)
    scale = np.maximum(np.maximum(np.abs(a), np.abs(n)), 1e-8)
    # tiny gradients: compare against the array's overall scale instead
    floor = 1e-6 * max(np.abs(n).max(initial=0.0), np.abs(a).max(initial=0.0), 1e-12)
    return float(np.max(np.abs(a - n) / np.maximum(scale, floor), initial=0.0))


def numeric_grad(fn, array, h=1e-3, max_entries=None, rng=None):
    """Central differences of scalar ``fn()`` w.r.t. entries of ``array`` (modified in place).

    Returns ``(indices, grads)``; with ``max_entries`` only a random subset
    of flat indices is probed.
    """
    flat = array.reshape(-1)
    idx = np.arange(flat.size)
    if max_entries is not None and flat.size > max_entries:
        rng = rng or np.random.default_rng(0)
        idx = np.sort(rng.choice(flat.size, size=max_entries, replace=False))
    out = np.empty(idx.size)
    for j, i in enumerate(idx):
        orig = flat[i]
        flat[i] = orig + h
        fp = float(fn())
        flat[i] = orig - h
        fm = float(fn())
        flat[i] = orig
        out[j] = (fp - fm) / (2 * h)
    return idx, out


def grad_check(loss_fn, params, tol, h=1e-3, max_entries=None, raise_on_fail=True):
    """Compare analytic gradients of ``loss_fn()`` against central differences.

    ``loss_fn`` builds a fresh graph from ``params`` (a name -> Tensor mapping)
    and returns a scalar Tensor. Use 64-bit parameters, no dropout and
    deterministic normalization.
    """
    for p in params.values():
        p.grad = None
    loss = loss_fn()
    loss.backward()
    analytic = {k: (p.grad.copy() if p.grad is not None else np.zeros_like(p.data))
                for k, p in params.items()}
    errors = {}
    for name, p in params.items():
        idx, num = numeric_grad(lambda: loss_fn().item(), p.data, h=h, max_entries=max_entries)
        errors[name] = relative_error(analytic[name].reshape(-1)[idx], num)
    report = GradCheckReport(max(errors.values(), default=0.0), errors)
    bad = {k: v for k, v in errors.items() if not v < tol}
    if bad and raise_on_fail:
        raise ToleranceExceeded(bad)
    return report
