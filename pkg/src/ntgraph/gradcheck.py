"""Central-difference gradient verification."""

import numpy as np

from .tensor import Tensor, backward, no_grad


def finite_diff_check(f, x, eps=1e-5):
    """Compare autodiff and central-difference gradients of scalar ``f`` at ``x``.

    Returns the max over coordinates of ``|a - n| / max(|a|, |n|, 1e-8)``.
    ``f`` receives a Tensor and must return a scalar Tensor.
    """
    if not 0.0 < eps <= 1e-2:
        raise ValueError("eps must lie in (0, 1e-2]")
    base = np.array(x.data, copy=True) if isinstance(x, Tensor) else np.array(x, dtype=np.float64)

    leaf = Tensor(base.copy(), requires_grad=True)
    backward(f(leaf))
    analytic = np.zeros_like(base) if leaf.grad is None else leaf.grad

    numeric = np.zeros_like(base)
    flat = numeric.reshape(-1)
    probe = base.copy()
    pflat = probe.reshape(-1)
    with no_grad():
        for i in range(pflat.size):
            orig = pflat[i]
            pflat[i] = orig + eps
            up = float(f(Tensor(probe.copy())).data)
            pflat[i] = orig - eps
            down = float(f(Tensor(probe.copy())).data)
            pflat[i] = orig
            flat[i] = (up - down) / (2.0 * eps)

    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-8)
    err = np.abs(analytic - numeric) / denom
    return float(err.max()) if err.size else 0.0
