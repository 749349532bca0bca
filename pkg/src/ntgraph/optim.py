"""Adam with bias correction."""

from dataclasses import dataclass, field

import numpy as np

from .errors import StateError


@dataclass
class AdamState:
    lr: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_step(params, state):
    """Apply one Adam update to ``params`` in place and zero their grads.

    ``params`` is a mapping of name to leaf Tensor (or a list, keyed by
    position). Every parameter must carry a gradient.
    """
    items = params.items() if hasattr(params, "items") else enumerate(params)
    items = list(items)
    for name, p in items:
        if p.grad is None:
            raise StateError(f"parameter {name!r} has no gradient")

    state.step += 1
    t = state.step
    c1 = 1.0 - state.beta1 ** t
    c2 = 1.0 - state.beta2 ** t
    for name, p in items:
        g = p.grad
        m = state.m.get(name)
        if m is None:
            m = np.zeros_like(p.data)
            state.v[name] = np.zeros_like(p.data)
        v = state.v[name]
        m = state.beta1 * m + (1.0 - state.beta1) * g
        v = state.beta2 * v + (1.0 - state.beta2) * g * g
        state.m[name] = m
        state.v[name] = v
        if state.lr != 0.0:
            p.data = p.data - state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
        p.grad = None
