"""Composite operators with hand-written backward rules.

These sit on top of :mod:`ntgraph.tensor` and cover what the attention
kernels, the layer and the model need: GELU, masked softmax, layer
normalization, segment reductions over an index array, dropout and the
classification loss.
"""

import numpy as np
from scipy.special import erf

from .errors import ShapeError
from .tensor import Tensor, _record, as_tensor

_SQRT2 = np.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)


def gelu(a):
    """Exact GELU, ``x * Phi(x)``."""
    x = a.data
    cdf = 0.5 * (1.0 + erf(x / _SQRT2))
    pdf = _INV_SQRT_2PI * np.exp(-0.5 * x * x)

    def bw(g):
        return (g * (cdf + x * pdf),)

    return _record((x * cdf).astype(a.dtype), (a,), bw)


def gelu_np(x):
    """Plain-numpy GELU, used by reference implementations."""
    x = np.asarray(x, dtype=np.float64)
    return x * 0.5 * (1.0 + erf(x / _SQRT2))


def sq_norm(a, keepdims=True):
    """Squared L2 norm over the last axis."""
    out = np.sum(a.data * a.data, axis=-1, keepdims=keepdims)

    def bw(g):
        if not keepdims:
            g = g[..., None]
        return (2.0 * a.data * g,)

    return _record(out, (a,), bw)


def layer_norm(a, eps=1e-5):
    """Normalize over the last axis to zero mean and unit variance (no affine)."""
    x = a.data
    mu = x.mean(axis=-1, keepdims=True)
    xc = x - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    y = xc * inv

    def bw(g):
        gm = g.mean(axis=-1, keepdims=True)
        gy = (g * y).mean(axis=-1, keepdims=True)
        return (inv * (g - gm - y * gy),)

    return _record(y, (a,), bw)


def masked_softmax(a, mask=None, axis=-1):
    """Softmax along ``axis`` with masked positions excluded.

    Masked entries get exactly zero weight; a row with no unmasked entry
    returns the zero row.
    """
    x = a.data
    if mask is None:
        mask = np.ones(x.shape, dtype=bool)
    else:
        mask = np.broadcast_to(np.asarray(mask, dtype=bool), x.shape)
    filled = np.where(mask, x, -np.inf)
    top = filled.max(axis=axis, keepdims=True)
    top = np.where(np.isfinite(top), top, 0.0)
    e = np.where(mask, np.exp(np.where(mask, x - top, 0.0)), 0.0)
    total = e.sum(axis=axis, keepdims=True)
    y = np.divide(e, total, out=np.zeros_like(e), where=total > 0).astype(a.dtype)

    def bw(g):
        dot = (g * y).sum(axis=axis, keepdims=True)
        return (y * (g - dot),)

    return _record(y, (a,), bw)


# ---------------------------------------------------------------------------
# segment reductions (axis 0)
# ---------------------------------------------------------------------------

def _check_segments(values, segments, num_segments):
    segments = np.asarray(segments, dtype=np.int64)
    if segments.ndim != 1 or segments.shape[0] != values.shape[0]:
        raise ShapeError(
            f"segment ids of shape {segments.shape} do not match values of shape {values.shape}"
        )
    if segments.size and (segments.min() < 0 or segments.max() >= num_segments):
        raise IndexError(f"segment ids must lie in [0, {num_segments})")
    return segments


def _segment_sum_np(x, segments, num_segments):
    # np.add.at applies updates in ascending input order
    out = np.zeros((num_segments,) + x.shape[1:], dtype=x.dtype)
    np.add.at(out, segments, x)
    return out


def segment_sum(values, segments, num_segments):
    """Sum rows of ``values`` sharing a segment id; empty segments are zero."""
    values = as_tensor(values)
    segments = _check_segments(values, segments, num_segments)

    def bw(g):
        return (g[segments],)

    return _record(_segment_sum_np(values.data, segments, num_segments), (values,), bw)


def segment_count(segments, num_segments):
    return np.bincount(np.asarray(segments, dtype=np.int64), minlength=num_segments)


def segment_mean(values, segments, num_segments):
    values = as_tensor(values)
    segments = _check_segments(values, segments, num_segments)
    counts = segment_count(segments, num_segments).astype(values.dtype)
    scale = 1.0 / np.maximum(counts, 1.0)
    scale = scale.reshape((-1,) + (1,) * (values.ndim - 1))
    return segment_sum(values, segments, num_segments) * scale


def segment_max(values, segments, num_segments):
    """Row-wise max per segment; empty segments are zero.

    The gradient goes to the first row attaining the maximum.
    """
    values = as_tensor(values)
    segments = _check_segments(values, segments, num_segments)
    x = values.data
    out = np.full((num_segments,) + x.shape[1:], -np.inf, dtype=x.dtype)
    np.maximum.at(out, segments, x)
    empty = ~np.isfinite(out)
    out[empty] = 0.0

    hit = x == out[segments]
    # keep only the first hit per (segment, feature)
    rows = np.arange(x.shape[0]).reshape((-1,) + (1,) * (x.ndim - 1))
    first = np.full(out.shape, x.shape[0], dtype=np.int64)
    np.minimum.at(first, segments, np.where(hit, rows, x.shape[0]))
    winner = hit & (rows == first[segments])

    def bw(g):
        return (np.where(winner, g[segments], 0.0),)

    return _record(out, (values,), bw)


def segment_softmax(values, segments, num_segments):
    """Softmax over rows within each segment (per trailing feature)."""
    values = as_tensor(values)
    segments = _check_segments(values, segments, num_segments)
    x = values.data
    top = np.full((num_segments,) + x.shape[1:], -np.inf, dtype=x.dtype)
    np.maximum.at(top, segments, x)
    e = np.exp(x - top[segments])
    total = _segment_sum_np(e, segments, num_segments)
    y = e / total[segments]

    def bw(g):
        dot = _segment_sum_np(g * y, segments, num_segments)
        return (y * (g - dot[segments]),)

    return _record(y, (values,), bw)


# ---------------------------------------------------------------------------
# training-time operators
# ---------------------------------------------------------------------------

def dropout(a, rate, rng=None, training=True):
    """Inverted dropout. Identity when not training or ``rate == 0``."""
    if not training or rate == 0.0:
        return a
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
    if rng is None:
        raise ValueError("dropout in training mode needs an explicit rng stream")
    keep = (rng.random(a.shape) >= rate).astype(a.dtype) / (1.0 - rate)
    return _record(a.data * keep, (a,), lambda g: (g * keep,))


def cross_entropy(logits, labels):
    """Mean softmax cross-entropy of ``logits`` (n, C) against integer labels."""
    logits = as_tensor(logits)
    labels = np.asarray(labels, dtype=np.int64)
    if logits.ndim != 2 or labels.shape != (logits.shape[0],):
        raise ShapeError(f"cross_entropy: logits {logits.shape} vs labels {labels.shape}")
    if labels.size == 0:
        raise ValueError("cross_entropy over an empty batch")
    x = logits.data
    shifted = x - x.max(axis=1, keepdims=True)
    logp = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    n = x.shape[0]
    loss = -logp[np.arange(n), labels].mean()

    def bw(g):
        p = np.exp(logp)
        p[np.arange(n), labels] -= 1.0
        return (g * p / n,)

    return _record(np.asarray(loss, dtype=x.dtype), (logits,), bw)


def linear(x, weight, bias=None):
    out = x @ weight
    return out if bias is None else out + bias


__all__ = [
    "Tensor",
    "cross_entropy",
    "dropout",
    "gelu",
    "gelu_np",
    "layer_norm",
    "linear",
    "masked_softmax",
    "segment_count",
    "segment_max",
    "segment_mean",
    "segment_softmax",
    "segment_sum",
    "sq_norm",
]
