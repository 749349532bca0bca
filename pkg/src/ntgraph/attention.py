"""Exact softmax attention and Performer linear attention over padded batches.

Both kernels take ``Q, K, V`` of shape ``(..., n, h)`` and a boolean mask of
shape broadcastable to ``(..., n)`` marking real rows. Masked rows produce
zero output and never contribute as keys or values.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import functional as F
from . import tensor as T
from .errors import ShapeError
from .rng import stream

EXP_CLAMP = 60.0
DEN_FLOOR = 1e-30


@dataclass
class KernelStats:
    """Counters filled in by the kernels."""

    clamped_rows: int = 0
    calls: dict = field(default_factory=lambda: {"exact": 0, "linear": 0})


def default_features(h):
    """``ceil(h ln h)`` random features, at least 4."""
    return max(4, math.ceil(h * math.log(h))) if h > 1 else 4


@dataclass(frozen=True, eq=False)
class RandomFeatures:
    P: np.ndarray
    seed: int

    @property
    def h(self):
        return self.P.shape[0]

    @property
    def p(self):
        return self.P.shape[1]


def _gram_schmidt(a):
    """Orthonormalize the columns of a square matrix (modified Gram-Schmidt)."""
    q = np.array(a, dtype=np.float64, copy=True)
    for j in range(q.shape[1]):
        for i in range(j):
            q[:, j] -= (q[:, i] @ q[:, j]) * q[:, i]
        q[:, j] /= np.linalg.norm(q[:, j])
    # one re-orthogonalization pass keeps dot products at rounding level
    for j in range(q.shape[1]):
        for i in range(j):
            q[:, j] -= (q[:, i] @ q[:, j]) * q[:, i]
        q[:, j] /= np.linalg.norm(q[:, j])
    return q


def make_random_features(h, p, seed):
    """Orthogonal random features ``P`` of shape ``(h, p)``.

    Gaussian ``h x h`` blocks are orthonormalized column-wise, concatenated
    and truncated to ``p`` columns; each column is then rescaled to a norm
    drawn from the chi distribution with ``h`` degrees of freedom.
    """
    if h < 1 or p < 1:
        raise ValueError("h and p must be >= 1")
    rng = stream(seed, "random_features", h, p)
    blocks = [_gram_schmidt(rng.standard_normal((h, h))) for _ in range(-(-p // h))]
    P = np.concatenate(blocks, axis=1)[:, :p]
    norms = np.sqrt(rng.chisquare(h, size=p))
    P = P * norms
    P.setflags(write=False)
    return RandomFeatures(P, seed)


def switch_threshold(p, h):
    """Size above which linear attention needs less memory than exact.

    Positive root of ``n**2 = 2*n*p + h*p``.
    """
    if p < 1 or h < 1:
        raise ValueError("p and h must be >= 1")
    return p + math.sqrt(p * p + h * p)


def uses_linear(size, p, h):
    return size > switch_threshold(p, h)


def _check_qkv(Q, K, V):
    if Q.shape != K.shape or Q.shape[:-1] != V.shape[:-1]:
        raise ShapeError(f"attention: incompatible Q{Q.shape}, K{K.shape}, V{V.shape}")


def _row_mask(mask, like):
    if mask is None:
        return np.ones(like.shape[:-1], dtype=bool)
    return np.broadcast_to(np.asarray(mask, dtype=bool), like.shape[:-1])


def exact_attention(Q, K, V, mask=None, stats=None):
    """``softmax(Q K^T / sqrt(h)) V`` restricted to unmasked rows."""
    Q, K, V = T.as_tensor(Q), T.as_tensor(K), T.as_tensor(V)
    _check_qkv(Q, K, V)
    rows = _row_mask(mask, Q)
    h = Q.shape[-1]
    scores = (Q @ T.transpose(K)) * (1.0 / math.sqrt(h))
    weights = F.masked_softmax(scores, rows[..., None, :] & rows[..., :, None])
    if stats is not None:
        stats.calls["exact"] += 1
    return (weights @ V) * rows[..., None]


def linear_attention(Q, K, V, mask=None, rf=None, stats=None):
    """Performer estimate of softmax attention.

    ``Qf = exp(Q P / sqrt(h))``, ``Kf = exp(K P - |K|^2 / 2)``, output
    ``diag(Qf (Kf^T 1))^-1 Qf (Kf^T V)``. Exponents are clamped to
    +-60; normalizers below 1e-30 are floored and counted in ``stats``.
    """
    Q, K, V = T.as_tensor(Q), T.as_tensor(K), T.as_tensor(V)
    _check_qkv(Q, K, V)
    if rf is None:
        raise ValueError("linear_attention needs random features")
    P = rf.P if isinstance(rf, RandomFeatures) else rf
    P = T.as_tensor(np.asarray(P, dtype=Q.dtype))
    h = Q.shape[-1]
    if P.shape[-2] != h:
        raise ShapeError(f"random features {P.shape} do not match head dim {h}")
    rows = _row_mask(mask, Q)
    keep = rows[..., None].astype(Q.dtype)

    q_feat = T.exp(T.clip((Q @ P) * (1.0 / math.sqrt(h)), -EXP_CLAMP, EXP_CLAMP))
    k_feat = T.exp(T.clip(K @ P - F.sq_norm(K) * 0.5, -EXP_CLAMP, EXP_CLAMP)) * keep
    kv = T.transpose(k_feat) @ V
    k1 = T.sum_(k_feat, axis=-2, keepdims=True)
    num = q_feat @ kv
    den = T.sum_(q_feat * k1, axis=-1, keepdims=True)
    den, clamped = T.clamp_min(den, DEN_FLOOR)
    if stats is not None:
        stats.calls["linear"] += 1
        stats.clamped_rows += int(np.sum(np.broadcast_to(rows[..., None], den.shape) & (den.data <= DEN_FLOOR)))
    return (num / den) * keep


@dataclass
class PaddedBatch:
    """Neighbourhoods stacked to ``(G, D, d)`` (or ``(G, heads, D, d)``).

    ``mask`` is ``(G, D)``, true on real, left-aligned entries. ``owner``
    maps every slot to ``(neighbourhood id, member id)``, ``-1`` on padding.
    """

    values: T.Tensor
    mask: np.ndarray
    owner: np.ndarray = None

    @property
    def sizes(self):
        return self.mask.sum(axis=1)

    @classmethod
    def from_rows(cls, rows, sizes, owner=None):
        """Pack a list of ``(size_i, d)`` arrays into a padded batch."""
        sizes = np.asarray(sizes, dtype=np.int64)
        D = int(sizes.max()) if sizes.size else 0
        d = rows[0].shape[-1] if rows else 0
        values = np.zeros((len(rows), D, d))
        mask = np.zeros((len(rows), D), dtype=bool)
        for g, r in enumerate(rows):
            values[g, : len(r)] = r
            mask[g, : len(r)] = True
        return cls(T.Tensor(values), mask, owner)


def grouped_attention(batch, kind, params, rf=None, stats=None):
    """Project a padded batch to Q, K, V and run one kernel on it.

    ``params`` maps ``W_q``, ``W_k``, ``W_v`` to Tensors. For a head axis,
    batch values are ``(G, H, D, d)``, weights ``(H, d, h)`` and ``rf.P``
    (or a raw array) ``(H, h, p)``.
    """
    x = batch.values
    mask = batch.mask
    if x.ndim == 4:
        mask = mask[:, None, :]
    Q = x @ params["W_q"]
    K = x @ params["W_k"]
    V = x @ params["W_v"]
    if kind == "exact":
        out = exact_attention(Q, K, V, mask, stats=stats)
    elif kind == "linear":
        P = rf.P if isinstance(rf, RandomFeatures) else rf
        out = linear_attention(Q, K, V, mask, P, stats=stats)
    else:
        raise ValueError(f"unknown attention kind {kind!r}")
    return PaddedBatch(out, batch.mask, batch.owner)
