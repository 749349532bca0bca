"""Neighbourhood Transformer layer, its directed variant, and a plain MP layer.

One NT layer, for every edge ``(j, k)`` (``k`` in ``N(j)``):

1. combine  ``Z[j,k] = gelu(Combiner([H[j], H[k]]))``
2. exchange ``M[j] = gelu(SelfAttention(stack of Z[j,k] over k in N(j)))``
3. aggregate ``H_out[i] = Aggregator(M[j][i] over neighbourhoods j containing i)``

Edge-indexed tensors follow CSR order, so edge ``e`` is
``(edge_src[e], edge_dst[e])`` and ``M[e]`` is delivered to ``edge_dst[e]``.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import functional as F
from . import tensor as T
from .attention import PaddedBatch, default_features, grouped_attention, make_random_features
from .graph import degree_histogram, transform
from .planner import check_plan
from .planner import plan as make_plan

STATIC_AGGREGATORS = ("mean", "sum", "max")
DYNAMIC_AGGREGATORS = ("weighted_mean", "gated_sum")
AGGREGATORS = STATIC_AGGREGATORS + DYNAMIC_AGGREGATORS
COMBINER_MODES = ("full", "ego_only", "neighbour_only")


def xavier(rng, fan_in, fan_out, shape=None):
    bound = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=shape or (fan_in, fan_out))


@dataclass
class NTParams:
    """Weights of one NT layer.

    ``W_comb`` is ``(2 * d_in, heads * h)``: the first ``d_in`` rows read
    the central node, the rest the member. Attention weights are per head,
    ``(heads, h, h)``; ``W_v`` is ``(heads, h, 2h)`` for the dynamic
    aggregators. ``P`` holds the fixed random features, ``(heads, h, p)``.
    """

    W_comb: T.Tensor
    b_comb: T.Tensor
    W_q: T.Tensor
    W_k: T.Tensor
    W_v: T.Tensor
    P: np.ndarray
    aggregator: str = "mean"
    W_edge: T.Tensor = None

    @property
    def heads(self):
        return self.W_q.shape[0]

    @property
    def h(self):
        return self.W_q.shape[-1]

    @property
    def in_dim(self):
        return self.W_comb.shape[0] // 2

    @property
    def dynamic(self):
        return self.aggregator in DYNAMIC_AGGREGATORS

    @property
    def out_dim(self):
        return self.heads * self.h

    def tensors(self):
        out = {"W_comb": self.W_comb, "b_comb": self.b_comb, "W_q": self.W_q, "W_k": self.W_k, "W_v": self.W_v}
        if self.W_edge is not None:
            out["W_edge"] = self.W_edge
        return out

    def attention_params(self):
        return {"W_q": self.W_q, "W_k": self.W_k, "W_v": self.W_v}


def init_nt_params(rng, in_dim, h, heads=1, aggregator="mean", p=None, edge_dim=0, rf_seed=0, dtype=np.float64):
    if aggregator not in AGGREGATORS:
        raise ValueError(f"unknown aggregator {aggregator!r}")
    p = p or default_features(h)
    width = heads * h
    v_out = 2 * h if aggregator in DYNAMIC_AGGREGATORS else h

    def param(arr):
        return T.Tensor(np.asarray(arr, dtype=dtype), requires_grad=True)

    P = np.stack([make_random_features(h, p, rf_seed * 1000 + k).P for k in range(heads)]).astype(dtype)
    return NTParams(
        W_comb=param(xavier(rng, 2 * in_dim, width)),
        b_comb=param(np.zeros(width)),
        W_q=param(np.stack([xavier(rng, h, h) for _ in range(heads)])),
        W_k=param(np.stack([xavier(rng, h, h) for _ in range(heads)])),
        W_v=param(np.stack([xavier(rng, h, v_out) for _ in range(heads)])),
        P=P,
        aggregator=aggregator,
        W_edge=param(xavier(rng, edge_dim, width)) if edge_dim else None,
    )


# ---------------------------------------------------------------------------
# execution layout
# ---------------------------------------------------------------------------

@dataclass
class GroupLayout:
    attention: str
    slots: np.ndarray  # (G, D) edge ids, -1 on padding
    mask: np.ndarray  # (G, D)
    centres: np.ndarray  # (G,)


@dataclass
class ExchangeLayout:
    """Gather/scatter indices realizing a partition plan on one graph."""

    groups: list
    perm: np.ndarray  # edge id -> row in the concatenated group outputs
    num_edges: int

    @classmethod
    def build(cls, g, plan):
        check_plan(plan, degree_histogram(g))
        deg = g.degrees
        offsets = g.csr_offsets
        perm = np.full(g.num_edges, -1, dtype=np.int64)
        groups = []
        base = 0
        for grp in plan.groups:
            centres = np.flatnonzero((deg >= grp.min_size) & (deg <= grp.max_size))
            D = grp.max_size
            slot = np.arange(D)
            sizes = deg[centres]
            mask = slot[None, :] < sizes[:, None]
            slots = np.where(mask, offsets[centres][:, None] + slot[None, :], -1)
            flat = base + np.arange(centres.size * D).reshape(centres.size, D)
            perm[slots[mask]] = flat[mask]
            base += centres.size * D
            groups.append(GroupLayout(grp.attention, slots, mask, centres))
        if np.any(perm < 0):
            raise ValueError("plan does not cover every neighbourhood of the graph")
        return cls(groups, perm, g.num_edges)


def layout_for(g, plan=None, alpha=0.4, p=16, h=8, attention=None):
    """Convenience: plan ``g``'s histogram (if needed) and build the layout."""
    if plan is None:
        plan = make_plan(degree_histogram(g), alpha=alpha, p=p, h=h)
    if attention is not None:
        plan = plan.with_attention(attention)
    return ExchangeLayout.build(g, plan)


# ---------------------------------------------------------------------------
# the three stages
# ---------------------------------------------------------------------------

def combine(g, H, params, mode="full", edge_attrs=None):
    """Edge messages ``Z`` of shape ``(E, heads, h)``.

    ``ego_only`` reads only the central node, ``neighbour_only`` only the
    member. ``edge_attrs`` (``(E, d_e)``) are added through ``W_edge``
    when the layer has one.
    """
    if mode not in COMBINER_MODES:
        raise ValueError(f"unknown combiner mode {mode!r}")
    H = T.as_tensor(H)
    d = params.in_dim
    pre = None
    if mode in ("full", "ego_only"):
        pre = T.take_rows(H @ params.W_comb[:d], g.edge_src)
    if mode in ("full", "neighbour_only"):
        member = T.take_rows(H @ params.W_comb[d:], g.edge_dst)
        pre = member if pre is None else pre + member
    pre = pre + params.b_comb
    if params.W_edge is not None:
        attrs = g.edge_attrs if edge_attrs is None else edge_attrs
        if attrs is None:
            raise ValueError("layer expects edge attributes but the graph has none")
        pre = pre + T.as_tensor(attrs, pre) @ params.W_edge
    return F.gelu(pre).reshape(g.num_edges, params.heads, params.h)


def exchange(g, Z, layout, params, training=False, rng=None, dropout=0.0, stats=None):
    """Self-attention inside every neighbourhood; returns ``M`` ``(E, heads, h_v)``."""
    if layout.num_edges != g.num_edges:
        raise ValueError("layout was built for a different graph")
    heads, h = params.heads, params.h
    outs = []
    for grp in layout.groups:
        G, D = grp.slots.shape
        vals = T.take_rows(Z, grp.slots.reshape(-1)).reshape(G, D, heads, h)
        batch = PaddedBatch(T.transpose(vals, (0, 2, 1, 3)), grp.mask)
        out = grouped_attention(batch, grp.attention, params.attention_params(), rf=params.P, stats=stats).values
        hv = out.shape[-1]
        outs.append(T.transpose(out, (0, 2, 1, 3)).reshape(G * D, heads, hv))
    stacked = outs[0] if len(outs) == 1 else T.concat(outs, axis=0)
    M = F.gelu(T.take_rows(stacked, layout.perm))
    return F.dropout(M, dropout, rng, training)


def aggregate(g, M, aggregator, h=None):
    """Reduce edge messages onto their receiving node: ``(E, ..., w) -> (N, ..., w')``.

    Dynamic aggregators split the last axis into gates (first ``h``) and
    values (last ``h``); the gate of a message is the mean of its first
    half.
    """
    n = g.num_nodes
    recv = g.edge_dst
    if aggregator == "mean":
        return F.segment_mean(M, recv, n)
    if aggregator == "sum":
        return F.segment_sum(M, recv, n)
    if aggregator == "max":
        return F.segment_max(M, recv, n)
    if aggregator not in DYNAMIC_AGGREGATORS:
        raise ValueError(f"unknown aggregator {aggregator!r}")
    h = M.shape[-1] // 2 if h is None else h
    if M.shape[-1] != 2 * h:
        raise ValueError(f"dynamic aggregator expects width {2 * h}, got {M.shape[-1]}")
    gates = T.mean(M[..., :h], axis=-1)
    values = M[..., h:]
    if aggregator == "weighted_mean":
        weights = F.segment_softmax(gates, recv, n)
    else:
        weights = T.sigmoid(gates)
    return F.segment_sum(values * T.reshape(weights, weights.shape + (1,)), recv, n)


def nt_forward(g, H, params, plan=None, mode="full", layout=None, training=False, rng=None, dropout=0.0, stats=None):
    """One NT layer: ``(N, d_in) -> (N, heads * h)``, heads concatenated."""
    if layout is None:
        layout = layout_for(g, plan, p=params.P.shape[-1], h=params.h)
    Z = combine(g, H, params, mode)
    M = exchange(g, Z, layout, params, training=training, rng=rng, dropout=dropout, stats=stats)
    out = aggregate(g, M, params.aggregator, params.h)
    return out.reshape(g.num_nodes, params.out_dim)


def dir_nt_forward(g, H, params1, params2, plans=(None, None), mode="full", layouts=(None, None), g_rev=None, **kw):
    """Directed variant: NT on the graph plus a second NT on its reversal."""
    g_rev = transform(g, "reverse_edges") if g_rev is None else g_rev
    fwd = nt_forward(g, H, params1, plans[0], mode, layout=layouts[0], **kw)
    rev = nt_forward(g_rev, H, params2, plans[1], mode, layout=layouts[1], **kw)
    return fwd + rev


def mp_forward(g, X, combiner, aggregator="mean", phi="gelu", h=None):
    """Message passing: ``Z = phi(combiner(X))``, node ``i`` aggregates ``Z[j]`` over edges ``j -> i``.

    ``combiner`` is either a callable on Tensors or a ``(W, b)`` pair.
    ``phi`` is ``"gelu"`` or ``None`` (identity).
    """
    X = T.as_tensor(X)
    if callable(combiner):
        pre = combiner(X)
    else:
        W, b = combiner
        pre = F.linear(X, T.as_tensor(W, X), None if b is None else T.as_tensor(b, X))
    Z = F.gelu(pre) if phi == "gelu" else pre
    return aggregate(g, T.take_rows(Z, g.edge_src), aggregator, h)


@dataclass
class MPParams:
    W: T.Tensor
    b: T.Tensor
    aggregator: str = "mean"

    def tensors(self):
        return {"W": self.W, "b": self.b}


def init_mp_params(rng, in_dim, out_dim, aggregator="mean", dtype=np.float64):
    width = 2 * out_dim if aggregator in DYNAMIC_AGGREGATORS else out_dim
    return MPParams(
        T.Tensor(xavier(rng, in_dim, width).astype(dtype), requires_grad=True),
        T.Tensor(np.zeros(width, dtype=dtype), requires_grad=True),
        aggregator,
    )
