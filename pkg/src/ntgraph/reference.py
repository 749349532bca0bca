"""Straight-line numpy re-statements of the NT layer, used as test oracles.

Nothing here touches the autodiff engine, the padded batches or the
planner: every neighbourhood and every node is handled in a plain loop.
"""

import math

import numpy as np
from scipy.special import erf

from .attention import DEN_FLOOR, EXP_CLAMP


def gelu(x):
    return 0.5 * x * (1.0 + erf(x / math.sqrt(2.0)))


def sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def softmax_attention(Q, K, V):
    s = Q @ K.T / math.sqrt(Q.shape[-1])
    w = np.exp(s - s.max(axis=1, keepdims=True))
    return (w / w.sum(axis=1, keepdims=True)) @ V


def performer_attention(Q, K, V, P):
    h = Q.shape[-1]
    q = np.exp(np.clip(Q @ P / math.sqrt(h), -EXP_CLAMP, EXP_CLAMP))
    k = np.exp(np.clip(K @ P - 0.5 * np.sum(K * K, axis=1, keepdims=True), -EXP_CLAMP, EXP_CLAMP))
    den = np.maximum(q @ k.sum(axis=0), DEN_FLOOR)
    return (q @ (k.T @ V)) / den[:, None]


def _np(x):
    return np.asarray(getattr(x, "data", x), dtype=np.float64)


def combine_loop(g, H, params, mode="full"):
    """The combine stage one edge at a time: returns ``(E, heads, h)``."""
    H = _np(H)
    W, b = _np(params.W_comb), _np(params.b_comb)
    d = H.shape[1]
    out = np.zeros((g.num_edges, params.heads, params.h))
    for e, (j, k) in enumerate(g.edges()):
        pre = b.copy()
        if mode in ("full", "ego_only"):
            pre = pre + H[j] @ W[:d]
        if mode in ("full", "neighbour_only"):
            pre = pre + H[k] @ W[d:]
        out[e] = gelu(pre).reshape(params.heads, params.h)
    return out


def exchange_loop(g, Z, params, kind):
    """The exchange stage for every neighbourhood separately; ``kind`` is one kernel for all."""
    Z = _np(Z)
    Wq, Wk, Wv, P = (_np(params.W_q), _np(params.W_k), _np(params.W_v), _np(params.P))
    out = np.zeros((g.num_edges, params.heads, Wv.shape[-1]))
    off = g.csr_offsets
    for j in range(g.num_nodes):
        lo, hi = off[j], off[j + 1]
        if lo == hi:
            continue
        for a in range(params.heads):
            x = Z[lo:hi, a]
            Q, K, V = x @ Wq[a], x @ Wk[a], x @ Wv[a]
            if kind == "exact":
                att = softmax_attention(Q, K, V)
            else:
                att = performer_attention(Q, K, V, P[a])
            out[lo:hi, a] = gelu(att)
    return out


def aggregate_loop(g, M, aggregator, h=None):
    """The aggregate stage and its dynamic forms, node by node over incoming messages."""
    M = _np(M)
    recv = g.edge_dst
    width = M.shape[-1]
    if aggregator in ("weighted_mean", "gated_sum"):
        h = width // 2 if h is None else h
        width = h
    out = np.zeros((g.num_nodes,) + M.shape[1:-1] + (width,))
    for i in range(g.num_nodes):
        rows = M[recv == i]
        if len(rows) == 0:
            continue
        if aggregator == "mean":
            out[i] = rows.sum(axis=0) / len(rows)
        elif aggregator == "sum":
            out[i] = rows.sum(axis=0)
        elif aggregator == "max":
            out[i] = rows.max(axis=0)
        else:
            gates = rows[..., :h].sum(axis=-1) / h
            if aggregator == "gated_sum":
                weights = sigmoid(gates)
            else:
                e = np.exp(gates - gates.max(axis=0))
                weights = e / e.sum(axis=0)
            total = np.zeros_like(out[i])
            for w, r in zip(weights, rows):
                total = total + w[..., None] * r[..., h:]
            out[i] = total
    return out


def nt_loop(g, H, params, kind="exact", mode="full"):
    """Whole NT layer without batching: ``(N, heads * width)``."""
    M = exchange_loop(g, combine_loop(g, H, params, mode), params, kind)
    out = aggregate_loop(g, M, params.aggregator, params.h)
    return out.reshape(g.num_nodes, -1)


def ego_only_composite(g, H, params):
    """Ego-only NT as plain message passing.

    Every node ``j`` sends ``phi(phi(Combiner(H_j)) W_v)`` along each of its
    edges; receivers aggregate as usual.
    """
    H = _np(H)
    d = H.shape[1]
    W, b = _np(params.W_comb), _np(params.b_comb)
    Wv = _np(params.W_v)
    node_msg = np.zeros((g.num_nodes, params.heads, Wv.shape[-1]))
    for j in range(g.num_nodes):
        z = gelu(H[j] @ W[:d] + b).reshape(params.heads, params.h)
        for a in range(params.heads):
            node_msg[j, a] = gelu(z[a] @ Wv[a])
    out = aggregate_loop(g, node_msg[g.edge_src], params.aggregator, params.h)
    return out.reshape(g.num_nodes, -1)


def neighbour_only_two_layer(g, H, params):
    """Neighbour-only NT with linear attention as a two-layer MP network.

    Layer 1 sends ``(K_hat_k, V_k)`` from every member and each centre ``j``
    sums ``K_hat_k V_k^T`` and ``K_hat_k``. Layer 2 sends those sums to the
    members, which normalize them against their own query features and
    aggregate.
    """
    H = _np(H)
    d = H.shape[1]
    W, b = _np(params.W_comb), _np(params.b_comb)
    Wq, Wk, Wv, P = (_np(params.W_q), _np(params.W_k), _np(params.W_v), _np(params.P))
    heads, h = params.heads, params.h
    x = gelu(H @ W[d:] + b).reshape(g.num_nodes, heads, h)
    n = g.num_nodes
    p = P.shape[-1]
    hv = Wv.shape[-1]
    q_hat = np.zeros((n, heads, p))
    k_hat = np.zeros((n, heads, p))
    v = np.zeros((n, heads, hv))
    for a in range(heads):
        K = x[:, a] @ Wk[a]
        q_hat[:, a] = np.exp(np.clip(x[:, a] @ Wq[a] @ P[a] / math.sqrt(h), -EXP_CLAMP, EXP_CLAMP))
        k_hat[:, a] = np.exp(np.clip(K @ P[a] - 0.5 * np.sum(K * K, axis=1, keepdims=True), -EXP_CLAMP, EXP_CLAMP))
        v[:, a] = x[:, a] @ Wv[a]
    # layer 1: centre j collects from its members
    Kv = np.zeros((n, heads, p, hv))
    K1 = np.zeros((n, heads, p))
    for j, k in g.edges():
        Kv[j] += k_hat[k][:, :, None] * v[k][:, None, :]
        K1[j] += k_hat[k]
    # layer 2: member i reads every neighbourhood it belongs to
    msgs = np.zeros((g.num_edges, heads, hv))
    for e, (j, i) in enumerate(g.edges()):
        for a in range(heads):
            den = max(q_hat[i, a] @ K1[j, a], DEN_FLOOR)
            msgs[e, a] = gelu(q_hat[i, a] @ Kv[j, a] / den)
    return aggregate_loop(g, msgs, params.aggregator, h).reshape(n, -1)
