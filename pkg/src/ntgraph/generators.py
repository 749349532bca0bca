"""Synthetic graphs for desk-scale experiments."""

import networkx as nx
import numpy as np

from .graph import from_edges
from .rng import stream


def split_masks(n, rng, train=0.5, val=0.25):
    """Random disjoint train/val/test masks; test takes the remainder."""
    order = rng.permutation(n)
    n_train = int(round(train * n))
    n_val = int(round(val * n))
    masks = {name: np.zeros(n, dtype=bool) for name in ("train_mask", "val_mask", "test_mask")}
    masks["train_mask"][order[:n_train]] = True
    masks["val_mask"][order[n_train:n_train + n_val]] = True
    masks["test_mask"][order[n_train + n_val:]] = True
    return masks


def two_hop_majority(num_nodes, src, dst, attribute):
    """Majority of ``attribute`` over the length-2 walk endpoints of each node.

    The multiset for node ``i`` holds ``k`` for every walk ``i -> j -> k``
    with ``k != i``. Ties (and empty multisets) go to 0.
    """
    attribute = np.asarray(attribute, dtype=np.int64)
    ones = np.zeros(num_nodes, dtype=np.int64)
    total = np.zeros(num_nodes, dtype=np.int64)
    order = np.argsort(src, kind="stable")
    src, dst = src[order], dst[order]
    offsets = np.searchsorted(src, np.arange(num_nodes + 1))
    for i in range(num_nodes):
        for j in dst[offsets[i]:offsets[i + 1]]:
            ks = dst[offsets[j]:offsets[j + 1]]
            ks = ks[ks != i]
            ones[i] += int(attribute[ks].sum())
            total[i] += ks.size
    return (2 * ones > total).astype(np.int64)


def monophily_task(num_nodes=2000, degree=5, noise=0.3, feature_dim=4, seed=0, train=0.5, val=0.25):
    """Random regular graph whose labels are only visible two hops away.

    Every node carries a hidden binary attribute; its observable features
    are the signed attribute plus Gaussian noise in the first column and
    pure noise elsewhere. Labels are the 2-hop majority attribute (see
    :func:`two_hop_majority`).
    """
    if num_nodes < 2 or degree < 1 or degree >= num_nodes or (num_nodes * degree) % 2:
        raise ValueError("need num_nodes >= 2, 1 <= degree < num_nodes and num_nodes*degree even")
    if feature_dim < 1 or noise < 0:
        raise ValueError("feature_dim must be >= 1 and noise >= 0")
    rng = stream(seed, "monophily")
    nxg = nx.random_regular_graph(degree, num_nodes, seed=int(rng.integers(2**31)))
    edges = np.array(sorted(nxg.edges()), dtype=np.int64).reshape(-1, 2)
    attribute = rng.integers(0, 2, size=num_nodes)
    features = rng.normal(0.0, 1.0, size=(num_nodes, feature_dim))
    features[:, 0] = (2 * attribute - 1) + noise * features[:, 0]
    both_src = np.concatenate([edges[:, 0], edges[:, 1]])
    both_dst = np.concatenate([edges[:, 1], edges[:, 0]])
    labels = two_hop_majority(num_nodes, both_src, both_dst, attribute)
    masks = split_masks(num_nodes, rng, train, val)
    return from_edges(num_nodes, edges[:, 0], edges[:, 1], directed=False, features=features, labels=labels, **masks)


def truncated_zipf(rng, size, exponent, low, high):
    k = np.arange(low, high + 1, dtype=np.float64)
    p = k ** -exponent
    return rng.choice(k.astype(np.int64), size=size, p=p / p.sum())


def power_law(num_nodes=1000, exponent=2.5, min_degree=1, max_degree=None, num_classes=2, feature_dim=8, seed=0):
    """Configuration-model graph with a truncated-zipf degree sequence.

    Stubs are paired uniformly at random; self-loops are dropped and
    multi-edges collapsed, so realized degrees can fall slightly short.
    """
    if num_nodes < 2 or exponent <= 1 or min_degree < 1:
        raise ValueError("need num_nodes >= 2, exponent > 1, min_degree >= 1")
    if max_degree is None:
        max_degree = max(min_degree, min(num_nodes - 1, int(num_nodes ** 0.75)))
    if not min_degree <= max_degree < num_nodes:
        raise ValueError("need min_degree <= max_degree < num_nodes")
    rng = stream(seed, "power_law")
    deg = truncated_zipf(rng, num_nodes, exponent, min_degree, max_degree)
    if deg.sum() % 2:
        deg[int(np.argmin(deg))] += 1
    stubs = rng.permutation(np.repeat(np.arange(num_nodes), deg))
    src, dst = stubs[0::2], stubs[1::2]
    keep = src != dst
    labels = rng.integers(0, num_classes, size=num_nodes)
    features = rng.normal(size=(num_nodes, feature_dim))
    masks = split_masks(num_nodes, rng)
    return from_edges(num_nodes, src[keep], dst[keep], directed=False, features=features, labels=labels, **masks)


def grid(rows=10, cols=10, mine_rate=0.2, hide_rate=0.5, seed=0):
    """Minesweeper-like 8-neighbour lattice.

    Labels are Bernoulli(mine_rate) mines. Features: one-hot count of
    neighbouring mines (9 columns) plus an "unknown" flag; a ``hide_rate``
    share of nodes have the count hidden.
    """
    if rows < 2 or cols < 2 or not 0 <= mine_rate <= 1 or not 0 <= hide_rate <= 1:
        raise ValueError("need rows, cols >= 2 and rates in [0, 1]")
    rng = stream(seed, "grid")
    n = rows * cols
    r, c = np.divmod(np.arange(n), cols)
    src, dst = [], []
    for dr in (-1, 0, 1):
        for dc in (-1, 0, 1):
            if dr == 0 and dc == 0:
                continue
            rr, cc = r + dr, c + dc
            ok = (rr >= 0) & (rr < rows) & (cc >= 0) & (cc < cols)
            src.append(np.arange(n)[ok])
            dst.append((rr * cols + cc)[ok])
    src, dst = np.concatenate(src), np.concatenate(dst)
    mines = (rng.random(n) < mine_rate).astype(np.int64)
    count = np.zeros(n, dtype=np.int64)
    np.add.at(count, src, mines[dst])
    hidden = rng.random(n) < hide_rate
    features = np.zeros((n, 10))
    features[np.arange(n), count] = 1.0
    features[hidden, :9] = 0.0
    features[hidden, 9] = 1.0
    masks = split_masks(n, rng)
    return from_edges(n, src, dst, directed=True, features=features, labels=mines, **masks).replace(directed=False)


GENERATORS = {"monophily_task": monophily_task, "power_law": power_law, "grid": grid}


def generate(kind, seed=0, **params):
    try:
        fn = GENERATORS[kind]
    except KeyError:
        raise ValueError(f"unknown generator {kind!r}; choose from {sorted(GENERATORS)}") from None
    return fn(seed=seed, **params)
