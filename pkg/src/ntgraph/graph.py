"""Graph container (CSR), structural transforms and degree statistics.

Row ``i`` of the CSR lists the neighbourhood ``N(i)``. On directed graphs an
entry ``k`` in row ``j`` is the edge ``j -> k``; messages flow from the row
node to the listed node.
"""

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import BoundsError, ShapeError

UNLABELED = -1


def _frozen(arr, dtype):
    if arr is None:
        return None
    out = np.array(arr, dtype=dtype, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class Graph:
    num_nodes: int
    csr_offsets: np.ndarray
    csr_indices: np.ndarray
    directed: bool = False
    features: np.ndarray = None
    labels: np.ndarray = None
    train_mask: np.ndarray = None
    val_mask: np.ndarray = None
    test_mask: np.ndarray = None
    edge_attrs: np.ndarray = None

    def __post_init__(self):
        n = int(self.num_nodes)
        object.__setattr__(self, "num_nodes", n)
        offsets = _frozen(self.csr_offsets, np.int64)
        indices = _frozen(self.csr_indices, np.int64)
        object.__setattr__(self, "csr_offsets", offsets)
        object.__setattr__(self, "csr_indices", indices)
        if offsets.shape != (n + 1,) or offsets[0] != 0 or np.any(np.diff(offsets) < 0):
            raise ShapeError("csr_offsets must be non-decreasing, start at 0, and have num_nodes+1 entries")
        if offsets[-1] != indices.shape[0]:
            raise ShapeError("csr_offsets[-1] must equal the number of edges")
        if indices.size and (indices.min() < 0 or indices.max() >= n):
            raise BoundsError("csr_indices out of range")

        features = self.features
        if features is None:
            features = np.zeros((n, 0))
        features = _frozen(features, np.float64)
        if features.ndim != 2 or features.shape[0] != n:
            raise ShapeError(f"features must be ({n}, d), got {features.shape}")
        object.__setattr__(self, "features", features)

        labels = self.labels
        if labels is None:
            labels = np.full(n, UNLABELED)
        labels = _frozen(labels, np.int64)
        if labels.shape != (n,):
            raise ShapeError(f"labels must have shape ({n},)")
        object.__setattr__(self, "labels", labels)

        for name in ("train_mask", "val_mask", "test_mask"):
            m = getattr(self, name)
            m = np.zeros(n, dtype=bool) if m is None else m
            m = _frozen(m, bool)
            if m.shape != (n,):
                raise ShapeError(f"{name} must have shape ({n},)")
            object.__setattr__(self, name, m)
        if np.any(self.train_mask & self.val_mask) or np.any(self.train_mask & self.test_mask) or np.any(
            self.val_mask & self.test_mask
        ):
            raise ValueError("train/val/test masks must be disjoint")

        if self.edge_attrs is not None:
            attrs = _frozen(self.edge_attrs, np.float64)
            if attrs.ndim != 2 or attrs.shape[0] != indices.shape[0]:
                raise ShapeError("edge_attrs must be (num_edges, d_e)")
            object.__setattr__(self, "edge_attrs", attrs)

        if not self.directed and not _is_symmetric(n, offsets, indices):
            raise ValueError("undirected graph must have a symmetric edge relation")

    # ------------------------------------------------------------------
    @property
    def num_edges(self):
        return int(self.csr_indices.shape[0])

    @property
    def degrees(self):
        """Neighbourhood sizes (out-degree, row lengths)."""
        return np.diff(self.csr_offsets)

    @property
    def in_degrees(self):
        return np.bincount(self.csr_indices, minlength=self.num_nodes)

    @property
    def edge_src(self):
        """Row (central) node of every CSR entry."""
        return np.repeat(np.arange(self.num_nodes), self.degrees)

    @property
    def edge_dst(self):
        return self.csr_indices

    def neighbours(self, i):
        return self.csr_indices[self.csr_offsets[i]:self.csr_offsets[i + 1]]

    def edges(self):
        return np.stack([self.edge_src, self.edge_dst], axis=1)

    def replace(self, **changes):
        fields = {f: getattr(self, f) for f in self.__dataclass_fields__}
        fields.update(changes)
        return Graph(**fields)

    def same_structure(self, other):
        return (
            self.num_nodes == other.num_nodes
            and np.array_equal(self.csr_offsets, other.csr_offsets)
            and np.array_equal(self.csr_indices, other.csr_indices)
        )


def _is_symmetric(n, offsets, indices):
    src = np.repeat(np.arange(n), np.diff(offsets))
    fwd = src * n + indices
    rev = indices * n + src
    return np.array_equal(np.sort(fwd), np.sort(rev))


def from_edges(num_nodes, src, dst, directed=False, edge_attrs=None, **fields):
    """Build a Graph from edge arrays.

    Duplicate edges collapse to one (the first occurrence keeps its
    attributes). When ``directed`` is false, the reverse of every edge is
    added.
    """
    src = np.asarray(src, dtype=np.int64).reshape(-1)
    dst = np.asarray(dst, dtype=np.int64).reshape(-1)
    if src.shape != dst.shape:
        raise ShapeError("src and dst must have equal length")
    n = int(num_nodes)
    if src.size and (min(src.min(), dst.min()) < 0 or max(src.max(), dst.max()) >= n):
        raise BoundsError(f"edge endpoint out of range for {n} nodes")
    attrs = None if edge_attrs is None else np.asarray(edge_attrs, dtype=np.float64)
    if attrs is not None and attrs.shape[0] != src.shape[0]:
        raise ShapeError("edge_attrs must have one row per edge")
    if not directed:
        # keep given orientation first so its attributes win on collisions
        src, dst = np.concatenate([src, dst]), np.concatenate([dst, src])
        if attrs is not None:
            attrs = np.concatenate([attrs, attrs])
    key = src * n + dst
    _, first = np.unique(key, return_index=True)
    first = np.sort(first)
    src, dst = src[first], dst[first]
    if attrs is not None:
        attrs = attrs[first]
    order = np.lexsort((dst, src))
    src, dst = src[order], dst[order]
    if attrs is not None:
        attrs = attrs[order]
    offsets = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(src, minlength=n), out=offsets[1:])
    return Graph(n, offsets, dst, directed=directed, edge_attrs=attrs, **fields)


def _node_fields(g):
    return dict(
        features=g.features,
        labels=g.labels,
        train_mask=g.train_mask,
        val_mask=g.val_mask,
        test_mask=g.test_mask,
    )


def transform(g, op):
    """Return a new graph with ``op`` applied.

    ``add_self_loops`` inserts ``(i, i)`` where missing, ``reverse_edges``
    transposes the relation (edge attributes follow their edge),
    ``symmetrize`` unions the relation with its transpose.
    """
    src, dst = g.edge_src, g.edge_dst
    attrs = g.edge_attrs
    if op == "add_self_loops":
        has_loop = np.zeros(g.num_nodes, dtype=bool)
        has_loop[src[src == dst]] = True
        missing = np.flatnonzero(~has_loop)
        new_src = np.concatenate([src, missing])
        new_dst = np.concatenate([dst, missing])
        if attrs is not None:
            attrs = np.concatenate([attrs, np.zeros((missing.size, attrs.shape[1]))])
        return from_edges(g.num_nodes, new_src, new_dst, directed=True, edge_attrs=attrs, **_node_fields(g)).replace(
            directed=g.directed
        )
    if op == "reverse_edges":
        return from_edges(g.num_nodes, dst, src, directed=True, edge_attrs=attrs, **_node_fields(g)).replace(
            directed=g.directed
        )
    if op == "symmetrize":
        new_src = np.concatenate([src, dst])
        new_dst = np.concatenate([dst, src])
        if attrs is not None:
            attrs = np.concatenate([attrs, attrs])
        return from_edges(g.num_nodes, new_src, new_dst, directed=True, edge_attrs=attrs, **_node_fields(g)).replace(
            directed=False
        )
    raise ValueError(f"unknown transform {op!r}")


@dataclass(frozen=True)
class DegreeHistogram:
    """Buckets ``(size, count)`` with strictly decreasing sizes."""

    buckets: tuple
    zero_degree: int = 0

    def __post_init__(self):
        buckets = tuple((int(n), int(c)) for n, c in self.buckets)
        object.__setattr__(self, "buckets", buckets)
        sizes = [n for n, _ in buckets]
        if any(a <= b for a, b in zip(sizes, sizes[1:])):
            raise ValueError("bucket sizes must be strictly decreasing")
        if any(c < 1 for _, c in buckets) or any(n < 1 for n in sizes):
            raise ValueError("bucket sizes and counts must be >= 1")

    @property
    def total(self):
        return sum(c for _, c in self.buckets)

    @property
    def sizes(self):
        return [n for n, _ in self.buckets]

    @property
    def counts(self):
        return [c for _, c in self.buckets]

    def __len__(self):
        return len(self.buckets)

    def true_slots(self):
        return sum(n * c for n, c in self.buckets)

    @classmethod
    def from_sizes(cls, sizes):
        sizes = np.asarray(sizes, dtype=np.int64)
        zero = int(np.sum(sizes == 0))
        vals, counts = np.unique(sizes[sizes > 0], return_counts=True)
        return cls(tuple(zip(vals[::-1].tolist(), counts[::-1].tolist())), zero)

    @classmethod
    def parse(cls, spec):
        """Parse ``"size:count,size:count,..."``."""
        buckets = []
        for part in spec.split(","):
            part = part.strip()
            if not part:
                continue
            try:
                n, c = part.split(":")
                buckets.append((int(n), int(c)))
            except ValueError:
                raise ValueError(f"bad histogram entry {part!r}; expected size:count") from None
        buckets.sort(key=lambda b: -b[0])
        return cls(tuple(buckets))

    def to_spec(self):
        return ",".join(f"{n}:{c}" for n, c in self.buckets)


def degree_histogram(g, side="out"):
    if side == "out":
        deg = g.degrees
    elif side == "in":
        deg = g.in_degrees
    else:
        raise ValueError("side must be 'out' or 'in'")
    return DegreeHistogram.from_sizes(deg)


def size_discrepancy(g, train_mask, bins=100):
    """Histogram distance between mean neighbourhood sizes of train and rest.

    Each node gets ``s_i = sum_{j in N(i)} deg(j) / deg(i)``; both
    populations are binned over their joint range and the L1 distance of
    the two bin-probability vectors is returned (a value in [0, 2]).
    """
    train_mask = np.asarray(train_mask, dtype=bool)
    if train_mask.shape != (g.num_nodes,):
        raise ShapeError("train_mask must have one entry per node")
    rest_mask = ~train_mask
    if not train_mask.any() or not rest_mask.any():
        raise ValueError("both the train set and its complement must be non-empty")
    deg = g.degrees.astype(np.float64)
    two_hop = np.zeros(g.num_nodes)
    np.add.at(two_hop, g.edge_src, deg[g.edge_dst])
    ok = deg > 0
    skipped = int(np.sum(~ok))
    if skipped:
        warnings.warn(f"size_discrepancy: skipped {skipped} zero-degree nodes", stacklevel=2)
    s = np.divide(two_hop, deg, out=np.zeros_like(two_hop), where=ok)
    a = s[train_mask & ok]
    b = s[rest_mask & ok]
    if a.size == 0 or b.size == 0:
        raise ValueError("no non-isolated nodes left in one of the populations")
    lo = min(a.min(), b.min())
    hi = max(a.max(), b.max())
    if hi <= lo:
        return 0.0
    edges = np.linspace(lo, hi, bins + 1)
    p, _ = np.histogram(a, bins=edges)
    q, _ = np.histogram(b, bins=edges)
    return float(np.abs(p / a.size - q / b.size).sum())
