"""Neighbourhood partitioning: split by size, then recursively by area.

Histogram buckets are addressed 1-based, ``1..l``, in decreasing size order.
The area of a contiguous bucket range ``[i, j]`` is the number of
neighbourhoods in it times the largest size, ``n_i``.
"""

import heapq
import itertools
import json
from dataclasses import dataclass, replace

import numpy as np

from .attention import switch_threshold

DEFAULT_ALPHA = 0.4


def _prefix_counts(hist):
    return list(itertools.accumulate(hist.counts, initial=0))


def area(hist, i, j):
    """``(a_j - a_i + c_i) * n_i`` with ``a_i`` the running count (1-based)."""
    if not 1 <= i <= j <= len(hist):
        raise ValueError(f"need 1 <= i <= j <= {len(hist)}, got ({i}, {j})")
    a = _prefix_counts(hist)
    n_i, c_i = hist.buckets[i - 1]
    return (a[j] - a[i] + c_i) * n_i


def optimal_split(hist, i, j):
    """Best bucket boundary for splitting ``[i, j]`` into ``[i, t]`` and ``[t+1, j]``.

    Returns ``(t, s1, s2)`` minimizing ``max(s1, s2)``; the smallest ``t``
    wins ties.
    """
    if not 1 <= i < j <= len(hist):
        raise ValueError(f"optimal_split needs 1 <= i < j <= {len(hist)}, got ({i}, {j})")
    a = _prefix_counts(hist)
    sizes = hist.sizes
    best = None
    for t in range(i, j):
        s1 = (a[t] - a[i - 1]) * sizes[i - 1]
        s2 = (a[j] - a[t]) * sizes[t]
        if best is None or max(s1, s2) < max(best[1], best[2]):
            best = (t, s1, s2)
    return best


def best_contiguous_split(hist):
    """Best split of the size-sorted neighbourhood sequence into a prefix and suffix.

    The cut may fall inside a bucket. Returns ``(value, prefix_count)``
    where ``value = max(area(prefix), area(suffix))``.
    """
    total = hist.total
    if total < 2:
        raise ValueError("need at least two neighbourhoods to split")
    top = hist.sizes[0]
    best = None
    seen = 0
    for n, c in hist.buckets:
        # the suffix starts inside this bucket for cuts m in (seen, seen + c]
        for m in range(max(seen, 1), seen + c):
            value = max(m * top, (total - m) * n)
            if best is None or value < best[0]:
                best = (value, m)
        seen += c
    return best


MAX_ENUMERATION = 4_000_000


def brute_force_plan(hist, max_buckets=12):
    """Exhaustive min-max bipartition of the neighbourhoods of ``hist``.

    Neighbourhoods of equal size are interchangeable, so a bipartition is
    fixed by how many of each bucket go to the first group. Every such
    vector is enumerated (both groups non-empty when there are at least two
    neighbourhoods). Returns ``min max(area(A), area(B))``.
    """
    l = len(hist)
    if l == 0:
        raise ValueError("empty histogram")
    if l > max_buckets:
        raise ValueError(f"too many buckets for exhaustive search ({l} > {max_buckets})")
    counts = np.array(hist.counts, dtype=np.int64)
    sizes = np.array(hist.sizes, dtype=np.int64)
    combos = int(np.prod(counts + 1))
    if combos > MAX_ENUMERATION:
        raise ValueError(f"{combos} bipartitions exceed the enumeration budget")
    if hist.total == 1:
        return int(sizes[0])
    grids = np.indices(tuple(counts + 1)).reshape(l, -1).T
    rest = counts - grids

    def group_area(k):
        cnt = k.sum(axis=1)
        nonzero = k > 0
        # sizes decrease, so the first non-zero bucket carries the max size
        first = np.argmax(nonzero, axis=1)
        return np.where(cnt > 0, cnt * sizes[first], 0)

    a, b = group_area(grids), group_area(rest)
    proper = (grids.sum(axis=1) > 0) & (rest.sum(axis=1) > 0)
    return int(np.maximum(a, b)[proper].min())


@dataclass(frozen=True)
class PlanGroup:
    bucket_lo: int
    bucket_hi: int
    min_size: int
    max_size: int
    count: int
    area: int
    attention: str

    def to_dict(self):
        return {
            "min_size": self.min_size,
            "max_size": self.max_size,
            "count": self.count,
            "area": self.area,
            "attention": self.attention,
            "buckets": [self.bucket_lo, self.bucket_hi],
        }


@dataclass(frozen=True)
class PartitionPlan:
    groups: tuple
    alpha: float
    threshold: float
    p: int
    h: int

    @property
    def peak_area(self):
        return max((g.area for g in self.groups), default=0)

    @property
    def total_area(self):
        return sum(g.area for g in self.groups)

    def to_dict(self):
        return {
            "alpha": self.alpha,
            "p": self.p,
            "h": self.h,
            "threshold": self.threshold,
            "groups": [g.to_dict() for g in self.groups],
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2) + "\n"

    @classmethod
    def from_dict(cls, doc):
        groups = []
        for g in doc["groups"]:
            lo, hi = g.get("buckets", (None, None))
            groups.append(
                PlanGroup(lo, hi, int(g["min_size"]), int(g["max_size"]), int(g["count"]), int(g["area"]), g["attention"])
            )
        return cls(tuple(groups), float(doc["alpha"]), float(doc["threshold"]), int(doc["p"]), int(doc["h"]))

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))

    def with_attention(self, kind):
        """Same grouping with every group forced to one kernel."""
        if kind not in ("exact", "linear"):
            raise ValueError(f"unknown attention kind {kind!r}")
        return replace(self, groups=tuple(replace(g, attention=kind) for g in self.groups))


def _make_group(hist, i, j, threshold):
    n_i = hist.sizes[i - 1]
    return PlanGroup(
        bucket_lo=i,
        bucket_hi=j,
        min_size=hist.sizes[j - 1],
        max_size=n_i,
        count=sum(hist.counts[i - 1:j]),
        area=area(hist, i, j),
        attention="linear" if n_i > threshold else "exact",
    )


def _partition_range(hist, lo, hi, alpha, mode):
    """Area-driven recursive bisection of buckets ``[lo, hi]``.

    ``mode="faithful"`` stops at the first atomic or refused group;
    ``mode="continue"`` sets such groups aside and keeps going.
    """
    heap = [(-area(hist, lo, hi), lo, hi)]
    done = []
    while heap:
        neg_s, i, j = heapq.heappop(heap)
        s = -neg_s
        if i == j:
            done.append((i, j))
            if mode == "faithful":
                break
            continue
        t, s1, s2 = optimal_split(hist, i, j)
        if max(s1, s2) >= alpha * s:
            done.append((i, j))
            if mode == "faithful":
                break
            continue
        heapq.heappush(heap, (-s1, i, t))
        heapq.heappush(heap, (-s2, t + 1, j))
    done.extend((i, j) for _, i, j in heap)
    return done


def plan(hist, alpha=DEFAULT_ALPHA, p=16, h=8, mode="faithful"):
    """Build a :class:`PartitionPlan` for ``hist``.

    Buckets are first cut at the switch threshold into a linear-attention
    prefix and an exact-attention suffix; each part is then bisected by
    area until a split fails to bring the larger half below ``alpha``
    times the group's area.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    if mode not in ("faithful", "continue"):
        raise ValueError("mode must be 'faithful' or 'continue'")
    threshold = switch_threshold(p, h)
    l = len(hist)
    if l == 0:
        return PartitionPlan((), alpha, threshold, p, h)
    n_linear = sum(1 for n in hist.sizes if n > threshold)
    ranges = []
    if n_linear:
        ranges += _partition_range(hist, 1, n_linear, alpha, mode)
    if n_linear < l:
        ranges += _partition_range(hist, n_linear + 1, l, alpha, mode)
    groups = tuple(_make_group(hist, i, j, threshold) for i, j in sorted(ranges))
    return PartitionPlan(groups, alpha, threshold, p, h)


def single_group_plan(hist, p=16, h=8, attention=None):
    """Everything in one padded group (no size or area partitioning)."""
    threshold = switch_threshold(p, h)
    if len(hist) == 0:
        return PartitionPlan((), 0.0, threshold, p, h)
    g = _make_group(hist, 1, len(hist), threshold)
    if attention is not None:
        g = replace(g, attention=attention)
    return PartitionPlan((g,), 0.0, threshold, p, h)


def size_split_plan(hist, p=16, h=8):
    """Size threshold only: one linear group and one exact group."""
    return plan(hist, alpha=1e-12, p=p, h=h)


def atomic_plan(hist, p=16, h=8):
    """One group per bucket (sequential processing)."""
    threshold = switch_threshold(p, h)
    groups = tuple(_make_group(hist, i, i, threshold) for i in range(1, len(hist) + 1))
    return PartitionPlan(groups, 1.0, threshold, p, h)


def check_plan(plan_, hist):
    """Raise ValueError unless ``plan_`` covers ``hist`` exactly."""
    sizes = hist.sizes
    expected = 1
    for g in plan_.groups:
        lo, hi = g.bucket_lo, g.bucket_hi
        if lo is None:
            try:
                lo = sizes.index(g.max_size) + 1
                hi = sizes.index(g.min_size) + 1
            except ValueError:
                raise ValueError(f"plan group sizes [{g.min_size}, {g.max_size}] not in histogram") from None
        if lo != expected or hi < lo or hi > len(hist):
            raise ValueError("plan groups are not contiguous, disjoint and covering")
        if g.max_size != sizes[lo - 1] or g.min_size != sizes[hi - 1]:
            raise ValueError("plan group sizes disagree with histogram")
        if g.count != sum(hist.counts[lo - 1:hi]) or g.area != area(hist, lo, hi):
            raise ValueError("plan group count/area disagree with histogram")
        expected = hi + 1
    if expected != len(hist) + 1:
        raise ValueError("plan does not cover every bucket")


def plan_stats(plan_, hist):
    check_plan(plan_, hist)
    total = plan_.total_area
    return {
        "peak_area": plan_.peak_area,
        "total_area": total,
        "padded_waste": total - hist.true_slots(),
        "group_count": len(plan_.groups),
    }

