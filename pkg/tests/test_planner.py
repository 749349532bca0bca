import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ntgraph.attention import switch_threshold
from ntgraph.graph import DegreeHistogram
from ntgraph.planner import (
    PartitionPlan,
    area,
    atomic_plan,
    best_contiguous_split,
    brute_force_plan,
    check_plan,
    optimal_split,
    plan,
    plan_stats,
    single_group_plan,
    size_split_plan,
)

HIST = DegreeHistogram(((5, 2), (3, 4), (1, 10)))


def histograms(max_buckets=8, max_size=60, max_count=6):
    return st.lists(st.tuples(st.integers(1, max_size), st.integers(1, max_count)), min_size=1,
                    max_size=max_buckets, unique_by=lambda b: b[0]).map(
        lambda bs: DegreeHistogram(tuple(sorted(bs, reverse=True))))


def neighbourhood_bipartitions(hist):
    """Every split of the individual neighbourhoods into two non-empty groups (tiny inputs only)."""
    sizes = [n for n, c in hist.buckets for _ in range(c)]
    best = None
    for mask in itertools.product((0, 1), repeat=len(sizes)):
        a = [s for s, m in zip(sizes, mask) if m]
        b = [s for s, m in zip(sizes, mask) if not m]
        if not a or not b:
            continue
        value = max(len(a) * max(a), len(b) * max(b))
        best = value if best is None else min(best, value)
    return best


class TestArea:
    def test_hand_values(self):
        assert area(HIST, 1, 3) == 80
        assert area(HIST, 3, 3) == 10
        assert area(HIST, 2, 3) == 42

    def test_index_order(self):
        with pytest.raises(ValueError):
            area(HIST, 3, 2)
        with pytest.raises(ValueError):
            area(HIST, 0, 2)

    @given(histograms())
    @settings(max_examples=80, deadline=None)
    def test_area_is_count_times_max(self, hist):
        for i in range(1, len(hist) + 1):
            for j in range(i, len(hist) + 1):
                assert area(hist, i, j) == sum(hist.counts[i - 1:j]) * hist.sizes[i - 1]


class TestSplit:
    def test_trace(self):
        assert optimal_split(HIST, 1, 3) == (2, 30, 10)

    def test_equal_buckets(self):
        assert optimal_split(DegreeHistogram(((4, 3), (2, 6))), 1, 2) == (1, 12, 12)

    def test_atomic_range(self):
        with pytest.raises(ValueError):
            optimal_split(HIST, 2, 2)

    def test_tie_goes_to_smallest_t(self):
        # t=1: max(2*6, 6*5) = 30; t=2: max(5*6, 3*4) = 30
        hist = DegreeHistogram(((6, 2), (5, 3), (4, 3)))
        assert optimal_split(hist, 1, 3) == (1, 12, 30)

    @given(histograms())
    @settings(max_examples=80, deadline=None)
    def test_matches_scan_by_definition(self, hist):
        l = len(hist)
        if l < 2:
            return
        t, s1, s2 = optimal_split(hist, 1, l)
        values = [max(area(hist, 1, u), area(hist, u + 1, l)) for u in range(1, l)]
        assert max(s1, s2) == min(values)
        assert t == 1 + values.index(min(values))


class TestBruteForce:
    def test_trace_value(self):
        assert brute_force_plan(HIST) == 30

    def test_single_bucket(self):
        # four size-3 neighbourhoods: best split 2 + 2
        assert brute_force_plan(DegreeHistogram(((3, 4),))) == 6
        assert brute_force_plan(DegreeHistogram(((3, 1),))) == 3

    def test_too_many_buckets(self):
        hist = DegreeHistogram(tuple((n, 1) for n in range(20, 0, -1)))
        with pytest.raises(ValueError):
            brute_force_plan(hist)

    @given(histograms(max_buckets=4, max_size=9, max_count=3))
    @settings(max_examples=80, deadline=None)
    def test_matches_neighbourhood_enumeration(self, hist):
        if hist.total < 2:
            return
        assert brute_force_plan(hist) == neighbourhood_bipartitions(hist)

    @given(histograms())
    @settings(max_examples=150, deadline=None)
    def test_contiguous_split_is_optimal(self, hist):
        if hist.total < 2:
            return
        assert best_contiguous_split(hist)[0] == brute_force_plan(hist)
        if len(hist) >= 2:
            _, s1, s2 = optimal_split(hist, 1, len(hist))
            assert max(s1, s2) >= brute_force_plan(hist)


def trace_reference(hist, lo, hi, alpha):
    """Plain restatement of the area loop: largest group first, stop at the first refusal."""
    groups = [(lo, hi)]
    while True:
        i, j = max(groups, key=lambda g: (area(hist, *g), -g[0]))
        if i == j:
            return groups
        best = None
        for t in range(i, j):
            v = max(area(hist, i, t), area(hist, t + 1, j))
            if best is None or v < best[0]:
                best = (v, t)
        if best[0] >= alpha * area(hist, i, j):
            return groups
        groups.remove((i, j))
        groups += [(i, best[1]), (best[1] + 1, j)]


class TestPlan:
    def test_worked_trace(self):
        pl = plan(HIST, alpha=0.4, p=16, h=8)
        assert [(g.bucket_lo, g.bucket_hi, g.area) for g in pl.groups] == [(1, 2, 30), (3, 3, 10)]
        assert all(g.attention == "exact" for g in pl.groups)
        assert plan_stats(pl, HIST) == {"peak_area": 30, "total_area": 40, "padded_waste": 8, "group_count": 2}

    def test_single_bucket_is_atomic(self):
        pl = plan(DegreeHistogram(((7, 3),)))
        assert len(pl.groups) == 1 and pl.groups[0].area == 21

    def test_alpha_near_one_reaches_atomic_peak(self):
        hist = DegreeHistogram(((9, 1), (6, 2), (4, 5), (2, 3), (1, 8)))
        pl = plan(hist, alpha=1 - 1e-9, p=64, h=8, mode="continue")
        assert pl.peak_area == max(n * c for n, c in hist.buckets)

    def test_baselines(self):
        single = single_group_plan(HIST)
        assert plan_stats(single, HIST) == {"peak_area": 80, "total_area": 80, "padded_waste": 48, "group_count": 1}
        assert plan_stats(atomic_plan(HIST), HIST)["padded_waste"] == 0

    def test_size_split(self):
        hist = DegreeHistogram(((50, 2), (40, 3), (10, 4), (2, 9)))
        pl = size_split_plan(hist, p=16, h=8)
        assert [(g.min_size, g.max_size, g.attention) for g in pl.groups] == [(40, 50, "linear"), (2, 10, "exact")]

    def test_json_round_trip(self):
        pl = plan(HIST)
        text = pl.to_json()
        assert PartitionPlan.from_json(text).to_json() == text
        doc = pl.to_dict()
        assert list(doc) == ["alpha", "p", "h", "threshold", "groups"]
        assert list(doc["groups"][0])[:5] == ["min_size", "max_size", "count", "area", "attention"]

    def test_check_plan_rejects_mismatch(self):
        with pytest.raises(ValueError):
            check_plan(plan(HIST), DegreeHistogram(((5, 2), (3, 4))))

    def test_bad_alpha(self):
        with pytest.raises(ValueError):
            plan(HIST, alpha=1.0)

    @given(histograms(max_size=120), st.sampled_from([0.1, 0.3, 0.4, 0.6, 0.9]), st.sampled_from([4, 16, 32]))
    @settings(max_examples=120, deadline=None)
    def test_coverage_regimes_and_trace(self, hist, alpha, p):
        h = 8
        pl = plan(hist, alpha=alpha, p=p, h=h)
        check_plan(pl, hist)
        assert sum(g.count for g in pl.groups) == hist.total
        thr = switch_threshold(p, h)
        for g in pl.groups:
            assert g.area == g.count * g.max_size
            assert (g.attention == "linear") == (g.max_size > thr)
            if g.attention == "linear":
                assert 2 * g.max_size * p + h * p <= g.max_size ** 2
        assert pl.peak_area <= single_group_plan(hist, p, h).peak_area
        n_lin = sum(1 for n in hist.sizes if n > thr)
        expect = []
        if n_lin:
            expect += trace_reference(hist, 1, n_lin, alpha)
        if n_lin < len(hist):
            expect += trace_reference(hist, n_lin + 1, len(hist), alpha)
        assert [(g.bucket_lo, g.bucket_hi) for g in pl.groups] == sorted(expect)

    @given(histograms(max_size=200, max_count=40))
    @settings(max_examples=100, deadline=None)
    def test_peak_non_increasing_in_alpha(self, hist):
        peaks = [plan(hist, alpha=a / 10, p=16, h=8).peak_area for a in range(1, 10)]
        assert all(a >= b for a, b in zip(peaks, peaks[1:]))

    @given(histograms())
    @settings(max_examples=60, deadline=None)
    def test_continue_mode_never_worse(self, hist):
        a = plan(hist, alpha=0.5, mode="faithful")
        b = plan(hist, alpha=0.5, mode="continue")
        check_plan(b, hist)
        assert b.peak_area <= a.peak_area
