"""Acceptance suite: one test per criterion, each records a PASS/FAIL line.

Run ``pytest tests/test_acceptance.py -v`` (add ``-s`` to see the lines as
they are produced); the summary section lists all of them at the end.
"""

import math
import time
import warnings

import numpy as np

from ntgraph import functional as F
from ntgraph import reference as R
from ntgraph import tensor as T
from ntgraph.attention import exact_attention, linear_attention, make_random_features, switch_threshold
from ntgraph.bench import run_bench
from ntgraph.generators import monophily_task, power_law
from ntgraph.gradcheck import finite_diff_check
from ntgraph.graph import DegreeHistogram, degree_histogram, from_edges, size_discrepancy
from ntgraph.layer import (
    AGGREGATORS,
    ExchangeLayout,
    aggregate,
    combine,
    dir_nt_forward,
    exchange,
    init_nt_params,
    layout_for,
    nt_forward,
)
from ntgraph.model import ModelConfig, build_model, train
from ntgraph.planner import best_contiguous_split, brute_force_plan, plan
from ntgraph.rng import stream

from conftest import random_graph, relabel


def layer_params(seed, d=3, h=4, heads=2, aggregator="mean", p=8):
    return init_nt_params(stream(seed, "acceptance"), d, h, heads, aggregator, p=p, rf_seed=seed)


def random_histogram(rng, max_buckets=8, max_size=60, max_count=3):
    k = int(rng.integers(1, max_buckets + 1))
    sizes = sorted(rng.choice(np.arange(1, max_size + 1), size=k, replace=False).tolist(), reverse=True)
    return DegreeHistogram(tuple((int(n), int(rng.integers(1, max_count + 1))) for n in sizes))


def test_c01_ego_only_is_message_passing(verdict):
    t0 = time.perf_counter()
    worst = 0.0
    for s in range(50):
        g = random_graph(1000 + s, lo=8, hi=40)
        for agg in AGGREGATORS:
            prm = layer_params(s, aggregator=agg)
            layout = layout_for(g, p=8, h=4, attention="exact")
            out = nt_forward(g, g.features, prm, mode="ego_only", layout=layout).data
            worst = max(worst, float(np.max(np.abs(out - R.ego_only_composite(g, g.features, prm)), initial=0)))
    secs = time.perf_counter() - t0
    ok = worst < 1e-8 and secs < 30
    assert verdict(1, ok, f"ego-only NT vs MP composite, 50 graphs x 5 aggregators: max diff {worst:.2e}, "
                          f"{secs:.1f}s")


def test_c02_neighbour_only_is_two_layer_mp(verdict):
    t0 = time.perf_counter()
    worst = 0.0
    for s in range(50):
        g = random_graph(2000 + s, lo=8, hi=40)
        agg = AGGREGATORS[s % len(AGGREGATORS)]
        prm = layer_params(s, aggregator=agg)
        layout = layout_for(g, p=8, h=4, attention="linear")
        out = nt_forward(g, g.features, prm, mode="neighbour_only", layout=layout).data
        worst = max(worst, float(np.max(np.abs(out - R.neighbour_only_two_layer(g, g.features, prm)), initial=0)))
    secs = time.perf_counter() - t0
    ok = worst < 1e-6 and secs < 60
    assert verdict(2, ok, f"neighbour-only linear NT vs two-layer MP, 50 graphs: max diff {worst:.2e}, {secs:.1f}s")


def test_c03_contiguous_split_is_optimal(verdict):
    t0 = time.perf_counter()
    rng = stream(3, "acceptance", "histograms")
    mismatches = checked = 0
    while checked < 1000:
        hist = random_histogram(rng)
        if hist.total < 2:
            continue
        checked += 1
        mismatches += best_contiguous_split(hist)[0] != brute_force_plan(hist)
    worked = plan(DegreeHistogram(((5, 2), (3, 4), (1, 10))), alpha=0.4, p=16, h=8)
    areas = sorted(g.area for g in worked.groups)
    secs = time.perf_counter() - t0
    ok = mismatches == 0 and areas == [10, 30] and secs < 60
    assert verdict(3, ok, f"{mismatches} mismatches in {checked} histograms; worked trace areas {areas}; "
                          f"{secs:.1f}s")


def test_c04_threshold_identity(verdict):
    rng = stream(4, "acceptance")
    worst = 0.0
    for _ in range(100):
        p, h = int(rng.integers(1, 513)), int(rng.integers(1, 129))
        n = switch_threshold(p, h)
        worst = max(worst, abs(n * n - (2 * n * p + h * p)) / max(1.0, n * n))
    violations = linear_groups = 0
    hists = [random_histogram(rng, max_buckets=12, max_size=400, max_count=50) for _ in range(200)]
    hists.append(degree_histogram(power_law(num_nodes=3000, seed=0)))
    for hist in hists:
        for alpha in (0.1, 0.4, 0.9):
            for p, h in ((16, 8), (4, 2), (32, 64)):
                for grp in plan(hist, alpha=alpha, p=p, h=h).groups:
                    if grp.attention == "linear":
                        linear_groups += 1
                        n = grp.max_size
                        violations += 2 * n * p + h * p > n * n
    ok = worst < 1e-9 and violations == 0 and linear_groups > 0
    assert verdict(4, ok, f"identity residual {worst:.1e}; {violations} violations over {linear_groups} "
                          f"linear groups")


def test_c05_performer_fidelity(verdict):
    n, h = 32, 8

    def mean_error(p, seed):
        rng = stream(seed, "acceptance", "performer-inputs")
        Q, K, V = (rng.standard_normal((n, h)) for _ in range(3))
        exact = exact_attention(Q, K, V).data
        approx = linear_attention(Q, K, V, rf=make_random_features(h, p, seed)).data
        rows = np.linalg.norm(approx - exact, axis=1) / np.linalg.norm(exact, axis=1)
        return float(rows.mean())

    e32 = float(np.mean([mean_error(32, s) for s in range(100)]))
    e256 = float(np.mean([mean_error(256, s) for s in range(100)]))
    ok = e256 < 0.15 and e256 < e32
    assert verdict(5, ok, f"mean row relative error p=32 {e32:.3f}, p=256 {e256:.3f} (target < 0.15)")


# every operator of the tensor catalog, as (name, fn, positive inputs)
CATALOG = [
    ("matmul", lambda t: t @ T.Tensor(np.linspace(-1, 1, t.shape[-1] * 3).reshape(t.shape[-1], 3)), False),
    ("transpose", lambda t: T.transpose(t), False),
    ("concat", lambda t: T.concat([t, t * 2.0], axis=-1), False),
    ("masked_softmax", lambda t: F.masked_softmax(t, np.arange(t.size).reshape(t.shape) % 3 != 1), False),
    ("exp", T.exp, False),
    ("log", T.log, True),
    ("sigmoid", T.sigmoid, False),
    ("tanh", T.tanh, False),
    ("gelu", F.gelu, False),
    ("add/sub/mul/div", lambda t: (t + 1.0) * t / (t * t + 2.0) - t, False),
    ("power", lambda t: T.power(t, 3.0), False),
    ("sq_norm", F.sq_norm, False),
    ("layer_norm", F.layer_norm, False),
    ("reshape/getitem", lambda t: T.reshape(t, (-1,))[1:], False),
    ("sum/mean", lambda t: T.sum_(t, axis=0) + T.mean(t, axis=-1, keepdims=True), False),
    ("take_rows", lambda t: T.take_rows(t, np.array([1, 0, 1, -1])), False),
    ("segment_sum", lambda t: F.segment_sum(t, np.arange(t.shape[0]) % 2, 3), False),
    ("segment_mean", lambda t: F.segment_mean(t, np.arange(t.shape[0]) % 2, 3), False),
    ("segment_max", lambda t: F.segment_max(t, np.arange(t.shape[0]) % 2, 3), False),
    ("segment_softmax", lambda t: F.segment_softmax(t, np.arange(t.shape[0]) % 2, 3), False),
    ("dropout", lambda t: F.dropout(t, 0.3, stream(6, "dropout"), training=True), False),
    ("cross_entropy", lambda t: F.cross_entropy(T.reshape(t, (t.shape[0], -1)), np.arange(t.shape[0]) % 2), False),
]
SHAPES = [(4, 3), (5, 4), (3, 2, 4)]


def test_c06_gradient_integrity(verdict):
    t0 = time.perf_counter()
    worst, where = 0.0, ""
    for name, fn, positive in CATALOG:
        for k, shape in enumerate(SHAPES):
            rng = stream(6, name, k)
            x = rng.normal(size=shape)
            if positive:
                x = np.abs(x) + 0.5
            with T.no_grad():
                w = rng.normal(size=fn(T.Tensor(x)).shape)
            err = finite_diff_check(lambda t: T.sum_(fn(t) * w), x, eps=1e-5)
            if err > worst:
                worst, where = err, f"{name}{shape}"

    g = random_graph(6, n=10, p_edge=0.3)
    model = build_model(ModelConfig(hidden_per_head=3, heads=2, aggregator="weighted_mean"), g)
    idx = np.flatnonzero(g.train_mask)
    for name in list(model.params):
        original = model.params[name]

        def loss(t):
            model.params[name] = t
            if ".layer" in name:
                block, view, key = name.split(".")
                setattr(model.nt_layers[int(block[5:])][int(view[5:])], key, t)
            return F.cross_entropy(T.take_rows(model.forward(), idx), g.labels[idx])

        err = finite_diff_check(loss, original.data, eps=1e-5)
        loss(original)
        if err > worst:
            worst, where = err, f"model {name}"
    secs = time.perf_counter() - t0
    ok = worst < 1e-4 and secs < 120
    assert verdict(6, ok, f"{len(CATALOG)} catalog ops x 3 shapes + 1-block model: max rel error {worst:.1e} "
                          f"({where}), {secs:.1f}s")


def test_c07_batching_transparency(verdict):
    worst = 0.0
    for s in range(20):
        g = random_graph(7000 + s, lo=10, hi=50)
        prm = layer_params(s, heads=2, aggregator="weighted_mean")
        Z = combine(g, g.features, prm)
        pl = plan(degree_histogram(g), alpha=0.4, p=8, h=4)
        for kind in ("exact", "linear"):
            M = exchange(g, Z, ExchangeLayout.build(g, pl.with_attention(kind)), prm).data
            worst = max(worst, float(np.max(np.abs(M - R.exchange_loop(g, Z.data, prm, kind)))))
    ok = worst < 1e-12
    assert verdict(7, ok, f"planned exchange vs per-neighbourhood loop, 20 graphs x 2 kinds: max diff {worst:.1e}")


def test_c08_area_sweep(verdict):
    g = power_law(num_nodes=10000, seed=0)
    rows = run_bench(g, p=16, h=8)
    sweep = [r for r in rows if isinstance(r["alpha"], float)]
    single = next(r for r in rows if r["alpha"] == "single")
    peaks = [r["peak_area"] for r in sweep]
    monotone = all(a >= b for a, b in zip(peaks, peaks[1:]))
    at04 = next(r for r in sweep if abs(r["alpha"] - 0.4) < 1e-12)
    ratio = at04["total_area"] / single["total_area"]
    timed = ", ".join(f"{r['alpha']}:{r['wall_seconds']:.3f}s" for r in rows if r["wall_seconds"] is not None)
    ok = len(sweep) == 9 and monotone and ratio <= 0.5
    assert verdict(8, ok, f"peaks {peaks}; alpha=0.4 total/single area {ratio:.4f}; wall times {timed}")


def test_c09_monophily_separation(verdict):
    t0 = time.perf_counter()
    g = monophily_task(num_nodes=2000, seed=0)
    budget = dict(hidden_per_head=8, heads=2, layers=1, lr=0.01, max_epochs=150, patience=60, seed=0)
    nt = train(build_model(ModelConfig(**budget), g), g).best_val
    mp = train(build_model(ModelConfig(layer="mp", aggregator="mean", **budget), g), g).best_val
    secs = time.perf_counter() - t0
    ok = nt >= 0.90 and nt - mp >= 0.10 and secs < 300
    assert verdict(9, ok, f"NT val {nt:.3f}, mean-MP val {mp:.3f}, margin {100 * (nt - mp):.1f} points, {secs:.0f}s")


def test_c10_dir_nt_symmetry(verdict):
    worst = 0.0
    for s in range(20):
        g = random_graph(10000 + s)
        prm = layer_params(s, aggregator=AGGREGATORS[s % len(AGGREGATORS)])
        diff = dir_nt_forward(g, g.features, prm, prm).data - 2 * nt_forward(g, g.features, prm).data
        worst = max(worst, float(np.max(np.abs(diff))))
    ok = worst < 1e-9
    assert verdict(10, ok, f"Dir-NT vs 2 x NT on 20 symmetric graphs: max diff {worst:.1e}")


def test_c11_dynamic_aggregators(verdict):
    worst = 0.0
    for s in range(20):
        g = random_graph(11000 + s, directed=True)
        M = stream(s, "acceptance", "messages").normal(size=(g.num_edges, 2, 8))
        for agg in ("gated_sum", "weighted_mean"):
            out = aggregate(g, T.Tensor(M), agg, 4).data
            worst = max(worst, float(np.max(np.abs(out - R.aggregate_loop(g, M, agg, 4)))))
    path = from_edges(2, [0], [1], directed=True)
    hand = float(aggregate(path, T.Tensor([[0.0, 3.0]]), "gated_sum", 1).data[1, 0])
    ok = worst < 1e-10 and hand == 1.5
    assert verdict(11, ok, f"max diff vs straight-line recomputation {worst:.1e}; sigmoid(0) * 3 = {hand}")


def test_c12_size_discrepancy(verdict):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        n = 30
        ring = from_edges(n, np.arange(n), (np.arange(n) + 1) % n)
        regular = size_discrepancy(ring, np.arange(n) % 3 == 0)
        disjoint = size_discrepancy(from_edges(8, [0, 2, 4, 4, 4, 5, 5, 6], [1, 3, 5, 6, 7, 6, 7, 7]),
                                    np.arange(8) < 4)
        worst = 0.0
        for s in range(10):
            g = random_graph(12000 + s, lo=20, hi=40)
            perm = np.random.default_rng(s).permutation(g.num_nodes)
            h = relabel(g, perm)
            worst = max(worst, abs(size_discrepancy(g, g.train_mask) - size_discrepancy(h, h.train_mask)))
    ok = regular == 0.0 and math.isclose(disjoint, 2.0, abs_tol=1e-12) and worst < 1e-12
    assert verdict(12, ok, f"regular {regular}, disjoint supports {disjoint}, relabel drift {worst:.1e}")


def test_c13_determinism(verdict):
    g = monophily_task(num_nodes=300, seed=13)
    cfg = ModelConfig(hidden_per_head=8, heads=2, layers=2, dropout=0.2, aggregator="gated_sum", lr=0.01,
                      max_epochs=20, seed=13)
    a = train(build_model(cfg, g), g).to_json()
    b = train(build_model(cfg, g), g).to_json()
    ok = a == b
    assert verdict(13, ok, f"two runs with seed 13: reports {'byte-identical' if ok else 'differ'} "
                           f"({len(a)} bytes)")
