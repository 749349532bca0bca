"""Area/time sweep over the compression rate alpha."""

import csv
import io
import math
import time

import numpy as np

from . import tensor as T
from .graph import degree_histogram
from .layer import ExchangeLayout, exchange, init_nt_params
from .planner import atomic_plan, plan, plan_stats, single_group_plan
from .rng import stream

ALPHAS = tuple(round(0.1 * k, 1) for k in range(1, 10))
# padded slots times head width above which a row is planned but not timed
DEFAULT_BUDGET = 5e7


def time_exchange(g, plan_, params, repeats=1, dtype=np.float32):
    """Best-of-``repeats`` wall time of one exchange pass under ``plan_``."""
    layout = ExchangeLayout.build(g, plan_)
    rng = stream(0, "bench", "messages")
    Z = T.Tensor(rng.standard_normal((g.num_edges, params.heads, params.h)).astype(dtype))
    best = math.inf
    with T.no_grad():
        for _ in range(repeats):
            t0 = time.perf_counter()
            exchange(g, Z, layout, params)
            best = min(best, time.perf_counter() - t0)
    return best


def run_bench(g, p=16, h=8, alphas=ALPHAS, repeats=1, budget=DEFAULT_BUDGET, timing=True, mode="faithful"):
    """One row per alpha plus the single-group and atomic baselines.

    Rows are dicts with ``alpha`` (a float, ``"single"`` or ``"atomic"``),
    ``peak_area``, ``total_area``, ``padded_waste``, ``group_count`` and
    ``wall_seconds`` (``None`` when not timed).
    """
    hist = degree_histogram(g)
    candidates = [(a, plan(hist, alpha=a, p=p, h=h, mode=mode)) for a in alphas]
    candidates.append(("single", single_group_plan(hist, p=p, h=h)))
    candidates.append(("atomic", atomic_plan(hist, p=p, h=h)))
    params = None
    if timing:
        params = init_nt_params(stream(0, "bench", "init"), 1, h, heads=1, p=p, dtype=np.float32)
        params.P = params.P.astype(np.float32)
        for name, t in params.tensors().items():
            t.data = t.data.astype(np.float32)
    rows = []
    for label, pl in candidates:
        stats = plan_stats(pl, hist)
        secs = None
        if timing and stats["peak_area"] * max(h, p) <= budget:
            secs = time_exchange(g, pl, params, repeats)
        rows.append({"alpha": label, **stats, "wall_seconds": secs})
    return rows


def rows_to_csv(rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["alpha", "peak_area", "total_area", "wall_seconds"])
    for r in rows:
        secs = "" if r["wall_seconds"] is None else f"{r['wall_seconds']:.6f}"
        w.writerow([r["alpha"], r["peak_area"], r["total_area"], secs])
    return buf.getvalue()
