import numpy as np
import pytest

from ntgraph.graph import from_edges
from ntgraph.rng import stream


def random_graph(seed, n=None, p_edge=None, directed=False, d=3, classes=2, lo=8, hi=40):
    """Erdos-Renyi-style graph with Gaussian features and random labels."""
    rng = stream(seed, "test-graph")
    n = int(rng.integers(lo, hi + 1)) if n is None else n
    p_edge = rng.uniform(0.08, 0.3) if p_edge is None else p_edge
    adj = rng.random((n, n)) < p_edge
    np.fill_diagonal(adj, False)
    src, dst = np.nonzero(adj)
    masks = {k: np.zeros(n, dtype=bool) for k in ("train_mask", "val_mask", "test_mask")}
    order = rng.permutation(n)
    masks["train_mask"][order[: n // 2]] = True
    masks["val_mask"][order[n // 2: 3 * n // 4]] = True
    masks["test_mask"][order[3 * n // 4:]] = True
    return from_edges(
        n, src, dst, directed=directed, features=rng.normal(size=(n, d)),
        labels=rng.integers(0, classes, size=n), **masks,
    )


def relabel(g, perm):
    """Graph with node ``i`` renamed to ``perm[i]`` (all node arrays follow)."""
    inv = np.argsort(perm)
    src, dst = g.edge_src, g.edge_dst
    return from_edges(
        g.num_nodes, perm[src], perm[dst], directed=True,
        features=g.features[inv], labels=g.labels[inv],
        train_mask=g.train_mask[inv], val_mask=g.val_mask[inv], test_mask=g.test_mask[inv],
    ).replace(directed=g.directed)


@pytest.fixture
def rng():
    return stream(1234, "tests")


_ACCEPTANCE = pytest.StashKey()


@pytest.fixture
def verdict(request):
    """Record one acceptance line; returns ``ok`` so callers can assert on it."""
    lines = request.config.stash.setdefault(_ACCEPTANCE, {})

    def record(number, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'} criterion {number:>2}: {detail}"
        lines[number] = line
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_ACCEPTANCE, {})
    if lines:
        terminalreporter.section("acceptance criteria")
        for number in sorted(lines):
            terminalreporter.write_line(lines[number])
