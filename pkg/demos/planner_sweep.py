"""How the compression rate alpha trades group count for padded area.

Builds a 10,000-node power-law graph, plans its neighbourhoods for each
alpha and prints the resulting groups next to the single-group and
one-group-per-size baselines.
"""

from ntgraph.bench import run_bench
from ntgraph.generators import power_law
from ntgraph.graph import degree_histogram
from ntgraph.planner import plan


def main():
    g = power_law(num_nodes=10000, seed=0)
    hist = degree_histogram(g)
    print(f"{g.num_nodes} nodes, {len(hist)} distinct neighbourhood sizes, largest {hist.sizes[0]}")
    print(f"{'alpha':>7} {'groups':>6} {'peak':>9} {'total':>9} {'waste':>9} {'seconds':>8}")
    for r in run_bench(g, p=16, h=8):
        secs = "-" if r["wall_seconds"] is None else f"{r['wall_seconds']:.3f}"
        print(f"{r['alpha']!s:>7} {r['group_count']:>6} {r['peak_area']:>9} {r['total_area']:>9} "
              f"{r['padded_waste']:>9} {secs:>8}")
    print("\ngroups at alpha=0.4:")
    for grp in plan(hist, alpha=0.4, p=16, h=8).groups:
        print(f"  sizes {grp.min_size:>4}..{grp.max_size:<4} count {grp.count:>5} area {grp.area:>7} {grp.attention}")


if __name__ == "__main__":
    main()
