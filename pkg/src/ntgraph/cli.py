"""``ntgraph`` command line: gen, plan, train, eval, bench, stats.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric degeneracy.
Commands given ``--out DIR`` write their files there plus one
``manifest.json``; on failure every file written by the run is removed.

Training configuration precedence (later wins): built-in defaults,
``--preset``, the ``--config`` JSON file, explicit ``--seed`` /
``--alpha`` / ``--directed`` flags.
"""

import argparse
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .bench import rows_to_csv, run_bench
from .errors import DegeneracyError, NTError
from .generators import GENERATORS, generate
from .graph import DegreeHistogram, degree_histogram, size_discrepancy
from .io import load_graph, save_graph
from .model import ModelConfig, build_model, evaluate, load_model, preset, save_model, train
from .planner import PartitionPlan, plan, plan_stats

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


class Run:
    """Tracks outputs of one command so they can be listed or rolled back."""

    def __init__(self, command, args):
        self.command = command
        self.args = args
        self.out = Path(args.out) if getattr(args, "out", None) else None
        self.created_dir = False
        self.written = []
        self.inputs = {}
        self.config = None

    def input(self, path):
        if path is not None:
            self.inputs[str(path)] = hashlib.sha256(Path(path).read_bytes()).hexdigest()

    def write(self, name, text):
        if self.out is None:
            return None
        if not self.out.exists():
            self.out.mkdir(parents=True)
            self.created_dir = True
        path = self.out / name
        self.written.append(path)
        if isinstance(text, bytes):
            path.write_bytes(text)
        else:
            path.write_text(text, encoding="utf-8")
        return path

    def track(self, name):
        """Reserve ``name`` in the output directory for a file written elsewhere."""
        if not self.out.exists():
            self.out.mkdir(parents=True)
            self.created_dir = True
        path = self.out / name
        self.written.append(path)
        return path

    def finish(self, argv):
        if self.out is None:
            return
        manifest = {
            "command": self.command,
            "argv": list(argv),
            "config": self.config,
            "seed": getattr(self.args, "seed", None),
            "inputs": self.inputs,
            "outputs": [p.name for p in self.written],
            "engine_version": __version__,
        }
        self.write("manifest.json", json.dumps(manifest, indent=2, sort_keys=True) + "\n")

    def rollback(self):
        for path in reversed(self.written):
            if path.exists():
                path.unlink()
        if self.created_dir and self.out.exists() and not any(self.out.iterdir()):
            self.out.rmdir()


def _read_graph(args, run):
    path = Path(args.graph)
    if not path.is_file():
        raise FileNotFoundError(f"graph file not found: {path}")
    run.input(path)
    fmt = args.format or ("container" if path.suffix == ".json" else "edgelist")
    return load_graph(path, fmt=fmt, directed=getattr(args, "directed", False))


def _parse_params(pairs):
    params = {}
    for item in pairs or []:
        if "=" not in item:
            raise UsageError(f"--param expects key=value, got {item!r}")
        key, raw = item.split("=", 1)
        try:
            params[key] = json.loads(raw)
        except json.JSONDecodeError:
            params[key] = raw
    return params


def _gen_params(args):
    params = _parse_params(args.param)
    for flag, key in (("rows", "rows"), ("cols", "cols"), ("nodes", "num_nodes"), ("degree", "degree"),
                      ("exponent", "exponent")):
        value = getattr(args, flag, None)
        if value is not None:
            params[key] = value
    return params


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_gen(args, run):
    params = _gen_params(args)
    try:
        g = generate(args.kind, seed=args.seed, **params)
    except TypeError as exc:
        raise UsageError(f"bad generator parameters for {args.kind}: {exc}") from None
    run.config = {"kind": args.kind, "params": params}
    if run.out is None:
        raise UsageError("gen needs --out DIR")
    save_graph(g, run.track("graph.json"))
    print(f"{args.kind}: {g.num_nodes} nodes, {g.num_edges} stored edges")


def cmd_plan(args, run):
    if (args.graph is None) == (args.hist is None):
        raise UsageError("plan needs exactly one of --graph or --hist")
    if args.hist is not None:
        hist = DegreeHistogram.parse(args.hist)
    else:
        hist = degree_histogram(_read_graph(args, run))
    pl = plan(hist, alpha=args.alpha, p=args.p, h=args.h, mode=args.mode)
    text = pl.to_json()
    stats = plan_stats(pl, hist)
    run.config = {"alpha": args.alpha, "p": args.p, "h": args.h, "mode": args.mode, "hist": hist.to_spec()}
    run.write("plan.json", text)
    run.write("plan_stats.json", json.dumps(stats, indent=2) + "\n")
    sys.stdout.write(text)
    print(json.dumps(stats))


def _train_config(args):
    doc = {}
    if args.preset:
        doc.update(preset(args.preset).to_dict())
    if args.config:
        path = Path(args.config)
        if not path.is_file():
            raise FileNotFoundError(f"config file not found: {path}")
        doc.update(json.loads(path.read_text()))
    if args.seed is not None:
        doc["seed"] = args.seed
    if args.alpha is not None:
        doc["alpha"] = args.alpha
    if args.directed:
        doc["directed"] = True
    return ModelConfig.from_dict(doc)


def cmd_train(args, run):
    cfg = _train_config(args)
    if args.config:
        run.input(args.config)
    g = _read_graph(args, run)
    run.config = cfg.to_dict()
    model = build_model(cfg, g)
    report = train(model, g)
    val = evaluate(model, g, g.val_mask)
    if run.out is not None:
        save_model(model, run.track("model.ntck"))
        run.write("report.json", report.to_json())
        run.write("metrics.csv", report.to_csv())
    print(f"best epoch {report.best_epoch}: val {report.best_val:.4f}, test {report.test_accuracy_at_best}")
    print(f"restored val accuracy {val:.4f}")


def cmd_eval(args, run):
    g = _read_graph(args, run)
    ckpt = Path(args.checkpoint)
    if not ckpt.is_file():
        raise FileNotFoundError(f"checkpoint not found: {ckpt}")
    run.input(ckpt)
    model = load_model(ckpt, g)
    mask = {"train": g.train_mask, "val": g.val_mask, "test": g.test_mask}[args.split]
    acc = evaluate(model, g, mask)
    run.config = {"split": args.split}
    run.write("eval.json", json.dumps({"split": args.split, "accuracy": acc}) + "\n")
    print(f"{args.split} accuracy {acc:.6f}")


def cmd_bench(args, run):
    if args.graph is not None:
        g = _read_graph(args, run)
    else:
        params = _gen_params(args)
        params.setdefault("num_nodes", 10000)
        g = generate(args.kind or "power_law", seed=args.seed, **params)
    alphas = tuple(args.alphas) if args.alphas else None
    kw = {"alphas": alphas} if alphas else {}
    rows = run_bench(g, p=args.p, h=args.h, repeats=args.repeats, timing=not args.no_timing, mode=args.mode, **kw)
    text = rows_to_csv(rows)
    run.config = {"p": args.p, "h": args.h, "repeats": args.repeats, "mode": args.mode}
    run.write("bench.csv", text)
    sys.stdout.write(text)


def cmd_stats(args, run):
    g = _read_graph(args, run)
    hist = degree_histogram(g)
    out = {
        "num_nodes": g.num_nodes,
        "stored_edges": g.num_edges,
        "directed": bool(g.directed),
        "zero_degree": hist.zero_degree,
        "histogram": hist.to_spec(),
    }
    train_mask = np.asarray(g.train_mask)
    if train_mask.any() and not train_mask.all():
        out["size_discrepancy"] = size_discrepancy(g, train_mask)
    run.config = {}
    text = json.dumps(out, indent=2) + "\n"
    run.write("stats.json", text)
    sys.stdout.write(text)


# ---------------------------------------------------------------------------
# parser and dispatch
# ---------------------------------------------------------------------------

def _add_gen_flags(p):
    p.add_argument("--kind", choices=sorted(GENERATORS))
    p.add_argument("--rows", type=int)
    p.add_argument("--cols", type=int)
    p.add_argument("--nodes", type=int)
    p.add_argument("--degree", type=int)
    p.add_argument("--exponent", type=float)
    p.add_argument("--param", action="append", metavar="KEY=VALUE", help="extra generator parameter")


def build_parser():
    parser = _Parser(prog="ntgraph", description="Neighbourhood Transformer engine")
    parser.add_argument("--version", action="version", version=f"ntgraph {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, graph=True, seed_default=0):
        if graph:
            p.add_argument("--graph", metavar="PATH")
            p.add_argument("--format", choices=("edgelist", "container"))
            p.add_argument("--directed", action="store_true", help="treat the input graph as directed")
        p.add_argument("--seed", type=int, default=seed_default)
        p.add_argument("--out", metavar="DIR")

    p = sub.add_parser("gen", help="write a synthetic graph container")
    common(p, graph=False)
    _add_gen_flags(p)

    p = sub.add_parser("plan", help="partition plan for a graph or histogram")
    common(p)
    p.add_argument("--hist", metavar="SPEC", help='histogram as "size:count,..."')
    p.add_argument("--alpha", type=float, default=0.4)
    p.add_argument("--p", type=int, default=16)
    p.add_argument("--h", type=int, default=8)
    p.add_argument("--mode", choices=("faithful", "continue"), default="faithful")

    p = sub.add_parser("train", help="train a model and write checkpoint + report")
    common(p, seed_default=None)
    p.add_argument("--config", metavar="PATH")
    p.add_argument("--preset")
    p.add_argument("--alpha", type=float)

    p = sub.add_parser("eval", help="accuracy of a checkpoint")
    common(p)
    p.add_argument("--checkpoint", required=True, metavar="PATH")
    p.add_argument("--split", choices=("train", "val", "test"), default="test")

    p = sub.add_parser("bench", help="area/time sweep over alpha")
    common(p)
    _add_gen_flags(p)
    p.add_argument("--p", type=int, default=16)
    p.add_argument("--h", type=int, default=8)
    p.add_argument("--alphas", type=float, nargs="+")
    p.add_argument("--repeats", type=int, default=1)
    p.add_argument("--mode", choices=("faithful", "continue"), default="faithful")
    p.add_argument("--no-timing", action="store_true")

    p = sub.add_parser("stats", help="degree histogram, counts and size discrepancy")
    common(p)
    return parser


COMMANDS = {"gen": cmd_gen, "plan": cmd_plan, "train": cmd_train, "eval": cmd_eval, "bench": cmd_bench,
            "stats": cmd_stats}


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    if args.command in ("stats", "eval", "train") and not args.graph:
        print(f"ntgraph {args.command}: --graph is required", file=sys.stderr)
        return EXIT_USAGE
    run = Run(args.command, args)
    try:
        COMMANDS[args.command](args, run)
        run.finish(argv)
    except UsageError as exc:
        run.rollback()
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except (DegeneracyError, FloatingPointError) as exc:
        run.rollback()
        print(f"numeric degeneracy: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (NTError, OSError, ValueError, IndexError, KeyError, json.JSONDecodeError) as exc:
        run.rollback()
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except BaseException:
        run.rollback()
        raise
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
