"""Network assembly, full-batch training with early stopping, evaluation.

Architecture: a linear encoder, ``L`` residual blocks
``x + MLP(NT(LayerNorm(x)))`` and a linear predictor. The MLP has two
linear maps with a GELU (and dropout) between them.
"""

import csv
import io
import json
import time
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from . import functional as F
from . import tensor as T
from .attention import KernelStats, default_features
from .checkpoint import load_checkpoint, save_checkpoint
from .errors import DegeneracyError
from .graph import degree_histogram, transform
from .layer import (
    AGGREGATORS,
    COMBINER_MODES,
    ExchangeLayout,
    init_mp_params,
    init_nt_params,
    mp_forward,
    nt_forward,
    xavier,
)
from .optim import AdamState, adam_step
from .planner import plan as make_plan
from .rng import stream


@dataclass
class ModelConfig:
    hidden_per_head: int = 8
    heads: int = 1
    layers: int = 1
    dropout: float = 0.0
    aggregator: str = "mean"
    directed: bool = False
    self_loops: bool = False
    ego_separation: bool = False
    alpha: float = 0.4
    seed: int = 0
    lr: float = 0.001
    max_epochs: int = 300
    patience: int = 60
    # engine knobs
    layer: str = "nt"  # "nt" or "mp" (mean-MP baseline blocks)
    combiner: str = "full"
    p: int = None  # random features per head; None -> ceil(h ln h), min 4
    attention: str = None  # force "exact" or "linear" for every group
    dtype: str = "float64"

    def __post_init__(self):
        self.validate()

    def validate(self):
        for name in ("hidden_per_head", "heads", "layers", "max_epochs"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or isinstance(v, bool) or v < 1:
                raise ValueError(f"{name} must be an integer >= 1, got {v!r}")
        if not isinstance(self.patience, (int, np.integer)) or self.patience < 0:
            raise ValueError(f"patience must be an integer >= 0, got {self.patience!r}")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must lie in [0, 1)")
        if self.aggregator not in AGGREGATORS:
            raise ValueError(f"aggregator must be one of {AGGREGATORS}")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must lie in (0, 1)")
        if self.lr < 0:
            raise ValueError("lr must be >= 0")
        if self.layer not in ("nt", "mp"):
            raise ValueError("layer must be 'nt' or 'mp'")
        if self.combiner not in COMBINER_MODES:
            raise ValueError(f"combiner must be one of {COMBINER_MODES}")
        if self.attention not in (None, "exact", "linear"):
            raise ValueError("attention override must be 'exact', 'linear' or null")
        if self.p is not None and self.p < 1:
            raise ValueError("p must be >= 1")
        if self.dtype not in ("float64", "float32"):
            raise ValueError("dtype must be float64 or float32")
        if not isinstance(self.seed, (int, np.integer)) or self.seed < 0:
            raise ValueError("seed must be a non-negative integer")

    @property
    def width(self):
        return self.hidden_per_head * self.heads

    @property
    def features(self):
        return self.p or default_features(self.hidden_per_head)

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, doc):
        known = {f.name for f in fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**doc)

    def updated(self, **changes):
        doc = self.to_dict()
        doc.update(changes)
        return ModelConfig.from_dict(doc)


def _table(agg, dims, heads, layers, dropout, directed=False):
    return dict(aggregator=agg, hidden_per_head=dims, heads=heads, layers=layers, dropout=dropout, directed=directed)


PRESETS = {
    "desk": {},
    "long_protocol": dict(max_epochs=2500, patience=500, lr=0.001),
    # tuned settings for the ten benchmark graphs
    "roman_empire": _table("sum", 32, 6, 5, 0.4),
    "amazon_ratings": _table("mean", 40, 8, 1, 0.3),
    "minesweeper": _table("sum", 53, 1, 5, 0.2),
    "tolokers": _table("gated_sum", 30, 2, 5, 0.1),
    "questions": _table("sum", 32, 4, 1, 0.2),
    "roman_empire_directed": _table("max", 36, 5, 5, 0.4, True),
    "amazon_ratings_directed": _table("max", 23, 7, 4, 0.4, True),
    "minesweeper_directed": _table("sum", 15, 2, 5, 0.1, True),
    "tolokers_directed": _table("gated_sum", 9, 4, 4, 0.2, True),
    "questions_directed": _table("gated_sum", 27, 7, 1, 0.3, True),
    "amazon_computer": _table("sum", 17, 4, 5, 0.4),
    "amazon_photo": _table("mean", 18, 7, 4, 0.6),
    "coauthor_cs": _table("weighted_mean", 41, 8, 2, 0.3),
    "coauthor_physics": _table("weighted_mean", 16, 2, 2, 0.1),
    "wikics": _table("mean", 38, 1, 3, 0.2),
    # ablation settings
    "ablation_memory": dict(aggregator="mean", hidden_per_head=8, heads=4, layers=1, dropout=0.0, lr=0.01,
                            max_epochs=500, patience=50),
    "ablation_framework": dict(aggregator="weighted_mean", hidden_per_head=8, heads=4, layers=1, dropout=0.2,
                               lr=0.01, max_epochs=1000, patience=200),
    "ablation_aggregator": dict(hidden_per_head=8, heads=8, layers=2, dropout=0.2, lr=0.01, max_epochs=200,
                                patience=200),
    "ablation_self_loops": dict(aggregator="weighted_mean", hidden_per_head=8, heads=8, layers=2, dropout=0.2,
                                lr=0.01, max_epochs=200, patience=200),
}


def preset(name, **overrides):
    try:
        doc = dict(PRESETS[name])
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
    doc.update(overrides)
    return ModelConfig.from_dict(doc)


# ---------------------------------------------------------------------------
# model
# ---------------------------------------------------------------------------

def num_classes_of(g):
    labelled = g.labels[g.labels >= 0]
    if labelled.size == 0:
        raise ValueError("graph has no labelled nodes")
    return int(labelled.max()) + 1


def prepare_graph(g, config):
    """Apply the structural toggles: symmetrize unless directed, optional self-loops."""
    if not config.directed and g.directed:
        g = transform(g, "symmetrize")
    if config.self_loops:
        g = transform(g, "add_self_loops")
    return g


class Model:
    """Parameters plus the graph-dependent execution state (plans, layouts)."""

    def __init__(self, config, params, nt_layers, num_classes, feature_dim):
        self.config = config
        self.params = params
        self.nt_layers = nt_layers  # per block: list of NTParams / MPParams (two when directed)
        self.num_classes = num_classes
        self.feature_dim = feature_dim
        self.stats = KernelStats()
        self.graph = None

    def bind(self, g):
        """Prepare ``g`` and build the partition plans and layouts for it."""
        cfg = self.config
        if g.features.shape[1] != self.feature_dim:
            raise ValueError(f"graph has {g.features.shape[1]} features, model expects {self.feature_dim}")
        gp = prepare_graph(g, cfg)
        views = [gp]
        if cfg.directed:
            views.append(transform(gp, "reverse_edges"))
        self.graph = gp
        self.views = views
        self.plans, self.layouts = [], []
        for view in views:
            pl = make_plan(degree_histogram(view), alpha=cfg.alpha, p=cfg.features, h=cfg.hidden_per_head)
            if cfg.attention is not None:
                pl = pl.with_attention(cfg.attention)
            self.plans.append(pl)
            self.layouts.append(ExchangeLayout.build(view, pl) if cfg.layer == "nt" else None)
        self._features = T.Tensor(np.asarray(gp.features, dtype=cfg.dtype))
        return self

    @property
    def peak_areas(self):
        return [pl.peak_area for pl in self.plans]

    def parameter_count(self):
        return int(sum(p.size for p in self.params.values()))

    def state_arrays(self):
        return {k: np.array(v.data, copy=True) for k, v in self.params.items()}

    def load_arrays(self, arrays):
        missing = set(self.params) - set(arrays)
        if missing:
            raise ValueError(f"checkpoint lacks parameters {sorted(missing)}")
        for k, p in self.params.items():
            if arrays[k].shape != p.shape:
                raise ValueError(f"parameter {k}: shape {arrays[k].shape} != {p.shape}")
            p.data = np.asarray(arrays[k], dtype=p.dtype).copy()

    def _layer(self, b, x, training, rng):
        cfg = self.config
        outs = None
        for v, (view, layer_params) in enumerate(zip(self.views, self.nt_layers[b])):
            if cfg.layer == "nt":
                y = nt_forward(
                    view, x, layer_params, mode=cfg.combiner, layout=self.layouts[v], training=training,
                    rng=rng, dropout=cfg.dropout, stats=self.stats,
                )
            else:
                y = mp_forward(view, x, (layer_params.W, layer_params.b), layer_params.aggregator,
                               h=cfg.hidden_per_head)
                y = y.reshape(view.num_nodes, -1)
            outs = y if outs is None else outs + y
        return outs

    def forward(self, training=False, rng=None):
        """Logits for every node of the bound graph."""
        if self.graph is None:
            raise ValueError("model is not bound to a graph")
        cfg = self.config
        P = self.params
        x = F.linear(self._features, P["encoder.W"], P["encoder.b"])
        for b in range(cfg.layers):
            pre = f"block{b}."
            z = F.layer_norm(x)
            y = self._layer(b, z, training, rng)
            if cfg.ego_separation:
                y = T.concat([y, F.linear(z, P[pre + "ego.W"], P[pre + "ego.b"])], axis=-1)
            hidden = F.gelu(F.linear(y, P[pre + "mlp1.W"], P[pre + "mlp1.b"]))
            hidden = F.dropout(hidden, cfg.dropout, rng, training)
            x = x + F.linear(hidden, P[pre + "mlp2.W"], P[pre + "mlp2.b"])
        return F.linear(x, P["predictor.W"], P["predictor.b"])

    def predict(self):
        with T.no_grad():
            logits = self.forward(training=False).data
        # argmax returns the first maximum, i.e. the smallest class id on ties
        return np.argmax(logits, axis=1)


def build_model(config, g, num_classes=None):
    """Initialize every parameter from ``config.seed`` and bind the model to ``g``."""
    config.validate()
    dtype = np.dtype(config.dtype)
    rng = stream(config.seed, "init")
    d = g.features.shape[1]
    w = config.width
    C = num_classes_of(g) if num_classes is None else int(num_classes)
    params = {}

    def dense(name, fan_in, fan_out):
        params[name + ".W"] = T.Tensor(xavier(rng, fan_in, fan_out).astype(dtype), requires_grad=True)
        params[name + ".b"] = T.Tensor(np.zeros(fan_out, dtype=dtype), requires_grad=True)

    dense("encoder", d, w)
    nt_layers = []
    for b in range(config.layers):
        per_view = []
        for v in range(2 if config.directed else 1):
            if config.layer == "nt":
                lp = init_nt_params(
                    rng, w, config.hidden_per_head, config.heads, config.aggregator, p=config.features,
                    rf_seed=config.seed * 1000 + 2 * b + v, dtype=dtype,
                )
            else:
                lp = init_mp_params(rng, w, w, config.aggregator, dtype=dtype)
            for k, t in lp.tensors().items():
                params[f"block{b}.layer{v}.{k}"] = t
            per_view.append(lp)
        nt_layers.append(per_view)
        mlp_in = w
        if config.ego_separation:
            dense(f"block{b}.ego", w, w)
            mlp_in = 2 * w
        dense(f"block{b}.mlp1", mlp_in, w)
        dense(f"block{b}.mlp2", w, w)
    dense("predictor", w, C)
    return Model(config, params, nt_layers, C, d).bind(g)


# ---------------------------------------------------------------------------
# training and evaluation
# ---------------------------------------------------------------------------

def _check_eval_mask(g, mask):
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != (g.num_nodes,):
        raise ValueError("mask must have one entry per node")
    if not mask.any():
        raise ValueError("evaluation mask is empty")
    if np.any(g.labels[mask] < 0):
        raise ValueError("evaluation mask contains unlabelled nodes")
    return mask


def evaluate(model, g, mask):
    """Accuracy of argmax predictions on ``mask``."""
    if model.graph is None or not model.graph.same_structure(prepare_graph(g, model.config)):
        model.bind(g)
    mask = _check_eval_mask(g, mask)
    pred = model.predict()
    return float(np.mean(pred[mask] == g.labels[mask]))


@dataclass
class TrainReport:
    epochs: list = field(default_factory=list)  # {"epoch", "train_loss", "val_acc", "seconds"}
    best_epoch: int = -1
    best_val: float = float("-inf")
    test_accuracy_at_best: float = None
    peak_areas: list = field(default_factory=list)
    config: dict = field(default_factory=dict)

    @property
    def train_losses(self):
        return [e["train_loss"] for e in self.epochs]

    @property
    def val_accuracies(self):
        return [e["val_acc"] for e in self.epochs]

    def to_dict(self, timings=False):
        rows = [dict(e) if timings else {k: v for k, v in e.items() if k != "seconds"} for e in self.epochs]
        return {
            "best_epoch": self.best_epoch,
            "best_val": self.best_val,
            "test_accuracy_at_best": self.test_accuracy_at_best,
            "peak_areas": list(self.peak_areas),
            "config": self.config,
            "epochs": rows,
        }

    def to_json(self, timings=False):
        """Canonical JSON; wall times are left out unless ``timings`` is set."""
        return json.dumps(self.to_dict(timings), sort_keys=True, indent=1) + "\n"

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["epoch", "train_loss", "val_acc", "seconds"])
        for e in self.epochs:
            w.writerow([e["epoch"], repr(e["train_loss"]), repr(e["val_acc"]), f"{e['seconds']:.6f}"])
        return buf.getvalue()


def train(model, g, config=None, log=None):
    """Full-batch Adam on the train mask, early stopping on val accuracy.

    Training stops once more than ``patience`` consecutive epochs fail to
    improve the best val accuracy; the best epoch's parameters are then
    restored.
    """
    cfg = model.config if config is None else config
    if model.graph is None or not model.graph.same_structure(prepare_graph(g, model.config)):
        model.bind(g)
    train_mask = np.asarray(g.train_mask, dtype=bool)
    labelled = train_mask & (g.labels >= 0)
    if not labelled.any():
        raise ValueError("no labelled training nodes")
    val_mask = _check_eval_mask(g, g.val_mask)
    test_mask = np.asarray(g.test_mask, dtype=bool) & (g.labels >= 0)
    train_idx = np.flatnonzero(labelled)
    train_labels = g.labels[train_idx]

    state = AdamState(lr=cfg.lr)
    report = TrainReport(peak_areas=model.peak_areas, config=cfg.to_dict())
    best = model.state_arrays()
    bad = 0
    for epoch in range(cfg.max_epochs):
        t0 = time.perf_counter()
        rng = stream(cfg.seed, "dropout", epoch)
        logits = model.forward(training=True, rng=rng)
        loss = F.cross_entropy(T.take_rows(logits, train_idx), train_labels)
        if not np.isfinite(loss.data):
            raise DegeneracyError(f"non-finite training loss at epoch {epoch}")
        T.backward(loss)
        adam_step(model.params, state)
        pred = model.predict()
        val_acc = float(np.mean(pred[val_mask] == g.labels[val_mask]))
        seconds = time.perf_counter() - t0
        report.epochs.append({"epoch": epoch, "train_loss": float(loss.data), "val_acc": val_acc, "seconds": seconds})
        if log is not None:
            log(epoch, float(loss.data), val_acc)
        if val_acc > report.best_val:
            report.best_val = val_acc
            report.best_epoch = epoch
            if test_mask.any():
                report.test_accuracy_at_best = float(np.mean(pred[test_mask] == g.labels[test_mask]))
            best = model.state_arrays()
            bad = 0
        else:
            bad += 1
            if bad > cfg.patience:
                break
    model.load_arrays(best)
    return report


# ---------------------------------------------------------------------------
# checkpoints
# ---------------------------------------------------------------------------

def save_model(model, path):
    meta = {"config": model.config.to_dict(), "num_classes": model.num_classes, "feature_dim": model.feature_dim}
    save_checkpoint(path, model.state_arrays(), meta=meta, dtype=model.config.dtype)


def load_model(path, g):
    arrays, meta = load_checkpoint(path)
    config = ModelConfig.from_dict(meta["config"])
    model = build_model(config, g, num_classes=meta["num_classes"])
    model.load_arrays(arrays)
    return model
