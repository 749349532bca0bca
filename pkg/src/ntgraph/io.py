"""Reading and writing graphs.

Two formats are accepted.

``edgelist``
    UTF-8 text, one ``src dst`` pair per line (tab or space separated);
    ``#`` starts a comment.

``container``
    One JSON document with keys ``num_nodes``, ``directed``, ``edges``
    (list of ``[src, dst]``), and optionally ``features``, ``labels``
    (``-1`` for unlabeled), ``masks`` (``{"train": [ids], ...}``) and
    ``edge_attrs``.

For an edge-list file ``g.txt`` these sidecars are picked up when present:
``g.features.csv`` (or ``g.features.bin`` plus ``g.features.json`` holding
``{"rows", "cols"}``; little-endian float32, row-major), ``g.labels.txt``
(one integer per line) and ``g.masks.json``.
"""

import json
import os
import warnings
from pathlib import Path

import numpy as np

from .errors import BoundsError, IdError, ParseError
from .graph import UNLABELED, from_edges


def _read_source(source):
    if isinstance(source, os.PathLike):
        return Path(source).read_text(encoding="utf-8"), Path(source)
    if isinstance(source, str) and "\n" not in source and os.path.isfile(source):
        return Path(source).read_text(encoding="utf-8"), Path(source)
    return str(source), None


def parse_edge_list(text):
    """Return ``(src, dst)`` integer arrays from edge-list text."""
    src, dst = [], []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) < 2:
            raise ParseError(f"expected 'src dst', got {raw.strip()!r}", line=lineno)
        try:
            s, d = int(parts[0]), int(parts[1])
        except ValueError:
            raise ParseError(f"non-integer node id in {raw.strip()!r}", line=lineno) from None
        if s < 0 or d < 0:
            raise ParseError("node ids must be non-negative", line=lineno)
        src.append(s)
        dst.append(d)
    return np.array(src, dtype=np.int64), np.array(dst, dtype=np.int64)


def _resolve_ids(src, dst, num_nodes, remap):
    """Check ids against ``num_nodes`` or compact them to 0..n-1."""
    if num_nodes is not None:
        if src.size and max(src.max(), dst.max()) >= num_nodes:
            bad = int(max(src.max(), dst.max()))
            raise BoundsError(f"node id {bad} out of range for num_nodes={num_nodes}")
        return int(num_nodes), src, dst, None
    ids = np.unique(np.concatenate([src, dst]))
    if ids.size == 0:
        return 0, src, dst, None
    if ids[-1] == ids.size - 1:
        return int(ids.size), src, dst, None
    if not remap:
        raise IdError("node ids are not contiguous from 0; pass remap=True to compact them")
    warnings.warn(f"remapping {ids.size} non-contiguous node ids to 0..{ids.size - 1}", stacklevel=3)
    return int(ids.size), np.searchsorted(ids, src), np.searchsorted(ids, dst), ids


def read_features(path):
    """Load a features sidecar (CSV text or float32 binary with JSON shape)."""
    path = Path(path)
    if path.suffix == ".bin":
        meta = json.loads(path.with_suffix(".json").read_text())
        data = np.fromfile(path, dtype="<f4")
        rows, cols = int(meta["rows"]), int(meta["cols"])
        if data.size != rows * cols:
            raise ParseError(f"{path}: expected {rows}x{cols} floats, found {data.size}")
        return data.reshape(rows, cols).astype(np.float64)
    rows = []
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not raw.strip():
            continue
        try:
            rows.append([float(v) for v in raw.split(",")])
        except ValueError:
            raise ParseError(f"{path}: bad float", line=lineno) from None
    if len({len(r) for r in rows}) > 1:
        raise ParseError(f"{path}: ragged feature rows")
    return np.array(rows, dtype=np.float64)


def write_features(path, features):
    path = Path(path)
    features = np.asarray(features)
    if path.suffix == ".bin":
        features.astype("<f4").tofile(path)
        path.with_suffix(".json").write_text(json.dumps({"rows": features.shape[0], "cols": features.shape[1]}))
    else:
        path.write_text("".join(",".join(repr(float(v)) for v in row) + "\n" for row in features))


def _masks_from_lists(masks, n, id_map=None):
    out = {}
    for name in ("train", "val", "test"):
        m = np.zeros(n, dtype=bool)
        ids = np.asarray((masks or {}).get(name, []), dtype=np.int64)
        if id_map is not None and ids.size:
            ids = np.searchsorted(id_map, ids)
        if ids.size and (ids.min() < 0 or ids.max() >= n):
            raise BoundsError(f"{name} mask id out of range")
        m[ids] = True
        out[f"{name}_mask"] = m
    return out


def _sidecars(path, n):
    fields = {}
    stem = path.with_suffix("")
    csv, binf = Path(f"{stem}.features.csv"), Path(f"{stem}.features.bin")
    if csv.exists():
        fields["features"] = read_features(csv)
    elif binf.exists():
        fields["features"] = read_features(binf)
    labels = Path(f"{stem}.labels.txt")
    if labels.exists():
        vals = [int(v) for v in labels.read_text().split()]
        fields["labels"] = np.array(vals, dtype=np.int64)
    masks = Path(f"{stem}.masks.json")
    if masks.exists():
        fields.update(_masks_from_lists(json.loads(masks.read_text()), n))
    return fields


def load_graph(source, fmt="edgelist", num_nodes=None, directed=False, remap=True):
    """Load a graph from a path or inline text.

    A string is treated as a path when it names an existing file, otherwise
    as the document itself.
    """
    text, path = _read_source(source)
    if fmt == "edgelist":
        src, dst = parse_edge_list(text)
        n, src, dst, _ = _resolve_ids(src, dst, num_nodes, remap)
        fields = _sidecars(path, n) if path is not None else {}
        return from_edges(n, src, dst, directed=directed, **fields)
    if fmt == "container":
        return _parse_container(text)
    raise ValueError(f"unknown graph format {fmt!r}")


def _parse_container(text):
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc.msg}", line=exc.lineno) from None
    edges = doc.get("edges", [])
    try:
        arr = np.array(edges, dtype=np.int64).reshape(-1, 2)
    except ValueError:
        raise ParseError("edges must be a list of [src, dst] pairs") from None
    if arr.size and arr.min() < 0:
        raise BoundsError("negative node id in container edges")
    n, src, dst, id_map = _resolve_ids(arr[:, 0], arr[:, 1], doc.get("num_nodes"), True)
    fields = {}
    if doc.get("features") is not None:
        fields["features"] = np.array(doc["features"], dtype=np.float64).reshape(n, -1)
    if doc.get("labels") is not None:
        fields["labels"] = np.array([UNLABELED if v is None else v for v in doc["labels"]], dtype=np.int64)
    fields.update(_masks_from_lists(doc.get("masks"), n, id_map))
    attrs = doc.get("edge_attrs")
    if attrs is not None:
        attrs = np.array(attrs, dtype=np.float64).reshape(arr.shape[0], -1)
    return from_edges(n, src, dst, directed=bool(doc.get("directed", False)), edge_attrs=attrs, **fields)


def graph_to_container(g):
    """Serializable dict; every stored directed edge is listed once."""
    doc = {
        "num_nodes": g.num_nodes,
        "directed": bool(g.directed),
        "edges": g.edges().tolist(),
        "features": g.features.tolist(),
        "labels": g.labels.tolist(),
        "masks": {
            "train": np.flatnonzero(g.train_mask).tolist(),
            "val": np.flatnonzero(g.val_mask).tolist(),
            "test": np.flatnonzero(g.test_mask).tolist(),
        },
    }
    if g.edge_attrs is not None:
        doc["edge_attrs"] = g.edge_attrs.tolist()
    return doc


def dumps_graph(g):
    return json.dumps(graph_to_container(g), separators=(",", ":"))


def save_graph(g, path):
    Path(path).write_text(dumps_graph(g), encoding="utf-8")
