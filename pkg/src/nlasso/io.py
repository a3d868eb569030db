"""JSON artifacts: graphs, partitions, labels, solver results and certificates.

Every file written here carries a ``"meta"`` block with the package version.
Readers validate structure before returning and raise
:class:`~nlasso.errors.InputFileError` naming the file and the field.
"""
from __future__ import annotations

import json
import math

import numpy as np

from . import __version__
from .errors import GraphError, InputFileError, PartitionError
from .experiments import atomic_write_text
from .graph import EmpiricalGraph, Partition, build_graph, make_partition
from .signal import LabelSet


def meta_block(**extra) -> dict:
    return {"package": "nlasso", "version": __version__, **extra}


def _json_default(obj):
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def _clean(obj):
    # JSON has no inf/nan; write them as strings
    if isinstance(obj, float) and not math.isfinite(obj):
        return "nan" if math.isnan(obj) else ("inf" if obj > 0 else "-inf")
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    return obj


def write_json(path, payload: dict, **meta) -> None:
    """Atomically write ``payload`` plus a metadata block as sorted JSON."""
    doc = dict(payload)
    doc["meta"] = meta_block(**meta)
    text = json.dumps(_clean(json.loads(json.dumps(doc, default=_json_default))), indent=1, sort_keys=True)
    atomic_write_text(path, text + "\n")


def read_json(path) -> dict:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise InputFileError(f"{path}: cannot read ({exc.strerror})") from None
    except json.JSONDecodeError as exc:
        raise InputFileError(f"{path}: invalid JSON ({exc.msg} at line {exc.lineno})") from None
    if not isinstance(doc, dict):
        raise InputFileError(f"{path}: top level must be an object")
    return doc


def _field(doc, path, name, kind=None):
    if name not in doc:
        raise InputFileError(f"{path}: missing field '{name}'")
    value = doc[name]
    if kind is not None and not isinstance(value, kind):
        raise InputFileError(f"{path}: field '{name}' has the wrong type")
    return value


def _int(value, path, name):
    if (
        isinstance(value, bool)
        or not isinstance(value, (int, float))
        or not math.isfinite(value)
        or float(value) != int(value)
    ):
        raise InputFileError(f"{path}: field '{name}' must be an integer, got {value!r}")
    return int(value)


def _num(value, path, name):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise InputFileError(f"{path}: field '{name}' must be a number, got {value!r}")
    return float(value)


def graph_to_dict(g: EmpiricalGraph) -> dict:
    return {"nodes": g.n_nodes, "edges": [[i, j, w] for i, j, w in g.edge_list()]}


def write_graph(path, g: EmpiricalGraph, **meta) -> None:
    write_json(path, graph_to_dict(g), **meta)


def read_graph(path) -> EmpiricalGraph:
    doc = read_json(path)
    n = _int(_field(doc, path, "nodes"), path, "nodes")
    edges = _field(doc, path, "edges", list)
    parsed = []
    for k, e in enumerate(edges):
        name = f"edges[{k}]"
        if not isinstance(e, list) or len(e) != 3:
            raise InputFileError(f"{path}: field '{name}' must be [i, j, w]")
        parsed.append((_int(e[0], path, name), _int(e[1], path, name), _num(e[2], path, name)))
    try:
        return build_graph(n, parsed)
    except GraphError as exc:
        raise InputFileError(f"{path}: field 'edges': {exc}") from None


def write_partition(path, p: Partition, **meta) -> None:
    write_json(path, {"clusters": [c.tolist() for c in p.clusters]}, **meta)


def read_partition(path, g: EmpiricalGraph) -> Partition:
    doc = read_json(path)
    clusters = _field(doc, path, "clusters", list)
    parsed = []
    for k, c in enumerate(clusters):
        if not isinstance(c, list):
            raise InputFileError(f"{path}: field 'clusters[{k}]' must be a list of node ids")
        parsed.append([_int(v, path, f"clusters[{k}]") for v in c])
    try:
        return make_partition(g, parsed)
    except (PartitionError, GraphError) as exc:
        raise InputFileError(f"{path}: field 'clusters': {exc}") from None


def write_labels(path, labels: LabelSet, sigma: float, seed: int, **meta) -> None:
    write_json(
        path,
        {
            "training_set": labels.nodes.tolist(),
            "labels": {str(int(i)): float(y) for i, y in zip(labels.nodes, labels.values)},
            "sigma": float(sigma),
            "seed": int(seed),
        },
        **meta,
    )


def read_training_set(path, n_nodes: int | None = None) -> np.ndarray:
    """The ``training_set`` list of a label (or training-set) file."""
    doc = read_json(path)
    nodes = _field(doc, path, "training_set", list)
    out = [_int(v, path, "training_set") for v in nodes]
    if not out:
        raise InputFileError(f"{path}: field 'training_set' is empty")
    if len(set(out)) != len(out):
        raise InputFileError(f"{path}: field 'training_set' lists a node twice")
    if n_nodes is not None and not all(0 <= v < n_nodes for v in out):
        raise InputFileError(f"{path}: field 'training_set' has ids outside 0..{n_nodes - 1}")
    return np.array(sorted(out), dtype=np.intp)


def read_labels(path, n_nodes: int | None = None) -> LabelSet:
    doc = read_json(path)
    nodes = read_training_set(path, n_nodes)
    raw = _field(doc, path, "labels", dict)
    by_node = {}
    for key, value in raw.items():
        try:
            node = int(key)
        except ValueError:
            raise InputFileError(f"{path}: field 'labels' has non-integer key {key!r}") from None
        by_node[node] = _num(value, path, f"labels[{key}]")
    if set(by_node) != set(nodes.tolist()):
        raise InputFileError(f"{path}: field 'labels' keys must match 'training_set'")
    values = [by_node[i] for i in nodes.tolist()]
    if not all(math.isfinite(v) for v in values):
        raise InputFileError(f"{path}: field 'labels' has non-finite values")
    return LabelSet(nodes, np.array(values))


def write_signal(path, x, **meta) -> None:
    write_json(path, {"x": [float(v) for v in np.asarray(x, dtype=float)]}, **meta)


def read_signal(path, n_nodes: int | None = None) -> np.ndarray:
    doc = read_json(path)
    x = _field(doc, path, "x", list)
    out = np.array([_num(v, path, "x") for v in x])
    if n_nodes is not None and len(out) != n_nodes:
        raise InputFileError(f"{path}: field 'x' has {len(out)} entries, graph has {n_nodes} nodes")
    return out
