"""Scenario JSON, metrics CSV and summary JSON persistence."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Iterable, Union

import numpy as np

from .diagnostics import MetricsRecord
from .model import ScenarioError, ScenarioInstance, build_graph

__all__ = [
    "ParseError",
    "ValidationError",
    "METRICS_COLUMNS",
    "scenario_to_dict",
    "scenario_from_dict",
    "save_scenario",
    "load_scenario",
    "save_metrics",
    "load_metrics",
    "save_json",
]

METRICS_COLUMNS = ("iter", "rmse_sensor", "rmse_target", "S", "W", "P", "G", "potential", "wall_nanos")

PathLike = Union[str, Path]


class ParseError(ValueError):
    """Malformed file: bad JSON or a missing/ill-typed field."""


class ValidationError(ValueError):
    """Well-formed file describing an invalid scenario."""


def _num(v: float) -> float:
    # repr of a Python float is the shortest string that round-trips exactly
    return float(v)


def scenario_to_dict(scn: ScenarioInstance) -> dict:
    g = scn.graph
    nodes = []
    for i in range(g.num_nodes):
        entry = {"id": i, "kind": "anchor" if g.is_anchor(i) else "agent"}
        if g.is_anchor(i):
            entry["position"] = [_num(v) for v in scn.anchor_positions[i]]
        elif scn.true_positions is not None:
            entry["position"] = [_num(v) for v in scn.true_positions[i]]
        nodes.append(entry)
    out = {
        "dimension": scn.dimension,
        "nodes": nodes,
        "edges": [{"i": i, "j": j, "distance": _num(d)} for (i, j), d in sorted(scn.edge_distances.items())],
        "target_ranges": [{"node": i, "r": _num(scn.target_ranges[i])} for i in range(g.num_nodes)],
    }
    if scn.true_target is not None:
        out["target_true"] = [_num(v) for v in scn.true_target]
    return out


def _field(obj, key, where):
    try:
        return obj[key]
    except (KeyError, TypeError, IndexError):
        raise ParseError(f"missing field {key!r} in {where}") from None


def scenario_from_dict(data: dict) -> ScenarioInstance:
    n = _field(data, "dimension", "scenario")
    if not isinstance(n, int):
        raise ParseError("field 'dimension' must be an integer")
    nodes = _field(data, "nodes", "scenario")
    num_nodes = len(nodes)
    anchors, anchor_pos = [], {}
    truth = np.full((num_nodes, n), np.nan)
    for k, node in enumerate(nodes):
        where = f"nodes[{k}]"
        nid = _field(node, "id", where)
        kind = _field(node, "kind", where)
        if nid != k:
            raise ValidationError(f"{where}: node ids must be 0..N-1 in order, got {nid}")
        if kind not in ("anchor", "agent"):
            raise ParseError(f"{where}: kind must be 'anchor' or 'agent', got {kind!r}")
        pos = node.get("position")
        if pos is not None:
            truth[k] = np.asarray(pos, dtype=float)
        if kind == "anchor":
            if pos is None:
                raise ValidationError(f"{where}: anchor without position")
            anchors.append(k)
            anchor_pos[k] = np.asarray(pos, dtype=float)
    edges, dist = [], {}
    for k, e in enumerate(_field(data, "edges", "scenario")):
        where = f"edges[{k}]"
        i, j = _field(e, "i", where), _field(e, "j", where)
        d = e.get("distance") if isinstance(e, dict) else None
        if d is None:
            raise ValidationError(f"{where}: edge ({i}, {j}) has no distance measurement")
        if not isinstance(d, (int, float)) or isinstance(d, bool):
            raise ParseError(f"{where}: distance must be a number, got {d!r}")
        edges.append((i, j))
        dist[(min(i, j), max(i, j))] = float(d)
    ranges = {}
    for k, t in enumerate(_field(data, "target_ranges", "scenario")):
        ranges[int(_field(t, "node", f"target_ranges[{k}]"))] = float(_field(t, "r", f"target_ranges[{k}]"))
    target = data.get("target_true")
    has_all_truth = not np.isnan(truth).any()
    try:
        graph = build_graph(num_nodes, anchors, edges)
        return ScenarioInstance(
            dimension=n,
            graph=graph,
            anchor_positions=anchor_pos,
            edge_distances=dist,
            target_ranges=ranges,
            true_positions=truth if has_all_truth else None,
            true_target=None if target is None else np.asarray(target, dtype=float),
        )
    except ScenarioError as exc:
        raise ValidationError(str(exc)) from exc


def save_scenario(path: PathLike, scn: ScenarioInstance) -> None:
    Path(path).write_text(json.dumps(scenario_to_dict(scn), indent=1) + "\n")


def load_scenario(path: PathLike) -> ScenarioInstance:
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    return scenario_from_dict(data)


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def save_metrics(path: PathLike, records: Iterable[MetricsRecord]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(METRICS_COLUMNS)
        for rec in records:
            writer.writerow([_fmt(getattr(rec, col)) for col in METRICS_COLUMNS])


def load_metrics(path: PathLike) -> list:
    out = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != METRICS_COLUMNS:
            raise ParseError(f"{path}: unexpected header {reader.fieldnames}")
        for row in reader:
            conv = {}
            for col in METRICS_COLUMNS:
                raw = row[col]
                if raw == "":
                    conv[col] = None
                elif col in ("iter", "wall_nanos"):
                    conv[col] = int(raw)
                else:
                    conv[col] = float(raw)
            out.append(MetricsRecord(**conv))
    return out


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        return None if math.isnan(obj) else float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def save_json(path: PathLike, payload: dict) -> None:
    Path(path).write_text(json.dumps(_jsonable(payload), indent=2, sort_keys=True) + "\n")
