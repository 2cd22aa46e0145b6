"""JSON serialization for instances and reports (canonical key order)."""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Any

import numpy as np

from .errors import MalformedInstance
from .graph import (
    CriticalData,
    InterdictionInstance,
    KindRecord,
    NodeRecord,
    ValidatedInstance,
    validate,
)

SCHEMA_VERSION = 1


def instance_to_dict(inst: InterdictionInstance | ValidatedInstance) -> dict[str, Any]:
    raw = inst.instance if isinstance(inst, ValidatedInstance) else inst
    nodes = []
    for i, rec in enumerate(raw.nodes):
        entry: dict[str, Any] = {"id": i, "t_f": rec.base_utility}
        if rec.critical is not None:
            c = rec.critical
            entry.update(
                critical=True, kind=c.kind, w_f=c.adv_slope, w_l=c.def_slope, t_l=c.def_intercept
            )
        nodes.append(entry)
    lx, ux = raw.coverage_bounds
    return {
        "schema": SCHEMA_VERSION,
        "nodes": nodes,
        "arcs": [[u, v] for u, v in raw.arcs],
        "origin": raw.origin,
        "destination": raw.destination,
        "kinds": [{"budget": k.budget} for k in raw.kinds],
        "bounds": {"lx": lx, "ux": ux},
        "mu": raw.mu,
    }


def instance_from_dict(doc: dict[str, Any]) -> InterdictionInstance:
    try:
        if doc.get("schema") != SCHEMA_VERSION:
            raise MalformedInstance(f"unsupported schema version {doc.get('schema')!r}")
        entries = sorted(doc["nodes"], key=lambda e: int(e["id"]))
        if [int(e["id"]) for e in entries] != list(range(len(entries))):
            raise MalformedInstance("node ids must be dense 0..n-1")
        nodes = []
        for e in entries:
            crit = None
            if e.get("critical", False):
                crit = CriticalData(
                    int(e.get("kind", 0)), float(e["w_f"]), float(e["w_l"]), float(e.get("t_l", 0.0))
                )
            nodes.append(NodeRecord(float(e.get("t_f", 0.0)), crit))
        bounds = doc.get("bounds", {"lx": 0.0, "ux": 1.0})
        return InterdictionInstance(
            tuple(nodes),
            tuple((int(u), int(v)) for u, v in doc["arcs"]),
            int(doc["origin"]),
            int(doc["destination"]),
            tuple(KindRecord(float(k["budget"])) for k in doc["kinds"]),
            (float(bounds["lx"]), float(bounds["ux"])),
            float(doc["mu"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, MalformedInstance):
            raise
        raise MalformedInstance(f"malformed instance document: {exc!r}") from exc


def _default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, (set, frozenset, tuple)):
        return list(obj)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _sanitize(obj):
    """Replace non-finite floats with strings so output stays strict JSON."""
    if isinstance(obj, float):
        if math.isnan(obj):
            return "nan"
        if math.isinf(obj):
            return "inf" if obj > 0 else "-inf"
        return obj
    if isinstance(obj, dict):
        return {str(k): _sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_sanitize(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _sanitize(obj.tolist())
    if isinstance(obj, np.generic):
        return _sanitize(obj.item())
    return obj


def dumps(doc: Any) -> str:
    """Canonical text form: sorted keys, two-space indent, trailing newline."""
    return json.dumps(_sanitize(doc), sort_keys=True, indent=2, default=_default, allow_nan=False) + "\n"


def save_instance(inst, path: str | Path) -> None:
    Path(path).write_text(dumps(instance_to_dict(inst)))


def load_instance(path: str | Path) -> ValidatedInstance:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise MalformedInstance(f"{path}: not valid JSON ({exc.msg})") from exc
    return validate(instance_from_dict(doc))


def save_document(doc: Any, path: str | Path) -> None:
    Path(path).write_text(dumps(doc))
