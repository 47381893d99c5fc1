"""Chain files and deterministic serialisation.

A chain file is a JSON object ``{"states": [...], "matrix": [[...]], "pi": [...]}``
where ``pi`` is optional.  A distribution file is either a JSON list or an
object with a ``pi`` field.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import math
from pathlib import Path

import numpy as np

from .chain import STOCHASTIC_TOL
from .errors import ChainParseError


def _reject_constant(name):
    raise ValueError(f"non-finite literal {name} is not allowed")


def _load_json(path):
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ChainParseError(f"{p}: cannot read file ({exc.strerror})") from None
    try:
        return json.loads(text, parse_constant=_reject_constant)
    except json.JSONDecodeError as exc:
        raise ChainParseError(f"{p}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    except ValueError as exc:
        raise ChainParseError(f"{p}: {exc}") from None


def _number(v, where):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ChainParseError(f"{where}: expected a number, got {type(v).__name__}")
    if not math.isfinite(v):
        raise ChainParseError(f"{where}: non-finite value")
    if v < 0:
        raise ChainParseError(f"{where}: negative value {v!r}")
    return float(v)


def _vector(raw, where, n=None):
    if not isinstance(raw, list):
        raise ChainParseError(f"{where}: expected a list")
    if n is not None and len(raw) != n:
        raise ChainParseError(f"{where}: expected {n} entries, got {len(raw)}")
    return np.array([_number(v, f"{where}[{i}]") for i, v in enumerate(raw)])


def _check_sum(vec, where):
    if abs(vec.sum() - 1.0) > STOCHASTIC_TOL:
        raise ChainParseError(f"{where}: entries sum to {vec.sum()!r}, not 1")


def parse_chain(doc, source: str = "<chain>"):
    """Validate a decoded chain document.

    Returns
    -------
    states : list of str
    P : ndarray
    pi : ndarray or None
    """
    if not isinstance(doc, dict):
        raise ChainParseError(f"{source}: top level must be an object")
    if "matrix" not in doc:
        raise ChainParseError(f"{source}: missing field 'matrix'")
    rows = doc["matrix"]
    if not isinstance(rows, list) or not rows:
        raise ChainParseError(f"{source}: field 'matrix' must be a non-empty list of rows")
    n = len(rows)
    states = doc.get("states", [str(i) for i in range(n)])
    if not isinstance(states, list) or len(states) != n:
        raise ChainParseError(f"{source}: field 'states' must list {n} labels")
    states = [str(s) for s in states]
    if len(set(states)) != n:
        raise ChainParseError(f"{source}: field 'states' has duplicate labels")
    P = np.empty((n, n))
    for i, row in enumerate(rows):
        P[i] = _vector(row, f"{source}: matrix[{i}]", n)
        _check_sum(P[i], f"{source}: matrix[{i}]")
    pi = None
    if doc.get("pi") is not None:
        pi = _vector(doc["pi"], f"{source}: pi", n)
        _check_sum(pi, f"{source}: pi")
    return states, P, pi


def load_chain(path):
    return parse_chain(_load_json(path), str(path))


def load_distribution(path, n: int | None = None) -> np.ndarray:
    doc = _load_json(path)
    if isinstance(doc, dict):
        if "pi" not in doc:
            raise ChainParseError(f"{path}: missing field 'pi'")
        doc = doc["pi"]
    pi = _vector(doc, f"{path}: pi", n)
    _check_sum(pi, f"{path}: pi")
    return pi


def chain_document(P, pi=None, states=None) -> dict:
    P = np.asarray(P, dtype=float)
    doc = {
        "states": list(states) if states is not None else [str(i) for i in range(P.shape[0])],
        "matrix": P.tolist(),
    }
    if pi is not None:
        doc["pi"] = np.asarray(pi, dtype=float).tolist()
    return doc


# ---------------------------------------------------------------------------
# output


def to_plain(obj):
    """Convert results to JSON-ready values.

    Dataclasses become dicts, arrays become nested lists, numpy scalars
    become Python scalars, and non-finite floats become the strings
    ``"inf"``, ``"-inf"`` and ``"nan"``.
    """
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: to_plain(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, dict):
        return {str(k): to_plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_plain(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    return obj


def dumps(doc) -> str:
    """Sorted-key JSON; floats use the shortest round-trip representation."""
    return json.dumps(to_plain(doc), sort_keys=True, indent=2, allow_nan=False) + "\n"


def _flatten(prefix, value, out):
    if isinstance(value, dict):
        for k in sorted(value):
            _flatten(f"{prefix}.{k}" if prefix else k, value[k], out)
    elif isinstance(value, list):
        for i, v in enumerate(value):
            _flatten(f"{prefix}[{i}]", v, out)
    else:
        out.append((prefix, value))


def to_csv(doc) -> str:
    """Two-column ``key,value`` CSV of the flattened document."""
    rows = []
    _flatten("", to_plain(doc), rows)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["key", "value"])
    for k, v in rows:
        w.writerow([k, json.dumps(v) if not isinstance(v, str) else v])
    return buf.getvalue()
