"""JSON documents for MDPs and labelled matrices.

MDP document::

    {"name": "...", "states": [...], "actions": [...], "gamma": 0.9,
     "initial": {"s0": 1.0},
     "policy": {"s0": {"a": 1.0}},
     "transition": {"s0,a": {"s1": 1.0}},
     "reward": {"s0,a": 0.0}}

Omitted probabilities and rewards are zero. Matrix documents carry
``row_labels``, ``col_labels``, ``entries`` (``"inf"`` for infinity) and a
``metadata`` object. Floats are written in shortest round-trip form.
"""

from __future__ import annotations

import json
import math

import numpy as np

from .errors import ParseError
from .mdp_core import validate


def parse_mdp_document(text):
    """Parse document text into the raw mapping accepted by :func:`validate`."""
    try:
        raw = json.loads(text)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ParseError(f"not a JSON document: {exc}") from exc
    if not isinstance(raw, dict):
        raise ParseError("MDP document must be a JSON object")
    return raw


def read_text(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read()
    except (OSError, UnicodeDecodeError) as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc


def load_mdp(path):
    return validate(parse_mdp_document(read_text(path)))


def parse_mdp(text):
    return validate(parse_mdp_document(text))


def mdp_to_document(mdp):
    """Canonical document for a validated MDP (zero entries omitted)."""
    doc = {"name": mdp.name, "states": list(mdp.states), "actions": list(mdp.actions),
           "gamma": mdp.gamma}
    doc["initial"] = {s: float(p) for s, p in zip(mdp.states, mdp.initial) if p != 0}
    doc["policy"] = {
        s: {a: float(mdp.policy[i, j]) for j, a in enumerate(mdp.actions) if mdp.policy[i, j] != 0}
        for i, s in enumerate(mdp.states)
    }
    transition = {}
    reward = {}
    for i, s in enumerate(mdp.states):
        for j, a in enumerate(mdp.actions):
            transition[f"{s},{a}"] = {
                s2: float(mdp.transition[i, j, k])
                for k, s2 in enumerate(mdp.states) if mdp.transition[i, j, k] != 0
            }
            if mdp.reward[i, j] != 0:
                reward[f"{s},{a}"] = float(mdp.reward[i, j])
    doc["transition"] = transition
    doc["reward"] = reward
    return doc


def dumps(doc):
    return json.dumps(doc, indent=2, ensure_ascii=False) + "\n"


def serialize_mdp(mdp):
    return dumps(mdp_to_document(mdp))


def _encode(x):
    x = float(x)
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    if math.isnan(x):
        return "nan"
    return x


def _decode(x):
    if isinstance(x, str):
        if x in ("inf", "-inf", "nan"):
            return float(x)
        raise ParseError(f"bad matrix entry {x!r}")
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise ParseError(f"bad matrix entry {x!r}")
    return float(x)


def matrix_document(row_labels, col_labels, entries, **metadata):
    entries = np.asarray(entries, dtype=float)
    if entries.ndim == 1:
        entries = entries[:, None]
    if entries.shape != (len(row_labels), len(col_labels)):
        raise ValueError("entries shape does not match labels")
    return {
        "row_labels": list(row_labels),
        "col_labels": list(col_labels),
        "entries": [[_encode(v) for v in row] for row in entries],
        "metadata": metadata,
    }


def read_matrix_document(text):
    """Inverse of :func:`matrix_document`: (row_labels, col_labels, array, metadata)."""
    try:
        doc = json.loads(text)
        rows, cols = doc["row_labels"], doc["col_labels"]
        entries = np.array([[_decode(v) for v in row] for row in doc["entries"]], dtype=float)
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise ParseError(f"malformed matrix document: {exc}") from exc
    if entries.shape != (len(rows), len(cols)):
        raise ParseError("matrix entries do not match labels")
    return rows, cols, entries, doc.get("metadata", {})


def pair_label(pair):
    return f"{pair[0]},{pair[1]}"
