"""JSON input detection, model loading and deterministic report output."""
from __future__ import annotations

import json
import math
from fractions import Fraction
from pathlib import Path

import numpy as np

from ._constants import DECISION_CAP
from .core import KINDS, FactoredMDP, build_decision_model, explicit_model
from .errors import ValidationError


def load_json(path):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ValidationError(f"{path}: cannot read ({exc.strerror})") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}") from exc
    if not isinstance(data, dict):
        raise ValidationError(f"{path}: top level must be a JSON object")
    return data


def input_kind(data):
    """One of ``walk``, ``chain``, ``explicit`` or ``model``."""
    if "actions" in data:
        return "walk"
    if "decisions" in data:
        return "explicit"
    if "Q" in data:
        return "chain"
    if "transitions" in data:
        return "model"
    raise ValidationError("input: cannot tell the schema (expected 'actions', 'decisions', 'Q' or 'transitions')")


def load_explicit(data):
    for key in ("decisions", "R", "Q"):
        if key not in data:
            raise ValidationError(f"explicit model: missing field {key!r}")
    R = np.asarray(data["R"], dtype=np.float64)
    Q = np.asarray(data["Q"], dtype=np.float64)
    decisions = [tuple(int(a) for a in d) for d in data["decisions"]]
    K = len(decisions)
    if R.ndim != 2 or R.shape[0] != K:
        raise ValidationError(f"explicit model.R: expected {K} reward vectors, got shape {R.shape}")
    M = R.shape[1]
    if Q.shape != (K, M, M):
        raise ValidationError(f"explicit model.Q: expected shape {(K, M, M)}, got {Q.shape}")
    if len(set(decisions)) != K:
        raise ValidationError("explicit model.decisions: duplicates")
    return explicit_model(decisions, R, Q)


def load_model(data, cap=DECISION_CAP):
    """Decision model for any model-like input.

    Returns ``(model, mdp, W0)``. Walk specs become their folded
    Gauss-Seidel model started from the boundary block; factored models
    honour an optional ``"kind"`` field.
    """
    from .walk import RandomWalkSpec, derive

    kind = input_kind(data)
    if kind == "walk":
        spec = RandomWalkSpec.from_dict(data)
        derived = derive(spec, cap)
        M = spec.M
        W0 = np.array([-derived.c_star * (s - M) for s in range(M)])
        return derived.folded_model, derived.mdp, W0
    if kind == "explicit":
        return load_explicit(data), None, None
    if kind == "chain":
        raise ValidationError("input is a single chain; this command needs a model")
    mdp = FactoredMDP.from_dict(data)
    k = data.get("kind", "standard")
    if k not in KINDS or k == "explicit":
        raise ValidationError(f"model.kind: must be 'standard' or 'gauss-seidel', got {k!r}")
    return build_decision_model(mdp, k, cap), mdp, None


def jsonable(obj):
    """Recursively convert numpy, tuples and rationals to plain JSON types."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float, Fraction)):
        x = float(obj)
        return x if math.isfinite(x) else None
    return obj


def dumps(obj):
    return json.dumps(jsonable(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


def write_text(path, text):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    return path
