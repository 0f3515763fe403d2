"""Strict-JSON output helpers."""

import json
import math

import numpy as np


def to_jsonable(obj):
    """Convert numpy scalars/arrays to Python types; non-finite floats become strings.

    Strict JSON has no inf/nan; ``"inf"``, ``"-inf"`` and ``"nan"`` are
    written instead and :func:`from_json_float` reads them back.
    """
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [to_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isfinite(x):
            return x
        return "nan" if math.isnan(x) else ("inf" if x > 0 else "-inf")
    return obj


def from_json_float(x):
    return float(x) if isinstance(x, str) else x


def write_json(path, obj):
    with open(path, "w", newline="\n") as fh:
        json.dump(to_jsonable(obj), fh, indent=2, sort_keys=True, allow_nan=False)
        fh.write("\n")


def read_json(path):
    with open(path) as fh:
        return json.load(fh)
