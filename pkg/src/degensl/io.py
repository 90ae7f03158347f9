"""Deterministic text artifacts: CSV tables and JSON with full-precision floats."""
from __future__ import annotations

import csv
import math
from pathlib import Path

import numpy as np

from .errors import ValidationError

FLOAT_FORMAT = "%.16e"


def fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return FLOAT_FORMAT % float(value)


def write_csv(path, header, rows) -> Path:
    """Comma-separated table with a header row; floats in 17 significant digits."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(header)
        for row in rows:
            out.writerow([fmt(v) for v in row])
    return path


def read_csv(path):
    path = Path(path)
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        return [], np.zeros((0, 0))
    header, body = rows[0], rows[1:]
    if any(len(r) != len(header) for r in body):
        raise ValidationError(f"{path}: ragged rows")
    try:
        data = np.array([[float(v) for v in r] for r in body], dtype=float)
    except ValueError:
        raise ValidationError(f"{path}: non-numeric entry") from None
    return header, data.reshape(len(body), len(header))


def _encode(obj, indent: int, level: int) -> str:
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if obj is None:
        return "null"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return FLOAT_FORMAT % obj if math.isfinite(obj) else "null"
    if isinstance(obj, (complex, np.complexfloating)):
        return _encode([obj.real, obj.imag], indent, level)
    if isinstance(obj, str):
        import json

        return json.dumps(obj)
    if isinstance(obj, np.ndarray):
        return _encode(obj.tolist(), indent, level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{_encode(str(k), indent, level + 1)}: {_encode(v, indent, level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple, np.ndarray)) for v in obj):
            return "[" + ", ".join(_encode(v, indent, level + 1) for v in obj) + "]"
        items = [pad + _encode(v, indent, level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj, indent: int = 2) -> str:
    """JSON text with every float written as %.16e (non-finite floats become null)."""
    return _encode(obj, indent, 0) + "\n"


def write_json(path, obj) -> Path:
    path = Path(path)
    path.write_text(dumps(obj))
    return path
