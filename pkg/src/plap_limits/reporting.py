"""CSV and JSON writers shared by the CLI and the sweep."""

from __future__ import annotations

import csv
import json
import math
import platform
from pathlib import Path

import numpy as np

from .geometry import Field


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    return obj


def dumps(obj) -> str:
    """Deterministic JSON; floats use the shortest round-trip repr."""
    return json.dumps(_clean(obj), indent=2, sort_keys=True, allow_nan=False) + "\n"


def write_json(obj, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(obj))
    return path


def write_field_csv(field: Field, path) -> Path:
    """Columns ``x,value`` (``r,value`` on balls) or ``x,y,value``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    d = field.domain
    coords = d.mesh.coords
    if d.shape == "rectangle":
        header = ["x", "y", "value"]
        cols = [coords[0].ravel(), coords[1].ravel(), field.flat]
    else:
        header = ["r" if d.shape == "ball" else "x", "value"]
        cols = [coords[0], field.flat]
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in zip(*cols):
            w.writerow([repr(float(v)) for v in row])
    return path


def read_field_csv(path) -> tuple:
    """Header and a float array, for round-trip checks."""
    with Path(path).open() as fh:
        rows = list(csv.reader(fh))
    return rows[0], np.array(rows[1:], dtype=float)


def write_rows_csv(rows: list, columns: list, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(columns)
        for row in rows:
            out = []
            for c in columns:
                v = row[c]
                out.append(repr(float(v)) if isinstance(v, (float, np.floating)) else str(v))
            w.writerow(out)
    return path


def versions() -> dict:
    import scipy

    from . import __version__

    return {"python": platform.python_version(), "numpy": np.__version__, "scipy": scipy.__version__,
            "plap_limits": __version__}


def human(x) -> str:
    """Ten significant digits for terminal reports."""
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.10g}"
    if isinstance(x, dict):
        return "{" + ", ".join(f"{k}: {human(v)}" for k, v in x.items()) + "}"
    if isinstance(x, (list, tuple)):
        return "[" + ", ".join(human(v) for v in x) + "]"
    return str(x)
