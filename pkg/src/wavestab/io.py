"""Deterministic CSV/JSON writers that refuse to clobber existing files."""

import csv
import json
import math
from pathlib import Path

import numpy as np

from .exceptions import ConfigError

__all__ = ["fmt", "write_csv", "write_json", "check_writable", "to_jsonable"]


def fmt(v):
    """Shortest round-trip text for a float; integers stay integers."""
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return repr(v)


def check_writable(paths, force=False):
    """Raise :class:`ConfigError` if any path exists and ``force`` is off."""
    if force:
        return
    clash = [str(p) for p in paths if Path(p).exists()]
    if clash:
        raise ConfigError(f"refusing to overwrite {', '.join(clash)} (use --force)")


def write_csv(path, columns, header_comments=None, force=False):
    """Write equal-length columns (a dict, insertion order kept)."""
    path = Path(path)
    check_writable([path], force)
    names = list(columns)
    cols = [np.asarray(columns[k]).ravel() for k in names]
    n = len(cols[0]) if cols else 0
    if any(len(c) != n for c in cols):
        raise ValueError("columns differ in length")
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        for key, val in (header_comments or {}).items():
            fh.write(f"# {key} = {fmt(val)}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(names)
        for i in range(n):
            w.writerow([fmt(c[i]) for c in cols])
    return path


def to_jsonable(obj):
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
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def write_json(path, obj, force=False):
    path = Path(path)
    check_writable([path], force)
    path.parent.mkdir(parents=True, exist_ok=True)
    text = json.dumps(to_jsonable(obj), indent=2, sort_keys=True)
    path.write_text(text + "\n")
    return path
