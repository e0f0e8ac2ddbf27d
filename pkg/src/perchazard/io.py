"""Data files: delimited text with a ``# key=value`` header, or JSON.

Text layout::

    # format=market-path
    # version="0.1.0"
    # lattice.L=100
    # ...
    t,p,h,price,crash
    0.0,0.3,0.0,1.0,0

Header values are JSON literals; nested dictionaries are flattened to dotted
keys. Floats are written with ``repr`` so every file round-trips exactly.
Empty cells stand for missing values (read back as NaN).
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .analysis import HazardCurve
from .market import CrashEvent, MarketPath

__all__ = [
    "flatten",
    "unflatten",
    "write_table",
    "read_table",
    "write_path",
    "read_path",
    "write_curve",
    "read_curve",
    "write_events",
    "read_events",
]

try:
    from importlib.metadata import version as _pkg_version

    VERSION = _pkg_version("artifact")
except Exception:  # pragma: no cover - not installed
    VERSION = "0.1.0"


def flatten(d: dict, prefix: str = "") -> dict:
    out = {}
    for k, v in d.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict) and v:
            out.update(flatten(v, key + "."))
        else:
            out[key] = v
    return out


def unflatten(flat: dict) -> dict:
    out: dict = {}
    for key, v in flat.items():
        node = out
        parts = key.split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
        node[parts[-1]] = v
    return out


def _cell(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    return "" if math.isnan(x) else repr(x)


def _to_jsonable(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None
    if isinstance(v, np.generic):
        return _to_jsonable(v.item())
    if isinstance(v, (list, tuple)):
        return [_to_jsonable(x) for x in v]
    if isinstance(v, dict):
        return {k: _to_jsonable(x) for k, x in v.items()}
    return v


def write_table(path, kind: str, header: dict, columns: dict, fmt: str | None = None) -> Path:
    """Write named, equal-length columns. ``fmt`` is inferred from the suffix."""
    path = Path(path)
    fmt = fmt or ("json" if path.suffix == ".json" else "csv")
    names = list(columns)
    cols = [np.asarray(columns[n]) for n in names]
    if len({c.size for c in cols}) > 1:
        raise ValueError("columns differ in length")
    path.parent.mkdir(parents=True, exist_ok=True)
    if fmt == "json":
        doc = {
            "format": kind,
            "version": VERSION,
            "header": _to_jsonable(header),
            "columns": names,
            "data": {n: _to_jsonable(c.tolist()) for n, c in zip(names, cols)},
        }
        path.write_text(json.dumps(doc, indent=1) + "\n")
        return path
    lines = [f"# format={json.dumps(kind)}", f"# version={json.dumps(VERSION)}"]
    for k, v in flatten(header).items():
        lines.append(f"# {k}={json.dumps(_to_jsonable(v), sort_keys=True)}")
    lines.append(",".join(names))
    n_rows = cols[0].size if cols else 0
    for i in range(n_rows):
        lines.append(",".join(_cell(c[i]) for c in cols))
    path.write_text("\n".join(lines) + "\n")
    return path


def read_table(path):
    """Return ``(kind, header, columns)`` with columns as float/int arrays."""
    path = Path(path)
    text = path.read_text()
    if path.suffix == ".json":
        doc = json.loads(text)
        cols = {n: np.array([math.nan if x is None else x for x in doc["data"][n]])
                for n in doc["columns"]}
        return doc["format"], doc.get("header", {}), cols
    flat = {}
    kind = None
    body = []
    for line in text.splitlines():
        if line.startswith("# "):
            key, _, value = line[2:].partition("=")
            value = json.loads(value)
            if key == "format":
                kind = value
            elif key != "version":
                flat[key] = value
        elif line.strip():
            body.append(line)
    names = body[0].split(",")
    raw = [row.split(",") for row in body[1:]]
    cols = {}
    for j, n in enumerate(names):
        cells = [r[j] for r in raw]
        if all(c and c.lstrip("-").isdigit() for c in cells):
            cols[n] = np.array([int(c) for c in cells], dtype=np.int64)
        else:
            cols[n] = np.array([float(c) if c else math.nan for c in cells], dtype=float)
    return kind, unflatten(flat), cols


# ---------------------------------------------------------------------------
# typed helpers


def write_path(path, mp: MarketPath, header: dict | None = None, fmt: str | None = None) -> Path:
    hdr = dict(header or {})
    hdr.setdefault("run", {}).update(_to_jsonable(mp.meta))
    cols = {"t": mp.t, "p": mp.p, "h": mp.h, "price": mp.price, "crash": mp.crash.astype(np.int64)}
    return write_table(path, "market-path", hdr, cols, fmt)


def read_path(path) -> MarketPath:
    kind, header, c = read_table(path)
    if kind != "market-path":
        raise ValueError(f"{path} holds {kind!r}, not a market path")
    meta = header.pop("run", {})
    mp = MarketPath(c["t"], c["p"], c["h"], c["price"], c["crash"], meta=meta)
    mp.header = header
    return mp


def write_events(path, events: list[CrashEvent], header: dict | None = None, fmt: str | None = None) -> Path:
    cols = {
        "t": np.array([e.t for e in events], dtype=float),
        "h": np.array([e.h for e in events], dtype=float),
        "p": np.array([e.p for e in events], dtype=float),
    }
    return write_table(path, "crash-events", header or {}, cols, fmt)


def read_events(path) -> list[CrashEvent]:
    kind, _, c = read_table(path)
    if kind != "crash-events":
        raise ValueError(f"{path} holds {kind!r}, not crash events")
    return [CrashEvent(float(t), float(h), float(p)) for t, h, p in zip(c["t"], c["h"], c["p"])]


def write_curve(path, curve: HazardCurve, header: dict | None = None, fmt: str | None = None) -> Path:
    hdr = dict(header or {})
    hdr["curve"] = {"L": curve.L, "mode": curve.mode, "model": curve.model}
    cols = {"p": curve.p, "h_mean": curve.h_mean, "h_stderr": curve.h_stderr,
            "replicas": curve.replicas.astype(np.int64)}
    return write_table(path, "hazard-curve", hdr, cols, fmt)


def read_curve(path) -> HazardCurve:
    kind, header, c = read_table(path)
    if kind != "hazard-curve":
        raise ValueError(f"{path} holds {kind!r}, not a hazard curve")
    meta = header.get("curve", {})
    curve = HazardCurve(c["p"], c["h_mean"], c["h_stderr"], c["replicas"].astype(np.int64),
                        int(meta.get("L", 0)), meta.get("mode", "reshuffled"), meta.get("model", {}))
    curve.header = header
    return curve
