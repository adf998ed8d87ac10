"""On-disk formats: path tables, binary field dumps, CSV slices, JSON reports and manifests.

Binary field format: the ASCII line ``WEFIELD1``, one line of JSON header
({"dtype": "<f8", "shape": [...], ...}), then the raw little-endian C-order array.
"""

from __future__ import annotations

import hashlib
import json
import math
from pathlib import Path

import numpy as np

MAGIC = b"WEFIELD1\n"


def _plain(obj):
    """JSON-ready copy: numpy scalars and arrays to Python, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, np.generic):
        return _plain(obj.item())
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)
    return obj


def dumps_json(obj) -> str:
    return json.dumps(_plain(obj), indent=2, sort_keys=True) + "\n"


def write_json(path, obj) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps_json(obj))
    return path


def write_path_table(path, stopped, cert=None) -> Path:
    """Whitespace table with columns t, beta (stopped), O (Hölder process), frozen."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    t = stopped.times
    O = cert.O_values if cert is not None else np.full(t.size, np.nan)
    frozen = stopped.frozen_mask().astype(int)
    lines = ["# t beta O frozen"]
    lines += [f"{t[k]:.17g} {stopped.values[k]:.17g} {O[k]:.17g} {frozen[k]}" for k in range(t.size)]
    path.write_text("\n".join(lines) + "\n")
    return path


def read_path_table(path) -> np.ndarray:
    return np.loadtxt(path, comments="#")


def write_field(path, array: np.ndarray, **header) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    a = np.ascontiguousarray(array, dtype="<f8")
    head = _plain(header) | {"dtype": "<f8", "shape": list(a.shape)}
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(json.dumps(head, sort_keys=True).encode() + b"\n")
        fh.write(a.tobytes(order="C"))
    return path


def read_field(path) -> tuple[np.ndarray, dict]:
    with open(path, "rb") as fh:
        if fh.readline() != MAGIC:
            raise ValueError(f"{path} is not a field dump")
        head = json.loads(fh.readline())
        data = np.frombuffer(fh.read(), dtype=head["dtype"]).reshape(head["shape"])
    return data.copy(), head


def write_csv_slice(path, grid, field2d: np.ndarray, name: str = "value") -> Path:
    """Long-format CSV (x, y, value) of one 2D slice, plot-ready."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    x = np.arange(grid.res) / grid.res
    lines = [f"x,y,{name}"]
    for i in range(grid.res):
        for j in range(grid.res):
            lines.append(f"{x[i]:.17g},{x[j]:.17g},{field2d[i, j]:.17g}")
    path.write_text("\n".join(lines) + "\n")
    return path


def write_csv_rows(path, header: list, rows: list) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fmt = lambda v: f"{v:.17g}" if isinstance(v, (float, np.floating)) else str(v)
    path.write_text("\n".join([",".join(header)] + [",".join(fmt(v) for v in r) for r in rows]) + "\n")
    return path


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(outdir, command: str, config: dict, inputs=()) -> Path:
    """manifest.json with the resolved config and sha256 of every output file and input."""
    outdir = Path(outdir)
    files = sorted(p for p in outdir.rglob("*") if p.is_file() and p.name != "manifest.json")
    body = {"command": command, "config": config,
            "inputs": {str(p): sha256_file(p) for p in sorted(map(Path, inputs))},
            "outputs": {str(p.relative_to(outdir)): sha256_file(p) for p in files}}
    return write_json(outdir / "manifest.json", body)
