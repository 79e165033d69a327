"""Plain-text serialization for matrices, parameter sets and datasets.

Format (one file, line oriented, '\n' separators)::

    relucert-matrices 1
    count <number of matrices>
    meta <key> <value>            # zero or more
    matrix <name> <rows> <cols>
    <rows lines of cols space-separated floats>
    ...                           # repeated per matrix

Floats are written with repr(), which round-trips float64 exactly, so a
save/load cycle is bit-faithful and re-saving produces byte-identical files.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .initializers import Dataset
from .network import Params

__all__ = [
    "save_matrices",
    "load_matrices",
    "save_dataset",
    "load_dataset",
    "save_params",
    "load_params",
]

_MAGIC = "relucert-matrices 1"


def save_matrices(path, named, meta: dict[str, str] | None = None) -> None:
    """Write (name, matrix) pairs, with optional string metadata."""
    named = list(named)
    lines = [_MAGIC, f"count {len(named)}"]
    for key, value in (meta or {}).items():
        if " " in str(key):
            raise ValueError(f"meta key {key!r} must not contain spaces")
        lines.append(f"meta {key} {value}")
    for name, mat in named:
        mat = np.asarray(mat, dtype=np.float64)
        if mat.ndim != 2:
            raise ValueError(f"matrix {name!r} must be 2-D")
        if " " in name:
            raise ValueError(f"matrix name {name!r} must not contain spaces")
        lines.append(f"matrix {name} {mat.shape[0]} {mat.shape[1]}")
        for row in mat:
            lines.append(" ".join(repr(float(v)) for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


def load_matrices(path):
    """Read a matrices file; returns (ordered name->matrix dict, meta dict)."""
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0] != _MAGIC:
        raise ValueError(f"{path}: not a relucert matrices file")
    if not lines[1].startswith("count "):
        raise ValueError(f"{path}: missing count line")
    count = int(lines[1].split()[1])
    meta: dict[str, str] = {}
    pos = 2
    while pos < len(lines) and lines[pos].startswith("meta "):
        _, key, value = lines[pos].split(" ", 2)
        meta[key] = value
        pos += 1
    out: dict[str, np.ndarray] = {}
    for _ in range(count):
        header = lines[pos].split()
        if header[0] != "matrix" or len(header) != 4:
            raise ValueError(f"{path}: bad matrix header {lines[pos]!r}")
        name, rows, cols = header[1], int(header[2]), int(header[3])
        pos += 1
        data = np.empty((rows, cols), dtype=np.float64)
        for r in range(rows):
            values = lines[pos].split()
            if len(values) != cols:
                raise ValueError(f"{path}: row {r} of {name!r} has {len(values)} values")
            data[r] = [float(v) for v in values]
            pos += 1
        out[name] = data
    return out, meta


def save_dataset(path, dataset: Dataset) -> None:
    save_matrices(path, [("x", dataset.x), ("y", dataset.y)], meta={"seed": str(dataset.seed)})


def load_dataset(path) -> Dataset:
    mats, meta = load_matrices(path)
    return Dataset(x=mats["x"], y=mats["y"], seed=int(meta.get("seed", "0")))


def save_params(path, params: Params, meta: dict[str, str] | None = None) -> None:
    named = [(f"w{i + 1}", w) for i, w in enumerate(params.weights)]
    save_matrices(path, named, meta=meta)


def load_params(path) -> Params:
    mats, _ = load_matrices(path)
    return Params(tuple(mats[f"w{i + 1}"] for i in range(len(mats))))
