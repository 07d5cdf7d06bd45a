"""Line-by-line random field generation from a scanning model.

Cells are drawn in row-major order, one uniform variate per cell from a
PCG64 generator, so a (model, seed, dims) triple determines the field
bit-for-bit across platforms.  Cells near the top or left/right edges
use the reduced-context models: cell (r, c) is drawn with

    b' = min(b, c),   a' = min(a, cols - c) if r > 0 else 0

Fields are stored as plain PBM (P1) with spin +1 mapped to pixel 1,
plus a JSON sidecar carrying the seed, dimensions and the sha256 of the
model document that generated the field.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .fileio import open_for_write
from .scan import ScanModel, model_hash, model_to_json, reduced_models

__all__ = [
    "sample_field",
    "empirical_pattern_distribution",
    "total_variation",
    "write_pbm",
    "read_pbm",
    "write_sidecar",
    "read_sidecar",
]


def sample_field(model: ScanModel, rows: int, cols: int, seed: int) -> np.ndarray:
    """Generate a rows x cols array of +-1 spins (int8)."""
    if rows < 1 or cols < 1:
        raise ValueError("rows and cols must be positive")
    b, a = model.before, model.after
    family = reduced_models(model)
    for b2 in range(b + 1):
        for a2 in range(a + 1):
            if (b2, a2) not in family:
                raise ValueError(f"missing reduced model for shape ({b2}, {a2})")
    tables = {shape: m.table for shape, m in family.items()}

    rng = np.random.Generator(np.random.PCG64(seed))
    grid = np.zeros((rows, cols), np.int8)
    for r in range(rows):
        up = grid[r - 1]
        row = grid[r]
        for c in range(cols):
            bb = min(b, c)
            aa = min(a, cols - c) if r > 0 else 0
            key = 0
            for cc in range(c - bb, c):
                key = (key << 1) | (row[cc] > 0)
            for cc in range(c, c + aa):
                key = (key << 1) | (up[cc] > 0)
            row[c] = 1 if rng.random() < tables[(bb, aa)][key] else -1
    return grid


def empirical_pattern_distribution(field: np.ndarray, k: int, two_rows: bool = False) -> np.ndarray:
    """Frequencies of 1xk (or 2xk) blocks, interior-only (no wrap).

    Keys pack the top row's bits left-to-right MSB-first, then (for
    2xk) the bottom row's.  Frequencies sum to 1.
    """
    if not 1 <= k <= 4:
        raise ValueError("pattern width k must be in 1..4")
    field = np.asarray(field)
    rows, cols = field.shape
    height = 2 if two_rows else 1
    if rows < height or cols < k:
        raise ValueError("field smaller than the pattern")
    bits = (field > 0).astype(np.int64)
    nr, nc = rows - height + 1, cols - k + 1
    key = np.zeros((nr, nc), np.int64)
    for rr in range(height):
        for cc in range(k):
            key = (key << 1) | bits[rr:rr + nr, cc:cc + nc]
    return np.bincount(key.ravel(), minlength=1 << (height * k)) / key.size


def total_variation(p, q) -> float:
    return 0.5 * float(np.abs(np.asarray(p, float) - np.asarray(q, float)).sum())


def write_pbm(field: np.ndarray, path) -> None:
    """Plain PBM (P1); spin +1 writes pixel 1.  Lines stay short per
    the format's 70-character convention.  Accepts a path or a text
    stream."""
    field = np.asarray(field)
    rows, cols = field.shape
    with open_for_write(path) as fh:
        fh.write(f"P1\n{cols} {rows}\n")
        for r in range(rows):
            bits = ["1" if s > 0 else "0" for s in field[r]]
            for i in range(0, cols, 32):
                fh.write(" ".join(bits[i:i + 32]) + "\n")


def read_pbm(path) -> np.ndarray:
    tokens = []
    with open(path) as fh:
        for line in fh:
            line = line.split("#", 1)[0]
            tokens.extend(line.split())
    if not tokens or tokens[0] != "P1":
        raise ValueError("not a plain PBM (P1) file")
    cols, rows = int(tokens[1]), int(tokens[2])
    data = np.array(tokens[3:3 + rows * cols], int)
    if data.size != rows * cols:
        raise ValueError("truncated PBM data")
    return np.where(data.reshape(rows, cols) > 0, 1, -1).astype(np.int8)


def write_sidecar(path, seed: int, rows: int, cols: int, model: ScanModel | str) -> str:
    """JSON sidecar next to a field file; returns the model hash."""
    text = model if isinstance(model, str) else model_to_json(model)
    h = model_hash(text)
    doc = {"seed": int(seed), "rows": int(rows), "cols": int(cols), "model_hash": h}
    Path(path).write_text(json.dumps(doc) + "\n")
    return h


def read_sidecar(path) -> dict:
    doc = json.loads(Path(path).read_text())
    expected = {"seed", "rows", "cols", "model_hash"}
    if set(doc) != expected:
        raise ValueError(f"bad sidecar: keys {sorted(doc)} != {sorted(expected)}")
    return doc
