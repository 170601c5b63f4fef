"""CSV/JSON writers shared by the CLI and the reproduction runner.

CSV: comma separated, header row, LF endings, UTF-8, numbers with 6
significant digits. JSON keeps full precision.
"""

from __future__ import annotations

import csv
import hashlib
import json
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np


def fmt(value) -> str:
    if isinstance(value, str):
        return value
    if value is None:
        return ""
    v = float(value)
    if v == 0:
        return "0"  # avoids "-0"
    return f"{v:.6g}"


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([fmt(v) for v in row])
    return path


def write_numeric_csv(path: Path, header: Sequence[str], columns: Sequence[np.ndarray]) -> Path:
    """Same format as ``write_csv`` for all-numeric data, without the per-cell
    Python overhead (distribution tables can have a million rows)."""
    data = np.column_stack([np.asarray(c, dtype=float) for c in columns])
    data = np.where(data == 0, 0.0, data)  # "0", never "-0"
    path.parent.mkdir(parents=True, exist_ok=True)
    row = ",".join(["%.6g"] * data.shape[1]) + "\n"
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(header) + "\n")
        fh.write((row * data.shape[0]) % tuple(data.ravel().tolist()))
    return path


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, float) and not np.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return obj


def write_json(path: Path, data) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_jsonable(data), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def write_matrix(path: Path, matrix: np.ndarray) -> Path:
    """Plain numeric CSV (no header) at full precision, one row per line."""
    matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
    if matrix.shape[0] == 1:
        matrix = matrix.T
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        for row in matrix:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")
    return path


def sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def write_manifest(out_dir: Path, artifacts: Sequence[Path]) -> Path:
    """``manifest.json`` listing artifacts (relative paths, sorted) with checksums."""
    entries = sorted(
        ({"path": p.relative_to(out_dir).as_posix(), "sha256": sha256(p)} for p in artifacts),
        key=lambda e: e["path"],
    )
    return write_json(out_dir / "manifest.json", {"artifacts": entries})
