"""Plain CSV and density-grid files with a metadata header.

CSV files start with ``# key: value`` comment lines followed by a normal
header row, so ``pandas.read_csv(path, comment="#")`` reads them directly.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np


def _fmt(value):
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return value


def write_csv(path, columns, rows, metadata: dict | None = None):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        for key, value in (metadata or {}).items():
            fh.write(f"# {key}: {json.dumps(value, sort_keys=True)}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])
    return path


def read_csv_metadata(path) -> dict:
    meta = {}
    with Path(path).open() as fh:
        for line in fh:
            if not line.startswith("#"):
                break
            key, _, value = line[1:].strip().partition(": ")
            meta[key] = json.loads(value)
    return meta


def read_csv(path) -> tuple[list[str], list[list[str]]]:
    with Path(path).open(newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    reader = csv.reader(lines)
    header = next(reader)
    return header, [row for row in reader]


def write_density(path, density: np.ndarray, metadata: dict):
    """Save a 2D density with its grid metadata in a compressed ``.npz``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    np.savez_compressed(path, density=np.asarray(density), metadata=json.dumps(metadata, sort_keys=True))
    return path


def read_density(path) -> tuple[np.ndarray, dict]:
    with np.load(path) as data:
        return data["density"], json.loads(str(data["metadata"]))
