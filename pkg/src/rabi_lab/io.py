"""Artifact serialization: tables, digests, manifests.

All writes are atomic (temp file in the target directory, fsync, rename)
so a failed job never leaves partial or truncated artifacts behind.
Floats are rendered with 17 significant digits, which round-trips every
double exactly; byte-for-byte table equality is therefore a meaningful
reproducibility check and is used as one.
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
from pathlib import Path
from typing import Sequence

import numpy as np

__all__ = [
    "atomic_write_bytes",
    "format_number",
    "render_table",
    "sha256_file",
    "write_manifest",
    "write_table",
]

MANIFEST_NAME = "manifest.json"


def format_number(value) -> str:
    """Render one cell: ints verbatim, floats with 17 significant digits."""
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    if isinstance(value, str):
        return value
    raise TypeError(f"unsupported cell type {type(value).__name__}")


def render_table(columns: Sequence[str], rows: Sequence[Sequence], fmt: str = "csv") -> bytes:
    """Serialize a table to CSV or JSON bytes with deterministic layout."""
    width = len(columns)
    for i, row in enumerate(rows):
        if len(row) != width:
            raise ValueError(f"row {i} has {len(row)} cells, expected {width}")
    if fmt == "csv":
        lines = [",".join(columns)]
        lines.extend(",".join(format_number(cell) for cell in row) for row in rows)
        return ("\n".join(lines) + "\n").encode("ascii")
    if fmt == "json":
        payload = {
            "columns": list(columns),
            "rows": [[_json_cell(cell) for cell in row] for row in rows],
        }
        return (json.dumps(payload, indent=1, sort_keys=True) + "\n").encode("ascii")
    raise ValueError(f"unknown table format {fmt!r}; use csv or json")


def _json_cell(value):
    if isinstance(value, (bool, np.bool_)):
        return int(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        f = float(value)
        # JSON has no NaN literal; keep the cell parseable everywhere
        return None if f != f else f
    return value


def atomic_write_bytes(path: Path, data: bytes) -> None:
    """Write-all-or-nothing via a same-directory temp file and rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(prefix=path.name + ".", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "wb") as handle:
            handle.write(data)
            handle.flush()
            os.fsync(handle.fileno())
        os.replace(tmp_name, path)
    except BaseException:
        try:
            os.unlink(tmp_name)
        except OSError:
            pass
        raise


def write_table(
    path: Path, columns: Sequence[str], rows: Sequence[Sequence], fmt: str = "csv"
) -> dict:
    """Atomically write one table; returns its manifest entry."""
    data = render_table(columns, rows, fmt)
    atomic_write_bytes(path, data)
    return {
        "name": Path(path).name,
        "sha256": hashlib.sha256(data).hexdigest(),
        "bytes": len(data),
    }


def sha256_file(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as handle:
        for chunk in iter(lambda: handle.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def write_manifest(out_dir: Path, manifest: dict) -> Path:
    """Write the single manifest for an artifact directory."""
    target = Path(out_dir) / MANIFEST_NAME
    data = (json.dumps(manifest, indent=2, sort_keys=True) + "\n").encode("ascii")
    atomic_write_bytes(target, data)
    return target
