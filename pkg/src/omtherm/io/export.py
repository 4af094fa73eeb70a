"""
Report and columnar-text output.

Every file is written to a temporary file in the target directory and then
renamed over the destination, so an interrupted run never leaves a partial
output behind. Reports are JSON with sorted keys and carry the run's config
hash and seed; columnar files carry the same provenance as ``#`` lines.
"""

from enum import Enum
from pathlib import Path
from typing import Optional, Union
import hashlib
import io
import json
import math
import os
import tempfile

import numpy as np

from omtherm.exceptions import FormatError

PathLike = Union[str, Path]


def config_hash(config: dict) -> str:
    """SHA-256 of the canonical JSON form of a configuration."""
    canonical = json.dumps(_jsonable(config), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def _jsonable(obj):
    """Convert numpy scalars, enums and non-finite floats for JSON."""
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, Enum):
        return obj.value
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        value = float(obj)
        if math.isfinite(value):
            return value
        return "nan" if math.isnan(value) else ("inf" if value > 0 else "-inf")
    return obj


def atomic_write_bytes(path: PathLike, data: bytes) -> Path:
    """Write bytes to path via a temporary file and rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def atomic_write_text(path: PathLike, text: str) -> Path:
    """Write UTF-8 text atomically."""
    return atomic_write_bytes(path, text.encode("utf-8"))


def write_json(path: PathLike, data: dict) -> Path:
    """Write a JSON document with sorted keys."""
    text = json.dumps(_jsonable(data), sort_keys=True, indent=2) + "\n"
    return atomic_write_text(path, text)


def read_json(path: PathLike) -> dict:
    """Read a JSON document."""
    with open(path, "r") as f:
        return json.load(f)


def quantity(value: float, unit: str, ci95: Optional[float] = None) -> dict:
    """A report entry: value with unit and optional 95% half-width."""
    entry = {"value": value, "unit": unit}
    if ci95 is not None:
        entry["ci95"] = ci95
    return entry


def write_columns(
    path: PathLike,
    columns: dict[str, np.ndarray],
    provenance: Optional[dict] = None,
) -> Path:
    """
    Write comma-separated columns with a unit-bearing header row.

    Args:
        path: Destination
        columns: Ordered mapping of header (e.g. "t_s") to values
        provenance: Key-value pairs written as leading "# key: value" lines

    Returns:
        Destination path
    """
    buf = io.StringIO()
    for key, value in sorted((provenance or {}).items()):
        buf.write(f"# {key}: {value}\n")
    buf.write(",".join(columns) + "\n")
    data = np.column_stack([np.asarray(v, dtype=float) for v in columns.values()])
    np.savetxt(buf, data, delimiter=",", fmt="%.10e")
    return atomic_write_text(path, buf.getvalue())


def read_columns(path: PathLike) -> tuple[dict, list[str], np.ndarray]:
    """
    Read comma-separated columns.

    A first non-comment line that does not parse as numbers is taken as the
    header.

    Returns:
        (provenance, header names, 2-D array of values)
    """
    path = Path(path)
    provenance = {}
    header: list[str] = []
    rows = []
    with open(path, "r") as f:
        for line_no, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                key, _, value = line[1:].partition(":")
                provenance[key.strip()] = value.strip()
                continue
            fields = [s.strip() for s in line.split(",")]
            try:
                rows.append([float(s) for s in fields])
            except ValueError:
                if rows or header:
                    raise FormatError(f"{path}:{line_no} is not numeric", field=f"line {line_no}")
                header = fields
    if not rows:
        raise FormatError(f"{path} holds no data rows", field="rows")
    widths = {len(r) for r in rows}
    if len(widths) != 1:
        raise FormatError(f"{path} has rows of differing width", field="columns")
    if header and len(header) != len(rows[0]):
        raise FormatError(f"{path} header does not match the data width", field="header")
    return provenance, header, np.array(rows, dtype=float)
