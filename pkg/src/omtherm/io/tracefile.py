"""
Binary trace container.

Layout (little-endian):

    magic      8 bytes   b"OMTRACE\\0"
    version    uint32
    n_reps     uint64
    n_samples  uint64
    dt         float64   sample period in s
    samples    n_reps * n_samples float32, row-major

Metadata (generating configuration, truth, seed) goes to a JSON sidecar
next to the container, ``<name>.json``.
"""

from pathlib import Path
from typing import Union
import json
import logging
import struct

import numpy as np

from omtherm.core.synth import SynthTruth, TraceSet
from omtherm.exceptions import FormatError
from omtherm.io.export import atomic_write_bytes, write_json

logger = logging.getLogger(__name__)

MAGIC = b"OMTRACE\0"
VERSION = 1
HEADER = struct.Struct("<8sIQQd")
SAMPLE_DTYPE = np.dtype("<f4")

PathLike = Union[str, Path]


def sidecar_path(path: PathLike) -> Path:
    """Metadata file belonging to a container."""
    return Path(path).with_suffix(".json")


def write_traceset(traces: TraceSet, path: PathLike, extra: dict = None) -> Path:
    """
    Write a TraceSet and its metadata sidecar atomically.

    Args:
        traces: Ensemble to store
        path: Container path
        extra: Additional metadata (config hash, temperature, ...)

    Returns:
        Container path
    """
    path = Path(path)
    header = HEADER.pack(MAGIC, VERSION, traces.n_reps, traces.n_samples, traces.dt)
    payload = np.ascontiguousarray(traces.traces, dtype=SAMPLE_DTYPE).tobytes()
    atomic_write_bytes(path, header + payload)

    meta = {
        "dt": traces.dt,
        "n_reps": traces.n_reps,
        "n_samples": traces.n_samples,
        "provenance": traces.provenance,
        "truth": None if traces.truth is None else traces.truth.to_dict(),
    }
    if extra:
        meta.update(extra)
    write_json(sidecar_path(path), meta)
    logger.debug("wrote %s (%d x %d)", path, traces.n_reps, traces.n_samples)
    return path


def read_header(path: PathLike) -> tuple[int, int, float]:
    """
    Validate a container header.

    Returns:
        (n_reps, n_samples, dt)
    """
    path = Path(path)
    with open(path, "rb") as f:
        raw = f.read(HEADER.size)
    if len(raw) < HEADER.size:
        raise FormatError(f"{path} is shorter than the trace header", field="header")
    magic, version, n_reps, n_samples, dt = HEADER.unpack(raw)
    if magic != MAGIC:
        raise FormatError(f"{path} is not a trace container", field="magic")
    if version != VERSION:
        raise FormatError(f"{path} has unsupported version {version}", field="version")
    if n_reps < 1:
        raise FormatError(f"{path} declares {n_reps} repetitions", field="n_reps")
    if n_samples < 1:
        raise FormatError(f"{path} declares {n_samples} samples", field="n_samples")
    if not (np.isfinite(dt) and dt > 0):
        raise FormatError(f"{path} declares sample period {dt}", field="dt")

    expected = HEADER.size + n_reps * n_samples * SAMPLE_DTYPE.itemsize
    actual = path.stat().st_size
    if actual != expected:
        raise FormatError(
            f"{path} holds {actual} bytes, header implies {expected}", field="n_samples"
        )
    return n_reps, n_samples, dt


def read_traceset(path: PathLike) -> TraceSet:
    """
    Load a TraceSet written by write_traceset.

    The sidecar is optional; without it truth and provenance are empty.
    """
    path = Path(path)
    n_reps, n_samples, dt = read_header(path)
    samples = np.fromfile(path, dtype=SAMPLE_DTYPE, offset=HEADER.size)
    traces = samples.reshape(n_reps, n_samples).astype(np.float32)

    truth, provenance = None, {}
    meta_path = sidecar_path(path)
    if meta_path.exists():
        try:
            with open(meta_path, "r") as f:
                meta = json.load(f)
        except json.JSONDecodeError as exc:
            raise FormatError(f"{meta_path} is not valid JSON: {exc}", field="sidecar") from exc
        if not isinstance(meta, dict):
            raise FormatError(f"{meta_path} must hold a JSON object", field="sidecar")
        provenance = meta.get("provenance", {})
        if meta.get("truth") is not None:
            try:
                truth = SynthTruth.from_dict(meta["truth"])
            except (KeyError, TypeError, ValueError) as exc:
                raise FormatError(
                    f"{meta_path} has an invalid truth record: {exc}", field="truth"
                ) from exc
    return TraceSet(dt=dt, traces=traces, truth=truth, provenance=provenance)
