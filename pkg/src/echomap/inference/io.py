"""Checkpoint and dataset files.

Checkpoint layout: a magic line, one line of JSON header (version, layer
sizes, seed, parameter names and shapes, input scaling), then the raw
little-endian float64 parameter values in header order.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from ..signal.types import MEL_BANDS, MEL_FRAMES
from .network import JointModel, ModelConfig
from .train import TrainingPair

MAGIC = b"ECHOMAP-CKPT\n"
CHECKPOINT_VERSION = 1


class DatasetFormatError(ValueError):
    def __init__(self, message: str, record: int | None = None):
        self.record = record
        super().__init__(message if record is None else f"record {record}: {message}")


class CheckpointFormatError(ValueError):
    pass


def save_checkpoint(path, model: JointModel, extra: dict | None = None) -> Path:
    names = list(model.config.param_shapes())
    header = {
        "version": CHECKPOINT_VERSION,
        "config": {
            "channels": list(model.config.channels),
            "kernels": list(model.config.kernels),
            "pipe_hidden": list(model.config.pipe_hidden),
            "depth_hidden": list(model.config.depth_hidden),
            "input_shape": list(model.config.input_shape),
        },
        "seed": model.seed,
        "params": [[n, list(model.params[n].shape)] for n in names],
        "extra": extra or {},
    }
    blob = b"".join(np.ascontiguousarray(model.params[n], dtype="<f8").tobytes() for n in names)
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(json.dumps(header, sort_keys=True).encode() + b"\n")
        fh.write(blob)
    return path


def load_checkpoint(path) -> tuple[JointModel, dict]:
    data = Path(path).read_bytes()
    if not data.startswith(MAGIC):
        raise CheckpointFormatError(f"{path}: not an echomap checkpoint")
    end = data.index(b"\n", len(MAGIC))
    header = json.loads(data[len(MAGIC) : end])
    if header.get("version") != CHECKPOINT_VERSION:
        raise CheckpointFormatError(f"{path}: unsupported checkpoint version {header.get('version')}")
    config = ModelConfig(**header["config"])
    values = np.frombuffer(data[end + 1 :], dtype="<f8")
    params, offset = {}, 0
    for name, shape in header["params"]:
        n = int(np.prod(shape))
        if offset + n > values.size:
            raise CheckpointFormatError(f"{path}: truncated parameter block at {name}")
        params[name] = values[offset : offset + n].reshape(shape).astype(np.float64)
        offset += n
    if offset != values.size:
        raise CheckpointFormatError(f"{path}: {values.size - offset} trailing values")
    if set(params) != set(config.param_shapes()):
        raise CheckpointFormatError(f"{path}: parameter names do not match the layer layout")
    return JointModel(config, params, header.get("seed")), header.get("extra", {})


def write_dataset(path, pairs) -> Path:
    """CSV with ``pipe_label,depth`` then the segment values in row-major order."""
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        n = pairs[0].input.size if pairs else MEL_BANDS * MEL_FRAMES
        w.writerow(["pipe_label", "depth"] + [f"v{k}" for k in range(n)])
        for p in pairs:
            depth = "" if p.depth_label is None else repr(float(p.depth_label))
            w.writerow([p.pipe_label, depth] + [repr(float(v)) for v in p.input.ravel()])
    return path


def read_dataset(path, shape=(MEL_BANDS, MEL_FRAMES)) -> list[TrainingPair]:
    size = int(np.prod(shape))
    pairs = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or header[:2] != ["pipe_label", "depth"]:
            raise DatasetFormatError(f"{path}: missing 'pipe_label,depth,...' header")
        for k, row in enumerate(reader):
            if len(row) != size + 2:
                raise DatasetFormatError(f"expected {size + 2} fields, got {len(row)}", k)
            try:
                label = int(row[0])
                depth = float(row[1]) if row[1] != "" else None
                values = np.array([float(v) for v in row[2:]]).reshape(shape)
            except ValueError as exc:
                raise DatasetFormatError(str(exc), k) from exc
            if not np.all(np.isfinite(values)):
                raise DatasetFormatError("non-finite segment value", k)
            try:
                pairs.append(TrainingPair(values, label, depth))
            except ValueError as exc:
                raise DatasetFormatError(str(exc), k) from exc
    if not pairs:
        raise DatasetFormatError(f"{path}: dataset is empty")
    return pairs
