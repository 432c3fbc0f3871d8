"""Checkpoint container: one JSON header line, then the raw float64 payload.

The header carries everything needed to rebuild the model (layer sizes,
schedule length, training config, seed, format version); the payload is the
flat weight vector, little-endian, 8 * parameter_count bytes exactly.
"""

import json

import numpy as np

from .models import MlpSpec, WeightVector

__all__ = ["save_checkpoint", "load_checkpoint"]

FORMAT_VERSION = 1


def save_checkpoint(path, weights: WeightVector, kind: str, meta: dict | None = None):
    header = {
        "format_version": FORMAT_VERSION,
        "kind": kind,
        "layer_sizes": list(weights.spec.layer_sizes),
        "parameter_count": weights.spec.parameter_count,
    }
    if meta:
        header.update(meta)
    payload = np.ascontiguousarray(weights.values, dtype="<f8").tobytes()
    if len(payload) != 8 * weights.spec.parameter_count:
        raise ValueError("payload length does not match parameter count")
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode() + b"\n")
        fh.write(payload)


def load_checkpoint(path):
    """Returns (WeightVector, header dict)."""
    with open(path, "rb") as fh:
        header_line = fh.readline()
        payload = fh.read()
    header = json.loads(header_line.decode())
    if header.get("format_version") != FORMAT_VERSION:
        raise ValueError(f"unsupported checkpoint version {header.get('format_version')}")
    spec = MlpSpec(tuple(header["layer_sizes"]))
    if len(payload) != 8 * spec.parameter_count:
        raise ValueError(
            f"payload is {len(payload)} bytes, expected {8 * spec.parameter_count}")
    values = np.frombuffer(payload, dtype="<f8").astype(np.float64)
    return WeightVector(values, spec), header
