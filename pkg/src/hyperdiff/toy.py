"""The 1-D toy inverse problem: x = sin(y) + eta, y uniform on an interval."""

import json
import math
from dataclasses import dataclass

import numpy as np

from .rng import stream
from .tensor import as_tensor

__all__ = ["ToyProblemConfig", "gen_toy_data", "save_dataset", "load_dataset"]


@dataclass(frozen=True)
class ToyProblemConfig:
    noise_variance: float = 0.01
    dataset_size: int = 500
    y_range: tuple = (-5.0, 5.0)
    seed: int = 0

    def __post_init__(self):
        if self.noise_variance < 0.0:
            raise ValueError("noise variance must be >= 0")
        if self.dataset_size < 1:
            raise ValueError("dataset size must be >= 1")
        if not self.y_range[0] < self.y_range[1]:
            raise ValueError("degenerate y range")


def gen_toy_data(config: ToyProblemConfig):
    """Returns (x [n,1], y [n,1]): y ~ U(y_range), x = sin(y) + N(0, sigma^2)."""
    rng = stream(config.seed, "toy-data")
    y = rng.uniform(config.y_range[0], config.y_range[1], size=config.dataset_size)
    eta = rng.normal(0.0, math.sqrt(config.noise_variance), size=config.dataset_size)
    x = np.sin(y) + eta
    return x[:, None], y[:, None]


def save_dataset(path, x: np.ndarray, y: np.ndarray, config: ToyProblemConfig):
    """CSV with a y,x header plus a sidecar JSON manifest next to it."""
    x = as_tensor(x).reshape(-1)
    y = as_tensor(y).reshape(-1)
    lines = ["y,x"] + [f"{yi:.17g},{xi:.17g}" for yi, xi in zip(y, x)]
    path = str(path)
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    manifest = {
        "format_version": 1,
        "noise_variance": config.noise_variance,
        "dataset_size": config.dataset_size,
        "y_range": list(config.y_range),
        "seed": config.seed,
    }
    with open(path + ".json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_dataset(path):
    """Returns (x [n,1], y [n,1]); round-trips `save_dataset` bit-exactly."""
    with open(path) as fh:
        header = fh.readline().strip()
        if header != "y,x":
            raise ValueError(f"unexpected dataset header {header!r}")
        rows = [line.split(",") for line in fh if line.strip()]
    y = np.array([float(r[0]) for r in rows])
    x = np.array([float(r[1]) for r in rows])
    return x[:, None], y[:, None]
