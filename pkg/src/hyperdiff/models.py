"""Functional MLPs.

Weights live in a flat vector plus a layout, never inside the model object.
That makes the forward pass differentiable w.r.t. the weights themselves,
which is what lets a hyper-network's output be used directly as the weights
of the downstream network.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .tensor import as_tensor

__all__ = [
    "MlpSpec", "WeightVector", "layout_for", "init_weights",
    "mlp_forward", "mlp_forward_np", "draw_dropout_masks",
    "TimeEmbedding", "time_embed",
]


@dataclass(frozen=True)
class MlpSpec:
    """Layer sizes input..output; ReLU between hidden layers, identity at output."""

    layer_sizes: tuple

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.layer_sizes)
        if len(sizes) < 2 or any(s < 1 for s in sizes):
            raise ValueError(f"bad layer sizes {sizes}")
        object.__setattr__(self, "layer_sizes", sizes)

    @property
    def parameter_count(self) -> int:
        sizes = self.layer_sizes
        return sum((sizes[i] + 1) * sizes[i + 1] for i in range(len(sizes) - 1))

    @property
    def in_dim(self) -> int:
        return self.layer_sizes[0]

    @property
    def out_dim(self) -> int:
        return self.layer_sizes[-1]


def layout_for(spec: MlpSpec):
    """Per-layer (w_start, w_stop, b_start, b_stop, in, out) segments.

    Segments tile [0, parameter_count) exactly, weights before bias per layer.
    """
    segments = []
    offset = 0
    sizes = spec.layer_sizes
    for i in range(len(sizes) - 1):
        n_in, n_out = sizes[i], sizes[i + 1]
        w0, w1 = offset, offset + n_in * n_out
        b0, b1 = w1, w1 + n_out
        segments.append((w0, w1, b0, b1, n_in, n_out))
        offset = b1
    assert offset == spec.parameter_count
    return segments


@dataclass
class WeightVector:
    """Flat parameter vector tied to the spec that defines its layout."""

    values: np.ndarray
    spec: MlpSpec

    def __post_init__(self):
        self.values = as_tensor(self.values)
        if self.values.shape != (self.spec.parameter_count,):
            raise ValueError(
                f"weight vector length {self.values.shape} does not match "
                f"parameter count {self.spec.parameter_count}")

    def unpack(self):
        """List of (W, b) views per layer."""
        out = []
        for w0, w1, b0, b1, n_in, n_out in layout_for(self.spec):
            out.append((self.values[w0:w1].reshape(n_in, n_out), self.values[b0:b1]))
        return out

    @classmethod
    def pack(cls, spec: MlpSpec, pairs):
        flat = np.empty(spec.parameter_count)
        for (w0, w1, b0, b1, n_in, n_out), (w, b) in zip(layout_for(spec), pairs):
            flat[w0:w1] = np.asarray(w).reshape(-1)
            flat[b0:b1] = np.asarray(b)
        return cls(flat, spec)


def init_weights(spec: MlpSpec, rng: np.random.Generator) -> WeightVector:
    """He-normal weights (std sqrt(2/fan_in)), zero biases."""
    flat = np.zeros(spec.parameter_count)
    for w0, w1, b0, b1, n_in, n_out in layout_for(spec):
        flat[w0:w1] = rng.normal(0.0, math.sqrt(2.0 / n_in), size=n_in * n_out)
    return WeightVector(flat, spec)


def _as_weight_node(weights, spec):
    if isinstance(weights, ad.Node):
        return weights
    if isinstance(weights, WeightVector):
        if weights.spec != spec:
            raise ValueError("weight vector layout does not match spec")
        return ad.leaf(weights.values, trainable=True, op="weights")
    raise TypeError(f"unsupported weights object {type(weights)}")


def param_leaves(weights: WeightVector):
    """Per-layer (W, b) leaf nodes viewing a flat weight vector.

    Training loops prefer this over slicing one flat leaf: the backward pass
    then never materializes full-length zero vectors per layer, which matters
    for the hyper-network's multi-million-entry vector.
    """
    nodes = []
    for i, (w, b) in enumerate(weights.unpack()):
        nodes.append((ad.leaf(w, trainable=True, op=f"W{i}"),
                      ad.leaf(b, trainable=True, op=f"b{i}")))
    return nodes


def flat_grad(spec: MlpSpec, layer_nodes, grads) -> np.ndarray:
    """Pack per-layer gradients from `backward` into one flat vector."""
    flat = np.zeros(spec.parameter_count)
    for (w0, w1, b0, b1, n_in, n_out), (wn, bn) in zip(layout_for(spec), layer_nodes):
        if wn in grads:
            flat[w0:w1] = grads[wn].reshape(-1)
        if bn in grads:
            flat[b0:b1] = grads[bn]
    return flat


def mlp_forward(spec: MlpSpec, weights, x, dropout_rate: float = 0.0,
                dropout_masks=None) -> ad.Node:
    """Differentiable forward pass.

    `weights` may be a WeightVector (becomes a trainable leaf), any graph
    node of shape [parameter_count] (e.g. a hyper-network output), or the
    per-layer node pairs from `param_leaves`. `x` is a [batch, in_dim] array
    or node. Dropout masks, when active, multiply each hidden activation and
    are expected pre-scaled by 1/(1-rate); see `draw_dropout_masks`.
    """
    layered = isinstance(weights, (list, tuple))
    w = None if layered else _as_weight_node(weights, spec)
    h = x if isinstance(x, ad.Node) else ad.constant(np.atleast_2d(x))
    if h.value.shape[-1] != spec.in_dim:
        raise ad.ShapeMismatch(
            f"mlp_forward: input dim {h.value.shape[-1]} != {spec.in_dim}")
    segments = layout_for(spec)
    last = len(segments) - 1
    for i, (w0, w1, b0, b1, n_in, n_out) in enumerate(segments):
        if layered:
            wm, bv = weights[i]
        else:
            wm = ad.reshape(ad.slice_(w, w0, w1), (n_in, n_out))
            bv = ad.slice_(w, b0, b1)
        h = ad.add(ad.matmul(h, wm), bv)
        if i != last:
            h = ad.relu(h)
            if dropout_rate > 0.0 and dropout_masks is not None:
                h = ad.mul(h, ad.constant(dropout_masks[i]))
    return h


def mlp_forward_np(spec: MlpSpec, values: np.ndarray, x: np.ndarray,
                   dropout_masks=None) -> np.ndarray:
    """Plain-numpy forward pass, no tape. Used in the sampling hot loop.

    Matches `mlp_forward` bit-for-bit for the same inputs.
    """
    h = x
    segments = layout_for(spec)
    last = len(segments) - 1
    for i, (w0, w1, b0, b1, n_in, n_out) in enumerate(segments):
        h = h @ values[w0:w1].reshape(n_in, n_out) + values[b0:b1]
        if i != last:
            np.maximum(h, 0.0, out=h)
            if dropout_masks is not None:
                h *= dropout_masks[i]
    return h


def draw_dropout_masks(spec: MlpSpec, rate: float, rng: np.random.Generator,
                       batch: int | None = None):
    """Inverted-dropout masks, one per hidden activation.

    Shape [hidden] when `batch` is None (a frozen sub-network shared across
    the batch, as MC-dropout pseudo-members use) or [batch, hidden] for
    per-example training dropout. Entries are 0 or 1/(1-rate).
    """
    if not 0.0 < rate < 1.0:
        raise ValueError(f"dropout rate {rate} outside (0, 1)")
    masks = []
    for size in spec.layer_sizes[1:-1]:
        shape = (size,) if batch is None else (batch, size)
        keep = rng.random(shape) >= rate
        masks.append(keep / (1.0 - rate))
    return masks


@dataclass(frozen=True)
class TimeEmbedding:
    """Sinusoidal embedding of the diffusion step, frequencies 2^k."""

    num_frequencies: int = 8

    @property
    def dim(self) -> int:
        return 2 * self.num_frequencies


def time_embed(t, total_steps: int, emb: TimeEmbedding) -> np.ndarray:
    """[sin(pi f_k t/T), cos(pi f_k t/T)] for f_k = 2^k. `t` may be an array."""
    t_arr = np.asarray(t, dtype=np.float64)
    if np.any(t_arr < 0) or np.any(t_arr > total_steps):
        raise ValueError(f"step {t} outside [0, {total_steps}]")
    freqs = 2.0 ** np.arange(emb.num_frequencies)
    phase = math.pi * t_arr[..., None] * freqs / total_steps
    return np.concatenate([np.sin(phase), np.cos(phase)], axis=-1)
