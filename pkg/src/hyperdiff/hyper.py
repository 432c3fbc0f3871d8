"""Hyper-network weight generation and the three training strategies.

The hyper-network h maps latents z ~ N(0, sigma_z^2 I) to flat weight
vectors for the diffusion backbone. Its own parameters (phi) are the only
trainable object in hyper-diffusion mode; generated backbone weights are
intermediate graph nodes that gradients flow through.
"""

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .adam import AdamState, adam_step
from .diffusion import DiffusionConfig, _net_inputs, training_loss
from .models import (MlpSpec, WeightVector, draw_dropout_masks, flat_grad,
                     init_weights, mlp_forward, mlp_forward_np, param_leaves)
from .rng import stream

__all__ = [
    "HyperNetConfig", "TrainRunConfig", "sample_latent", "generate_weights",
    "generate_weights_np", "train_hyper_diffusion", "train_single_diffusion",
    "train_deep_ensemble", "mc_dropout_weights", "McDropoutMember",
]


@dataclass(frozen=True)
class HyperNetConfig:
    latent_dim: int = 16
    sigma_z: float = 1.0
    hyper_spec: MlpSpec = None
    output_scale: float = 0.1

    def __post_init__(self):
        if self.sigma_z <= 0.0:
            raise ValueError(f"sigma_z must be positive, got {self.sigma_z}")
        if self.hyper_spec.in_dim != self.latent_dim:
            raise ValueError("hyper network input dim must equal latent_dim")

    @classmethod
    def for_backbone(cls, backbone: MlpSpec, latent_dim: int = 16,
                     sigma_z: float = 1.0, hidden: int = 128, depth: int = 4,
                     output_scale: float = 0.1):
        sizes = (latent_dim,) + (hidden,) * depth + (backbone.parameter_count,)
        return cls(latent_dim, sigma_z, MlpSpec(sizes), output_scale)


@dataclass
class TrainRunConfig:
    epochs: int = 500
    batch_size: int = 32
    learning_rate: float = 1e-3
    # linear per-epoch decay toward this value; None keeps the rate constant
    final_learning_rate: float | None = 1e-4
    master_seed: int = 0
    strategy: str = "hyper-diffusion"
    ensemble_size: int = 5
    dropout_rate: float = 0.1

    def lr_at(self, epoch: int) -> float:
        if self.final_learning_rate is None or self.epochs <= 1:
            return self.learning_rate
        frac = epoch / (self.epochs - 1)
        return (1.0 - frac) * self.learning_rate + frac * self.final_learning_rate


def sample_latent(config: HyperNetConfig, rng: np.random.Generator) -> np.ndarray:
    return rng.normal(0.0, config.sigma_z, size=config.latent_dim)


def generate_weights(config: HyperNetConfig, phi, z: np.ndarray) -> ad.Node:
    """Backbone weight vector as a graph node, differentiable w.r.t. phi.

    `phi` is anything `mlp_forward` accepts: a WeightVector, a flat node, or
    per-layer leaves.
    """
    if z.shape != (config.latent_dim,):
        raise ad.ShapeMismatch(f"latent shaped {z.shape}, expected ({config.latent_dim},)")
    out = mlp_forward(config.hyper_spec, phi, ad.constant(z[None, :]))
    return ad.reshape(ad.scale(out, config.output_scale),
                      (config.hyper_spec.out_dim,))


def generate_weights_np(config: HyperNetConfig, phi_values: np.ndarray,
                        z: np.ndarray) -> np.ndarray:
    """Fast path used at sampling time; matches `generate_weights` exactly."""
    out = mlp_forward_np(config.hyper_spec, phi_values, z[None, :])
    return (out * config.output_scale).reshape(-1)


def _batches(n: int, batch_size: int, perm: np.ndarray):
    for start in range(0, n, batch_size):
        yield perm[start:start + batch_size]


def _check_loss(value: float, epoch: int, batch: int):
    if not np.isfinite(value):
        raise FloatingPointError(f"non-finite loss at epoch {epoch}, batch {batch}")


def train_hyper_diffusion(dataset, diff_config: DiffusionConfig,
                          hyper_config: HyperNetConfig, run: TrainRunConfig,
                          freeze_z: bool = False):
    """Optimize phi through the diffusion loss; one fresh z per batch.

    `dataset` is a pair (x0 [n, D], y [n, C]). With `freeze_z` the same z is
    reused for every batch, which collapses the run to training a single
    diffusion model (ablation knob). Returns (phi, per-epoch mean losses).
    """
    x0, y = np.atleast_2d(dataset[0]), np.atleast_2d(dataset[1])
    n = x0.shape[0]
    seed = run.master_seed
    phi = init_weights(hyper_config.hyper_spec, stream(seed, "hyper-init"))
    state = AdamState(learning_rate=run.learning_rate)
    z_frozen = sample_latent(hyper_config, stream(seed, "z-frozen"))
    history = []
    for epoch in range(run.epochs):
        state.learning_rate = run.lr_at(epoch)
        perm = stream(seed, "shuffle", epoch).permutation(n)
        losses = []
        for b, idx in enumerate(_batches(n, run.batch_size, perm)):
            brng = stream(seed, "batch", epoch, b)
            z = z_frozen if freeze_z else sample_latent(hyper_config, brng)
            layers = param_leaves(phi)
            theta = generate_weights(hyper_config, layers, z)
            loss = training_loss(diff_config, theta, x0[idx], y[idx], brng)
            _check_loss(float(loss.value), epoch, b)
            grad = flat_grad(phi.spec, layers, ad.backward(loss))
            phi = WeightVector(adam_step(phi.values, grad, state), phi.spec)
            losses.append(float(loss.value))
        history.append(float(np.mean(losses)))
    return phi, history


def train_single_diffusion(dataset, diff_config: DiffusionConfig,
                           run: TrainRunConfig, seed_path=(),
                           dropout_rate: float = 0.0):
    """Train one diffusion backbone directly (ensemble member / MC-dropout base)."""
    x0, y = np.atleast_2d(dataset[0]), np.atleast_2d(dataset[1])
    n = x0.shape[0]
    seed = run.master_seed
    theta = init_weights(diff_config.backbone, stream(seed, "init", *seed_path))
    state = AdamState(learning_rate=run.learning_rate)
    history = []
    for epoch in range(run.epochs):
        state.learning_rate = run.lr_at(epoch)
        perm = stream(seed, "shuffle", epoch, *seed_path).permutation(n)
        losses = []
        for b, idx in enumerate(_batches(n, run.batch_size, perm)):
            brng = stream(seed, "batch", epoch, b, *seed_path)
            layers = param_leaves(theta)
            masks = None
            if dropout_rate > 0.0:
                masks = draw_dropout_masks(diff_config.backbone, dropout_rate,
                                           brng, batch=len(idx))
            loss = _dropout_training_loss(diff_config, layers, x0[idx],
                                          y[idx], brng, masks, dropout_rate)
            _check_loss(float(loss.value), epoch, b)
            grad = flat_grad(theta.spec, layers, ad.backward(loss))
            theta = WeightVector(adam_step(theta.values, grad, state), theta.spec)
            losses.append(float(loss.value))
        history.append(float(np.mean(losses)))
    return theta, history


def _dropout_training_loss(diff_config, weights, x0, y, rng, masks, rate):
    """Same loss as diffusion.training_loss but with dropout in the backbone."""
    if masks is None:
        return training_loss(diff_config, weights, x0, y, rng)
    sched = diff_config.schedule
    batch = x0.shape[0]
    t = rng.integers(0, sched.T, size=batch)
    eps = rng.standard_normal((batch, diff_config.data_dim))
    ab = sched.alpha_bar[t][:, None]
    x_t = np.sqrt(ab) * x0 + np.sqrt(1.0 - ab) * eps
    inputs = _net_inputs(diff_config, x_t, y, t)
    pred = mlp_forward(diff_config.backbone, weights, ad.constant(inputs),
                       dropout_rate=rate, dropout_masks=masks)
    residual = ad.add(pred, ad.constant(-eps))
    return ad.scale(ad.sum_(ad.square(residual)), 1.0 / batch)


def train_deep_ensemble(dataset, diff_config: DiffusionConfig,
                        run: TrainRunConfig, member_seeds=None):
    """Independently initialized and shuffled members; returns their weights."""
    if run.ensemble_size < 2:
        raise ValueError("ensemble needs at least 2 members")
    if member_seeds is None:
        member_seeds = list(range(run.ensemble_size))
    members = []
    for ms in member_seeds:
        theta, _ = train_single_diffusion(dataset, diff_config, run,
                                          seed_path=("member", ms))
        members.append(theta)
    return members


@dataclass(frozen=True)
class McDropoutMember:
    """A pseudo-ensemble member: shared weights plus a frozen mask seed."""
    weights: WeightVector
    mask_seed: int
    rate: float

    def masks(self):
        return draw_dropout_masks(self.weights.spec, self.rate,
                                  stream(self.mask_seed, "mc-mask"))


def mc_dropout_weights(weights: WeightVector, count: int, rate: float,
                       base_seed: int = 0):
    """Pseudo-members sharing one trained network with distinct frozen masks."""
    if rate <= 0.0:
        raise ValueError("MC dropout requires a positive dropout rate")
    return [McDropoutMember(weights, int(base_seed) + i, rate) for i in range(count)]
