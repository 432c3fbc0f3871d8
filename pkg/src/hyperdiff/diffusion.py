"""Conditional denoising diffusion over low-dimensional targets.

Noise-prediction parameterization: the backbone s(x_t, y, t) is trained to
recover the standard-normal draw that produced x_t, and the score is
recovered at sampling time as -eps_hat / sqrt(1 - alpha_bar[t]).
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .models import MlpSpec, TimeEmbedding, WeightVector, mlp_forward, mlp_forward_np, time_embed

__all__ = [
    "NoiseSchedule", "make_schedule", "DiffusionConfig",
    "forward_noise", "training_loss", "sample", "sample_with_noise",
]


@dataclass(frozen=True)
class NoiseSchedule:
    T: int
    beta: np.ndarray
    alpha_bar: np.ndarray

    def __post_init__(self):
        if not (np.all(self.beta > 0.0) and np.all(self.beta < 1.0)):
            raise ValueError("beta outside (0, 1)")
        if np.any(np.diff(self.alpha_bar) >= 0.0):
            raise ValueError("alpha_bar not strictly decreasing")


def make_schedule(T: int) -> NoiseSchedule:
    """Linear beta schedule rescaled so total injected noise matches the
    usual T=1000 convention (1e-4 .. 0.02)."""
    if T < 2:
        raise ValueError(f"schedule needs T >= 2, got {T}")
    scale = 1000.0 / T
    beta = np.linspace(1e-4 * scale, 0.02 * scale, T)
    beta = np.clip(beta, 1e-12, 0.999)
    alpha_bar = np.cumprod(1.0 - beta)
    return NoiseSchedule(T, beta, alpha_bar)


@dataclass(frozen=True)
class DiffusionConfig:
    schedule: NoiseSchedule
    backbone: MlpSpec
    data_dim: int = 1
    cond_dim: int = 1
    time_emb: TimeEmbedding = field(default_factory=TimeEmbedding)
    # Sampling-time clamp on the implied clean-data prediction. The reverse
    # chain amplifies small eps-prediction miscalibrations exponentially; once
    # the state leaves the data range the network is extrapolating and all
    # bets are off. Clamping x0_hat to a generous data range is the usual
    # guard and is inactive whenever predictions stay in range.
    x_clip: float | None = None

    def __post_init__(self):
        expect = self.data_dim + self.cond_dim + self.time_emb.dim
        if self.backbone.in_dim != expect:
            raise ValueError(
                f"backbone input dim {self.backbone.in_dim} != "
                f"data_dim + cond_dim + time embedding = {expect}")
        if self.backbone.out_dim != self.data_dim:
            raise ValueError("backbone output dim must equal data_dim")


def forward_noise(x0: np.ndarray, t: int, schedule: NoiseSchedule,
                  epsilon: np.ndarray) -> np.ndarray:
    """Closed-form noising: sqrt(ab_t) x0 + sqrt(1-ab_t) eps."""
    if not 0 <= t < schedule.T:
        raise ValueError(f"step {t} outside [0, {schedule.T})")
    ab = schedule.alpha_bar[t]
    return math.sqrt(ab) * np.asarray(x0) + math.sqrt(1.0 - ab) * np.asarray(epsilon)


def _net_inputs(config: DiffusionConfig, x_t, y, t):
    emb = time_embed(t, config.schedule.T, config.time_emb)
    if emb.ndim == 1:
        emb = np.broadcast_to(emb, (x_t.shape[0], emb.size))
    return np.concatenate([x_t, y, emb], axis=1)


def training_loss(config: DiffusionConfig, weights, x0: np.ndarray,
                  y: np.ndarray, rng: np.random.Generator,
                  predict_fn=None) -> ad.Node:
    """Noise-prediction loss over one batch.

    Per example draws a uniform step t and a standard-normal eps, noises x0
    to x_t, and penalizes mean-over-batch of ||s(x_t, y, t) - eps||^2. The
    result is a scalar graph node, differentiable w.r.t. `weights`.

    `predict_fn(inputs, t, eps)` substitutes the backbone (tests only).
    """
    x0 = np.atleast_2d(np.asarray(x0, dtype=np.float64))
    y = np.atleast_2d(np.asarray(y, dtype=np.float64))
    batch = x0.shape[0]
    if batch == 0 or y.shape[0] != batch:
        raise ad.ShapeMismatch(f"training_loss: x0 {x0.shape} vs y {y.shape}")
    sched = config.schedule
    t = rng.integers(0, sched.T, size=batch)
    eps = rng.standard_normal((batch, config.data_dim))
    ab = sched.alpha_bar[t][:, None]
    x_t = np.sqrt(ab) * x0 + np.sqrt(1.0 - ab) * eps
    inputs = _net_inputs(config, x_t, y, t)
    if predict_fn is not None:
        pred = ad.constant(predict_fn(inputs, t, eps))
    else:
        pred = mlp_forward(config.backbone, weights, ad.constant(inputs))
    residual = ad.add(pred, ad.constant(-eps))
    return ad.scale(ad.sum_(ad.square(residual)), 1.0 / batch)


def sample_with_noise(config: DiffusionConfig, values: np.ndarray,
                      y: np.ndarray, noise: np.ndarray,
                      dropout_masks=None) -> np.ndarray:
    """Ancestral sampling driven by pre-drawn noise.

    `y` is [n, cond_dim], `noise` is [n, T, data_dim]: row 0 seeds x_T, rows
    1..T-1 are the per-step additions (variance beta[t]); no noise is added
    at the final step. Deterministic given `noise`, so callers control the
    stream layout.
    """
    sched = config.schedule
    n = y.shape[0]
    if noise.shape != (n, sched.T, config.data_dim):
        raise ValueError(f"noise shaped {noise.shape}, expected {(n, sched.T, config.data_dim)}")
    if isinstance(values, WeightVector):
        values = values.values
    x = np.array(noise[:, 0, :])
    for t in range(sched.T - 1, -1, -1):
        eps_hat = mlp_forward_np(config.backbone, values,
                                 _net_inputs(config, x, y, t), dropout_masks)
        beta_t = sched.beta[t]
        ab = sched.alpha_bar[t]
        if config.x_clip is not None:
            # clamp the implied x0 and fold the clamp back into eps_hat;
            # touch only the entries where the bound binds so the clamp is
            # an exact no-op for in-range predictions
            x0_hat = (x - math.sqrt(1.0 - ab) * eps_hat) / math.sqrt(ab)
            out = np.abs(x0_hat) > config.x_clip
            if np.any(out):
                clamped = np.clip(x0_hat[out], -config.x_clip, config.x_clip)
                eps_hat = eps_hat.copy()
                eps_hat[out] = (x[out] - math.sqrt(ab) * clamped) \
                    / math.sqrt(1.0 - ab)
        x = (x - beta_t / math.sqrt(1.0 - ab) * eps_hat) \
            / math.sqrt(1.0 - beta_t)
        if t > 0:
            x += math.sqrt(beta_t) * noise[:, sched.T - t, :]
        if not np.all(np.isfinite(x)):
            raise FloatingPointError(f"non-finite sample state at reverse step t={t}")
    return x


def sample(config: DiffusionConfig, weights, y, rng: np.random.Generator,
           n_samples: int = 1, dropout_masks=None) -> np.ndarray:
    """Draw n_samples from the learned posterior p(x | y). Returns [n, D]."""
    y_row = np.atleast_1d(np.asarray(y, dtype=np.float64))
    y_batch = np.broadcast_to(y_row, (n_samples, config.cond_dim)).copy()
    noise = rng.standard_normal((n_samples, config.schedule.T, config.data_dim))
    return sample_with_noise(config, weights, y_batch, noise, dropout_masks)
