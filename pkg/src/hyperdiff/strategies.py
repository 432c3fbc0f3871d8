"""Weight-draw sources feeding the sample matrix builder.

A source exposes `member(master_seed, i) -> (weight values, dropout masks)`,
a `count` (None = unlimited draws) and a `name` tag recorded in provenance.
"""

from dataclasses import dataclass

from .hyper import HyperNetConfig, generate_weights_np
from .models import WeightVector, draw_dropout_masks
from .rng import stream

__all__ = ["HyperDiffusionSource", "EnsembleSource", "McDropoutSource"]


@dataclass
class HyperDiffusionSource:
    """Unlimited draws: theta_i = h(z_i) for z_i keyed by (seed, 'weight', i)."""

    phi: WeightVector
    hyper_config: HyperNetConfig
    name = "hyper-diffusion"
    count = None

    def member(self, master_seed: int, i: int):
        rng = stream(master_seed, "weight", i)
        z = rng.normal(0.0, self.hyper_config.sigma_z,
                       size=self.hyper_config.latent_dim)
        return generate_weights_np(self.hyper_config, self.phi.values, z), None


@dataclass
class EnsembleSource:
    """Fixed pool of independently trained members."""

    members: list
    name = "deep-ensemble"

    @property
    def count(self):
        return len(self.members)

    def member(self, master_seed: int, i: int):
        return self.members[i].values, None


@dataclass
class McDropoutSource:
    """One trained network; member i is a frozen dropout mask seed."""

    weights: WeightVector
    rate: float
    name = "mc-dropout"
    count = None

    def __post_init__(self):
        if self.rate <= 0.0:
            raise ValueError("MC dropout requires a positive dropout rate")

    def member(self, master_seed: int, i: int):
        masks = draw_dropout_masks(self.weights.spec, self.rate,
                                   stream(master_seed, "mask", i))
        return self.weights.values, masks
