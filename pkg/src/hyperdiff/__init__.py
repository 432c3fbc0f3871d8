"""Hyper-network diffusion ensembles with uncertainty decomposition."""

from .adam import AdamState, adam_step
from .diffusion import DiffusionConfig, NoiseSchedule, forward_noise, make_schedule, sample, training_loss
from .gradcheck import finite_diff_check
from .hyper import (HyperNetConfig, TrainRunConfig, generate_weights,
                    mc_dropout_weights, sample_latent, train_deep_ensemble,
                    train_hyper_diffusion)
from .models import MlpSpec, TimeEmbedding, WeightVector, init_weights, mlp_forward, time_embed
from .uq import SampleMatrix, UncertaintyReport, aleatoric, build_sample_matrix, decompose, epistemic, predict_mean

__version__ = "0.1.0"
