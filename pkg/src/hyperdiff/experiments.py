"""Experiment drivers for the toy problem: sweeps, ablations, OOD probe.

Every runner writes deterministic CSV/SVG artifacts into an output
directory plus a run-summary JSON listing each artifact with its SHA-256,
so re-runs with the same manifest and seed are byte-checkable.
"""

import hashlib
import json
import os
from dataclasses import dataclass

import numpy as np

from .checkpoint import save_checkpoint
from .diffusion import DiffusionConfig, make_schedule
from .hyper import HyperNetConfig, TrainRunConfig, train_hyper_diffusion
from .models import MlpSpec, TimeEmbedding
from .rng import stream_key
from .strategies import HyperDiffusionSource
from .svgplot import emit_plot
from .toy import ToyProblemConfig, gen_toy_data, save_dataset
from .uq import aleatoric, build_sample_grid, epistemic

__all__ = [
    "Scale", "DESK", "FULL", "toy_diffusion_config", "toy_hyper_config",
    "RunContext", "run_aleatoric_sweep", "run_epistemic_sweep",
    "run_sampling_ablation", "run_ood_probe",
    "NOISE_LEVELS", "DATASET_SIZES",
]

NOISE_LEVELS = (0.01, 0.04, 0.16, 0.64)
DATASET_SIZES = (100, 200, 400, 800)
OOD_CONDITIONS = (6.0, 7.0, 8.0)


@dataclass(frozen=True)
class Scale:
    """Sampling effort knobs; `desk` keeps the acceptance suite fast."""

    m: int
    n: int
    conditions: int
    epi_n: int       # larger N for the epistemic sweep: the estimator's
    epi_conditions: int  # aleatoric/N bias floor must sit below the signal


DESK = Scale(m=20, n=1000, conditions=16, epi_n=2000, epi_conditions=8)
FULL = Scale(m=100, n=10000, conditions=64, epi_n=10000, epi_conditions=64)

SCALES = {"desk": DESK, "full": FULL}


def toy_diffusion_config(T: int = 100, hidden: int = 64, depth: int = 4,
                         num_frequencies: int = 8,
                         x_clip: float | None = 3.4) -> DiffusionConfig:
    # clamp bound = max |signal| + 3 sigma at the largest toy noise level
    # (1 + 3*0.8); wide enough that calibrated samples pass untouched, tight
    # enough to stop miscalibrated members from running away
    emb = TimeEmbedding(num_frequencies)
    backbone = MlpSpec((1 + 1 + emb.dim,) + (hidden,) * depth + (1,))
    return DiffusionConfig(make_schedule(T), backbone, data_dim=1, cond_dim=1,
                           time_emb=emb, x_clip=x_clip)


def toy_hyper_config(config: DiffusionConfig, **kw) -> HyperNetConfig:
    return HyperNetConfig.for_backbone(config.backbone, **kw)


class RunContext:
    """Output directory plus the artifact ledger for the run summary."""

    def __init__(self, out_dir, master_seed: int, workers: int = 1):
        self.out_dir = str(out_dir)
        self.master_seed = int(master_seed)
        self.workers = int(workers)
        self.artifacts = {}
        os.makedirs(self.out_dir, exist_ok=True)

    def path(self, name: str) -> str:
        return os.path.join(self.out_dir, name)

    def record(self, name: str):
        with open(self.path(name), "rb") as fh:
            digest = hashlib.sha256(fh.read()).hexdigest()
        self.artifacts[name] = digest

    def write_csv(self, name: str, header, rows):
        lines = [",".join(header)]
        for row in rows:
            lines.append(",".join(
                f"{v:.17g}" if isinstance(v, float) else str(v) for v in row))
        with open(self.path(name), "w") as fh:
            fh.write("\n".join(lines) + "\n")
        self.record(name)

    def finish(self, experiment: str, config: dict):
        summary = {
            "format_version": 1,
            "experiment": experiment,
            "master_seed": self.master_seed,
            "config": config,
            "artifacts": self.artifacts,
        }
        with open(self.path("run_summary.json"), "w") as fh:
            json.dump(summary, fh, indent=2, sort_keys=True)
            fh.write("\n")
        return summary


def condition_grid(count: int, lo: float = -5.0, hi: float = 5.0) -> np.ndarray:
    return np.linspace(lo, hi, count)[:, None]


def _train_hyper_on_toy(toy: ToyProblemConfig, diff_config, hyper_config,
                        epochs: int, seed: int):
    x, y = gen_toy_data(toy)
    run = TrainRunConfig(epochs=epochs, master_seed=seed)
    phi, history = train_hyper_diffusion((x, y), diff_config, hyper_config, run)
    return (x, y), phi, history


def _grid_stats(source, diff_config, y_grid, m, n, seed, workers):
    """Per-condition aleatoric and epistemic plus the raw matrices."""
    matrices = build_sample_grid(source, diff_config, y_grid, m, n, seed, workers)
    alea = np.array([float(aleatoric(mat)[0]) for mat in matrices])
    epi = np.array([float(epistemic(mat)[0]) for mat in matrices])
    return matrices, alea, epi


def run_aleatoric_sweep(ctx: RunContext, scale: Scale = DESK, epochs: int = 500,
                        dataset_size: int = 500, noise_levels=NOISE_LEVELS,
                        diff_config: DiffusionConfig | None = None):
    """Noise-level sweep: train per sigma^2, estimate mean aleatoric variance."""
    diff_config = diff_config or toy_diffusion_config()
    hyper_config = toy_hyper_config(diff_config)
    y_grid = condition_grid(scale.conditions)
    rows, hist_series = [], []
    for k, sigma2 in enumerate(noise_levels):
        seed = stream_key(ctx.master_seed, "aleatoric", k) % (2 ** 63)
        toy = ToyProblemConfig(noise_variance=sigma2, dataset_size=dataset_size,
                               seed=seed)
        try:
            (x, y), phi, history = _train_hyper_on_toy(
                toy, diff_config, hyper_config, epochs, seed)
        except FloatingPointError as exc:
            rows.append((float(sigma2), float("nan"), f"diverged: {exc}"))
            continue
        save_dataset(ctx.path(f"data_aleatoric_{k}.csv"), x, y, toy)
        ctx.record(f"data_aleatoric_{k}.csv")
        ctx.record(f"data_aleatoric_{k}.csv.json")
        save_checkpoint(ctx.path(f"hyper_aleatoric_{k}.ckpt"), phi, "hyper", {
            "strategy": "hyper-diffusion",
            "latent_dim": hyper_config.latent_dim,
            "sigma_z": hyper_config.sigma_z,
            "output_scale": hyper_config.output_scale,
            "backbone_layer_sizes": list(diff_config.backbone.layer_sizes),
            "schedule_T": diff_config.schedule.T,
            "x_clip": diff_config.x_clip,
            "seed": seed,
            "epochs": epochs,
            "final_loss": history[-1],
        })
        ctx.record(f"hyper_aleatoric_{k}.ckpt")
        source = HyperDiffusionSource(phi, hyper_config)
        matrices, alea, _ = _grid_stats(source, diff_config, y_grid,
                                        scale.m, scale.n, seed, ctx.workers)
        estimate = float(alea.mean())
        rows.append((float(sigma2), estimate, "ok"))
        per_member_vars = np.concatenate(
            [mat.values.var(axis=1).reshape(-1) for mat in matrices])
        hist_series.append((f"sigma2={sigma2:g}", per_member_vars))
    ctx.write_csv("aleatoric_sweep.csv",
                  ["noise_variance", "aleatoric_estimate", "status"], rows)
    if hist_series:
        emit_plot(hist_series, "histogram", ctx.path("aleatoric_hist.svg"),
                  title="Distribution of per-weight sample variances",
                  xlabel="sample variance", bins=60)
        ctx.record("aleatoric_hist.svg")
    ctx.finish("aleatoric-sweep", {
        "scale": scale.__dict__, "epochs": epochs,
        "dataset_size": dataset_size, "noise_levels": list(noise_levels),
    })
    return rows


def run_epistemic_sweep(ctx: RunContext, scale: Scale = DESK, epochs: int = 500,
                        noise_variance: float = 0.01, sizes=DATASET_SIZES,
                        diff_config: DiffusionConfig | None = None):
    """Dataset-size sweep: estimate mean epistemic variance per |D|."""
    diff_config = diff_config or toy_diffusion_config()
    hyper_config = toy_hyper_config(diff_config)
    y_grid = condition_grid(scale.epi_conditions)
    rows, hist_series = [], []
    for k, size in enumerate(sizes):
        seed = stream_key(ctx.master_seed, "epistemic", k) % (2 ** 63)
        toy = ToyProblemConfig(noise_variance=noise_variance, dataset_size=size,
                               seed=seed)
        try:
            (x, y), phi, history = _train_hyper_on_toy(
                toy, diff_config, hyper_config, epochs, seed)
        except FloatingPointError as exc:
            rows.append((int(size), float("nan"), f"diverged: {exc}"))
            continue
        source = HyperDiffusionSource(phi, hyper_config)
        matrices, _, epi = _grid_stats(source, diff_config, y_grid,
                                       scale.m, scale.epi_n, seed, ctx.workers)
        estimate = float(epi.mean())
        rows.append((int(size), estimate, "ok"))
        member_means = np.concatenate(
            [mat.values.mean(axis=1).reshape(-1) for mat in matrices])
        # centered for display, like the published figure
        hist_series.append((f"|D|={size}", member_means - member_means.mean()))
    ctx.write_csv("epistemic_sweep.csv",
                  ["dataset_size", "epistemic_estimate", "status"], rows)
    if hist_series:
        emit_plot(hist_series, "histogram", ctx.path("epistemic_hist.svg"),
                  title="Distribution of per-weight sample means (centered)",
                  xlabel="sample mean (centered)", bins=60)
        ctx.record("epistemic_hist.svg")
    ctx.finish("epistemic-sweep", {
        "scale": scale.__dict__, "epochs": epochs,
        "noise_variance": noise_variance, "sizes": [int(s) for s in sizes],
    })
    return rows


def run_sampling_ablation(ctx: RunContext, source, diff_config: DiffusionConfig,
                          m_values=(2, 4, 8, 16), n_values=(2, 4, 8, 16),
                          fixed_n: int = 100, fixed_m: int = 10,
                          repeats: int = 20, probe_y: float = 2.0):
    """M/N sweeps: uncertainty profiles plus estimator spread over repeats."""
    y_grid = np.concatenate([condition_grid(11),
                             np.array(OOD_CONDITIONS)[:, None]])
    profile_rows = []
    m_profiles, n_profiles = [], []
    for m in m_values:
        seed = stream_key(ctx.master_seed, "ablate-m", m) % (2 ** 63)
        _, alea, epi = _grid_stats(source, diff_config, y_grid, m, fixed_n,
                                   seed, ctx.workers)
        for yv, a, e in zip(y_grid[:, 0], alea, epi):
            profile_rows.append(("m-sweep", int(m), int(fixed_n), float(yv),
                                 float(a), float(e)))
        m_profiles.append((f"M={m}", y_grid[:, 0], epi))
    for n in n_values:
        seed = stream_key(ctx.master_seed, "ablate-n", n) % (2 ** 63)
        _, alea, epi = _grid_stats(source, diff_config, y_grid, fixed_m, n,
                                   seed, ctx.workers)
        for yv, a, e in zip(y_grid[:, 0], alea, epi):
            profile_rows.append(("n-sweep", int(fixed_m), int(n), float(yv),
                                 float(a), float(e)))
        n_profiles.append((f"N={n}", y_grid[:, 0], alea))
    ctx.write_csv("ablation_profiles.csv",
                  ["sweep", "m", "n", "y", "aleatoric", "epistemic"],
                  profile_rows)
    emit_plot(m_profiles, "line", ctx.path("ablation_m_epistemic.svg"),
              title="Epistemic profile vs number of weight draws",
              xlabel="condition y", ylabel="epistemic variance")
    ctx.record("ablation_m_epistemic.svg")
    emit_plot(n_profiles, "line", ctx.path("ablation_n_aleatoric.svg"),
              title="Aleatoric profile vs samples per weight",
              xlabel="condition y", ylabel="aleatoric variance")
    ctx.record("ablation_n_aleatoric.svg")

    # Estimator spread over repeats; three deliberate design points.
    #
    # 1. The member pools are part of the ablation's fixed configuration:
    #    repeats re-run the diffusion sampling only. Redrawing members per
    #    repeat buries the M/N convergence under the heavy tail of member
    #    quality (rare badly-calibrated members), which 20 repeats of any
    #    mean-like statistic cannot average out.
    # 2. The M sweep averages over several probe conditions, each with its
    #    own fixed pool, so the trend does not hinge on the pool prefix at
    #    a single condition.
    # 3. Both sweeps report the bias-corrected (unbiased) estimator. The
    #    headline decomposition uses population variances so its identity is
    #    exact, but here the population estimator's (1 - 1/k) mean growth
    #    cancels most of the spread decrease at the smallest k, hiding the
    #    convergence this ablation is meant to show.
    spread_rows = []
    y_probe = np.array([[probe_y]])
    probe_grid = condition_grid(8, -3.0, 3.0)
    pool_seed = stream_key(ctx.master_seed, "spread-pool") % (2 ** 63)
    for n in n_values:
        estimates = []
        for r in range(repeats):
            seed = stream_key(ctx.master_seed, "spread-n", n, r) % (2 ** 63)
            mats = build_sample_grid(source, diff_config, y_probe, fixed_m, n,
                                     seed, ctx.workers, member_seed=pool_seed)
            estimates.append(n / (n - 1) * float(aleatoric(mats[0])[0]))
        spread_rows.append(("n-sweep", int(fixed_m), int(n),
                            float(np.mean(estimates)), float(np.std(estimates))))
    for m in m_values:
        estimates = []
        for r in range(repeats):
            per_cond = []
            for c, y_row in enumerate(probe_grid):
                seed = stream_key(ctx.master_seed, "spread-m", m, r, c) % (2 ** 63)
                pool = stream_key(ctx.master_seed, "spread-pool", c) % (2 ** 63)
                mats = build_sample_grid(source, diff_config, y_row[None, :],
                                         m, fixed_n, seed, ctx.workers,
                                         member_seed=pool)
                per_cond.append(m / (m - 1) * float(epistemic(mats[0])[0]))
            estimates.append(float(np.mean(per_cond)))
        spread_rows.append(("m-sweep", int(m), int(fixed_n),
                            float(np.mean(estimates)), float(np.std(estimates))))
    ctx.write_csv("ablation_estimator_spread.csv",
                  ["sweep", "m", "n", "estimate_mean", "estimate_std"],
                  spread_rows)
    ctx.finish("sampling-ablation", {
        "m_values": list(m_values), "n_values": list(n_values),
        "fixed_n": fixed_n, "fixed_m": fixed_m, "repeats": repeats,
        "probe_y": probe_y,
    })
    return profile_rows, spread_rows


def run_ood_probe(ctx: RunContext, sources: dict, diff_config: DiffusionConfig,
                  scale: Scale = DESK, in_dist_points: int = 11,
                  ood_conditions=OOD_CONDITIONS):
    """Epistemic uncertainty inside vs outside the training support."""
    y_in = condition_grid(in_dist_points)
    y_ood = np.array(ood_conditions)[:, None]
    y_grid = np.concatenate([y_in, y_ood])
    rows, summary_rows = [], []
    for name, source in sorted(sources.items()):
        seed = stream_key(ctx.master_seed, "ood", name) % (2 ** 63)
        m = scale.m if source.count is None else min(scale.m, source.count)
        _, alea, epi = _grid_stats(source, diff_config, y_grid, m,
                                   scale.n, seed, ctx.workers)
        for yv, a, e in zip(y_grid[:, 0], alea, epi):
            region = "in" if -5.0 <= yv <= 5.0 else "ood"
            rows.append((name, float(yv), region, float(a), float(e)))
        epi_in = epi[:in_dist_points]
        epi_ood = epi[in_dist_points:]
        summary_rows.append((name, float(np.median(epi_in)),
                             float(np.percentile(epi_in, 90)),
                             *(float(v) for v in epi_ood)))
    ctx.write_csv("ood_profile.csv",
                  ["strategy", "y", "region", "aleatoric", "epistemic"], rows)
    ctx.write_csv("ood_summary.csv",
                  ["strategy", "epistemic_in_median", "epistemic_in_p90"]
                  + [f"epistemic_y{y:g}" for y in ood_conditions],
                  summary_rows)
    ctx.finish("ood-probe", {
        "scale": scale.__dict__, "in_dist_points": in_dist_points,
        "ood_conditions": list(ood_conditions),
        "strategies": sorted(sources),
    })
    return rows, summary_rows
