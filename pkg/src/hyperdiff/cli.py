"""Command-line experiment driver.

Subcommands: gen-data, train, sample, decompose, sweep-aleatoric,
sweep-epistemic, ablate-sampling, ood-probe, gradcheck. Global flags
--seed/--out/--config/--workers/--scale apply to all of them.
"""

import argparse
import json
import sys

import numpy as np

from . import autodiff as ad
from .checkpoint import load_checkpoint, save_checkpoint
from .diffusion import DiffusionConfig, make_schedule, training_loss
from .experiments import (SCALES, RunContext, run_aleatoric_sweep,
                          run_epistemic_sweep, run_ood_probe,
                          run_sampling_ablation, toy_diffusion_config,
                          toy_hyper_config)
from .gradcheck import finite_diff_check
from .hyper import (HyperNetConfig, TrainRunConfig, generate_weights,
                    train_deep_ensemble, train_hyper_diffusion,
                    train_single_diffusion)
from .models import MlpSpec, TimeEmbedding, init_weights, mlp_forward
from .rng import stream
from .strategies import EnsembleSource, HyperDiffusionSource, McDropoutSource
from .toy import ToyProblemConfig, gen_toy_data, load_dataset, save_dataset
from .uq import SampleMatrix, build_sample_matrix, decompose, matrix_to_csv, report_to_csv

CONFIG_SCHEMA = {
    "type": "object",
    "required": ["version"],
    "properties": {
        "version": {"type": "integer", "enum": [1]},
        "options": {"type": "object"},
    },
    "additionalProperties": False,
}


def load_config(path):
    with open(path) as fh:
        raw = json.load(fh)
    import jsonschema
    jsonschema.validate(raw, CONFIG_SCHEMA)
    return raw.get("options", {})


def _opt(options, key, default):
    return options.get(key, default)


def _hyper_meta(hyper_config, diff_config, seed, epochs, strategy):
    return {
        "strategy": strategy,
        "latent_dim": hyper_config.latent_dim,
        "sigma_z": hyper_config.sigma_z,
        "output_scale": hyper_config.output_scale,
        "backbone_layer_sizes": list(diff_config.backbone.layer_sizes),
        "schedule_T": diff_config.schedule.T,
        "num_frequencies": diff_config.time_emb.num_frequencies,
        "x_clip": diff_config.x_clip,
        "seed": seed,
        "epochs": epochs,
    }


def _diffusion_meta(diff_config, seed, epochs, strategy, **extra):
    meta = {
        "strategy": strategy,
        "schedule_T": diff_config.schedule.T,
        "num_frequencies": diff_config.time_emb.num_frequencies,
        "x_clip": diff_config.x_clip,
        "seed": seed,
        "epochs": epochs,
    }
    meta.update(extra)
    return meta


def config_from_header(header) -> DiffusionConfig:
    sizes = header.get("backbone_layer_sizes") or header["layer_sizes"]
    emb = TimeEmbedding(header.get("num_frequencies", 8))
    return DiffusionConfig(make_schedule(header.get("schedule_T", 100)),
                           MlpSpec(tuple(sizes)), data_dim=1, cond_dim=1,
                           time_emb=emb, x_clip=header.get("x_clip", 3.4))


def source_from_checkpoint(path):
    """Rebuild a weight source plus its diffusion config from one checkpoint."""
    weights, header = load_checkpoint(path)
    strategy = header.get("strategy", "diffusion")
    diff_config = config_from_header(header)
    if strategy == "hyper-diffusion":
        hyper_config = HyperNetConfig(
            latent_dim=header["latent_dim"], sigma_z=header["sigma_z"],
            hyper_spec=weights.spec, output_scale=header["output_scale"])
        return HyperDiffusionSource(weights, hyper_config), diff_config
    if strategy == "mc-dropout":
        return McDropoutSource(weights, header.get("dropout_rate", 0.1)), diff_config
    return EnsembleSource([weights]), diff_config


def cmd_gen_data(args, options):
    toy = ToyProblemConfig(
        noise_variance=float(_opt(options, "noise_variance", 0.01)),
        dataset_size=int(_opt(options, "dataset_size", 500)),
        y_range=tuple(_opt(options, "y_range", (-5.0, 5.0))),
        seed=args.seed)
    x, y = gen_toy_data(toy)
    ctx = RunContext(args.out, args.seed, args.workers)
    save_dataset(ctx.path("data.csv"), x, y, toy)
    ctx.record("data.csv")
    ctx.record("data.csv.json")
    ctx.finish("gen-data", {"noise_variance": toy.noise_variance,
                            "dataset_size": toy.dataset_size,
                            "y_range": list(toy.y_range)})
    print(f"wrote {ctx.path('data.csv')} ({toy.dataset_size} pairs)")
    return 0


def cmd_train(args, options):
    x, y = load_dataset(args.data)
    diff_config = toy_diffusion_config(T=int(_opt(options, "T", 100)))
    epochs = int(_opt(options, "epochs", 500))
    run = TrainRunConfig(
        epochs=epochs,
        batch_size=int(_opt(options, "batch_size", 32)),
        learning_rate=float(_opt(options, "learning_rate", 1e-3)),
        master_seed=args.seed,
        strategy=args.strategy,
        ensemble_size=int(_opt(options, "ensemble_size", 5)),
        dropout_rate=float(_opt(options, "dropout_rate", 0.1)))
    ctx = RunContext(args.out, args.seed, args.workers)
    if args.strategy == "hyper-diffusion":
        hyper_config = toy_hyper_config(diff_config)
        phi, history = train_hyper_diffusion((x, y), diff_config, hyper_config, run)
        name = "hyper.ckpt"
        save_checkpoint(ctx.path(name), phi, "hyper",
                        _hyper_meta(hyper_config, diff_config, args.seed,
                                    epochs, "hyper-diffusion"))
        ctx.record(name)
    elif args.strategy == "deep-ensemble":
        members = train_deep_ensemble((x, y), diff_config, run)
        history = []
        for i, theta in enumerate(members):
            name = f"ensemble_{i}.ckpt"
            save_checkpoint(ctx.path(name), theta, "diffusion",
                            _diffusion_meta(diff_config, args.seed, epochs,
                                            "deep-ensemble", member=i))
            ctx.record(name)
    elif args.strategy == "mc-dropout":
        theta, history = train_single_diffusion((x, y), diff_config, run,
                                                dropout_rate=run.dropout_rate)
        name = "mc_dropout.ckpt"
        save_checkpoint(ctx.path(name), theta, "diffusion",
                        _diffusion_meta(diff_config, args.seed, epochs,
                                        "mc-dropout",
                                        dropout_rate=run.dropout_rate))
        ctx.record(name)
    else:
        raise SystemExit(f"unknown strategy {args.strategy}")
    ctx.finish("train", {"strategy": args.strategy, "epochs": epochs,
                         "data": args.data})
    if history:
        print(f"final epoch mean loss: {history[-1]:.6f}")
    return 0


def cmd_sample(args, options):
    source, diff_config = source_from_checkpoint(args.checkpoint)
    matrix = build_sample_matrix(source, diff_config, [args.y], args.m, args.n,
                                 args.seed, args.workers)
    ctx = RunContext(args.out, args.seed, args.workers)
    matrix_to_csv(matrix, ctx.path("samples.csv"))
    ctx.record("samples.csv")
    ctx.finish("sample", {"y": args.y, "m": args.m, "n": args.n,
                          "checkpoint": args.checkpoint})
    print(f"wrote {ctx.path('samples.csv')} ({args.m}x{args.n} samples)")
    return 0


def load_matrix_csv(path) -> SampleMatrix:
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        dim = len(header) - 2
        rows = [line.strip().split(",") for line in fh if line.strip()]
    m = max(int(r[0]) for r in rows) + 1
    n = max(int(r[1]) for r in rows) + 1
    values = np.empty((m, n, dim))
    for r in rows:
        values[int(r[0]), int(r[1])] = [float(v) for v in r[2:]]
    return SampleMatrix(values)


def cmd_decompose(args, options):
    matrix = load_matrix_csv(args.matrix)
    report = decompose(matrix)
    ctx = RunContext(args.out, args.seed, args.workers)
    report_to_csv(report, ctx.path("report.csv"))
    ctx.record("report.csv")
    ctx.finish("decompose", {"matrix": args.matrix})
    print(f"mean={report.mean} aleatoric={report.aleatoric} "
          f"epistemic={report.epistemic} total={report.total}")
    return 0


def cmd_sweep_aleatoric(args, options):
    ctx = RunContext(args.out, args.seed, args.workers)
    scale = SCALES[args.scale]
    rows = run_aleatoric_sweep(ctx, scale,
                               epochs=int(_opt(options, "epochs", 500)),
                               dataset_size=int(_opt(options, "dataset_size", 500)))
    for sigma2, estimate, status in rows:
        print(f"sigma2={sigma2:g} aleatoric={estimate:.6g} [{status}]")
    return 0


def cmd_sweep_epistemic(args, options):
    ctx = RunContext(args.out, args.seed, args.workers)
    scale = SCALES[args.scale]
    rows = run_epistemic_sweep(ctx, scale,
                               epochs=int(_opt(options, "epochs", 500)))
    for size, estimate, status in rows:
        print(f"|D|={size} epistemic={estimate:.6g} [{status}]")
    return 0


def cmd_ablate_sampling(args, options):
    source, diff_config = source_from_checkpoint(args.checkpoint)
    ctx = RunContext(args.out, args.seed, args.workers)
    _, spread = run_sampling_ablation(
        ctx, source, diff_config,
        repeats=int(_opt(options, "repeats", 20)))
    for sweep, m, n, est_mean, est_std in spread:
        print(f"{sweep} M={m} N={n} estimate={est_mean:.6g} std={est_std:.6g}")
    return 0


def cmd_ood_probe(args, options):
    sources = {}
    hyper_source, diff_config = source_from_checkpoint(args.hyper)
    sources["hyper-diffusion"] = hyper_source
    if args.ensemble:
        members = [load_checkpoint(p)[0] for p in args.ensemble]
        sources["deep-ensemble"] = EnsembleSource(members)
    if args.mc_dropout:
        mc_source, _ = source_from_checkpoint(args.mc_dropout)
        sources["mc-dropout"] = mc_source
    ctx = RunContext(args.out, args.seed, args.workers)
    _, summary = run_ood_probe(ctx, sources, diff_config, SCALES[args.scale])
    for row in summary:
        print(f"{row[0]}: in-dist median epistemic {row[1]:.6g}, "
              f"OOD values {[f'{v:.6g}' for v in row[3:]]}")
    return 0


def cmd_gradcheck(args, options):
    rng = stream(args.seed, "gradcheck")
    failures = 0

    spec = MlpSpec((3, 8, 8, 8, 8, 1))
    w = init_weights(spec, rng)
    x = rng.standard_normal((4, 3))

    def mlp_loss(node):
        out = mlp_forward(spec, node, ad.constant(x))
        return ad.mean_(ad.square(out))

    report = finite_diff_check(mlp_loss, w.values)
    print(f"5-layer MLP: {report}")
    failures += not report.passed

    diff_config = toy_diffusion_config(T=10, hidden=6, depth=2, num_frequencies=2)
    theta = init_weights(diff_config.backbone, rng)
    x0 = rng.standard_normal((4, 1))
    y = rng.standard_normal((4, 1))

    def diff_loss(node):
        return training_loss(diff_config, node,
                             x0, y, stream(args.seed, "gradcheck-loss"))

    report = finite_diff_check(diff_loss, theta.values)
    print(f"diffusion loss: {report}")
    failures += not report.passed

    hyper_config = HyperNetConfig.for_backbone(diff_config.backbone,
                                               latent_dim=2, hidden=8, depth=2)
    phi = init_weights(hyper_config.hyper_spec, rng)
    z = stream(args.seed, "gradcheck-z").normal(size=2)

    def hyper_loss(node):
        theta_node = generate_weights(hyper_config, node, z)
        return training_loss(diff_config, theta_node, x0, y,
                             stream(args.seed, "gradcheck-loss"))

    report = finite_diff_check(hyper_loss, phi.values)
    print(f"hyper-diffusion loss: {report}")
    failures += not report.passed
    return 1 if failures else 0


def build_parser():
    parser = argparse.ArgumentParser(prog="hyperdiff",
                                     description=__doc__.splitlines()[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="master seed")
    common.add_argument("--out", default="out", help="output directory")
    common.add_argument("--config", default=None, help="JSON config file")
    common.add_argument("--workers", type=int, default=1,
                        help="sampling workers (wall time only, never results)")
    common.add_argument("--scale", choices=("desk", "full"), default="desk",
                        help="sampling effort: desk=M20/N1000, full=M100/N10000")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("gen-data", parents=[common])

    p = sub.add_parser("train", parents=[common])
    p.add_argument("--data", required=True, help="training CSV from gen-data")
    p.add_argument("--strategy", default="hyper-diffusion",
                   choices=("hyper-diffusion", "deep-ensemble", "mc-dropout"))

    p = sub.add_parser("sample", parents=[common])
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--y", type=float, required=True)
    p.add_argument("--m", type=int, default=10)
    p.add_argument("--n", type=int, default=100)

    p = sub.add_parser("decompose", parents=[common])
    p.add_argument("--matrix", required=True, help="sample matrix CSV")

    sub.add_parser("sweep-aleatoric", parents=[common])
    sub.add_parser("sweep-epistemic", parents=[common])

    p = sub.add_parser("ablate-sampling", parents=[common])
    p.add_argument("--checkpoint", required=True, help="hyper checkpoint")

    p = sub.add_parser("ood-probe", parents=[common])
    p.add_argument("--hyper", required=True)
    p.add_argument("--ensemble", nargs="*", default=[])
    p.add_argument("--mc-dropout", default=None)

    sub.add_parser("gradcheck", parents=[common])
    return parser


HANDLERS = {
    "gen-data": cmd_gen_data,
    "train": cmd_train,
    "sample": cmd_sample,
    "decompose": cmd_decompose,
    "sweep-aleatoric": cmd_sweep_aleatoric,
    "sweep-epistemic": cmd_sweep_epistemic,
    "ablate-sampling": cmd_ablate_sampling,
    "ood-probe": cmd_ood_probe,
    "gradcheck": cmd_gradcheck,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    options = load_config(args.config) if args.config else {}
    return HANDLERS[args.command](args, options)


if __name__ == "__main__":
    sys.exit(main())
