"""Command-line entry points.

Subcommands: gen-data, train, convert, simulate, sweep, constant-sweep,
verify-theorem, verify-oracle, energy.  All flags are long-form; the same
keys can come from a `key = value` config file given with --config, with
explicit flags taking precedence.  Exit codes: 0 success, 1 configuration
or input error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import os
import sys
import time

import numpy as np

from . import convert as conv
from . import datasets, experiments, modelio, theory, verification
from .errors import ConfigError, ParseError, SnnConvertError
from .network import AnnNetwork, evaluate
from .opcount import count_ops
from .rng import Rng
from .simulator import simulate
from .training import TrainConfig


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse usage errors are config errors (exit 1)
        raise ConfigError(message)


def parse_init(text: str) -> conv.InitStrategy:
    if text == "zero":
        return conv.zero_init()
    if text == "half":
        return conv.optimal_half_init()
    if text.startswith("const:"):
        return conv.constant_fraction_init(float(text.split(":", 1)[1]))
    if text == "uniform":
        return conv.uniform_random_init(seed=0)
    if text == "gauss":
        return conv.gaussian_random_init()
    if text.startswith("gauss:"):
        parts = text.split(":", 1)[1].split(",")
        if len(parts) != 2:
            raise ConfigError(f"expected gauss:<mu>,<sigma>, got {text!r}")
        return conv.gaussian_random_init(mu=float(parts[0]), sigma=float(parts[1]))
    raise ConfigError(f"unknown init strategy {text!r}")


def parse_threshold(text: str) -> conv.ThresholdMode:
    if text == "clip":
        return conv.ThresholdMode("trained_clip")
    if text.startswith("percentile:"):
        return conv.ThresholdMode("data_percentile", percentile=float(text.split(":", 1)[1]))
    raise ConfigError(f"unknown threshold mode {text!r}")


def parse_t_list(text: str) -> list:
    try:
        values = [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise ConfigError(f"bad horizon list {text!r}") from None
    if not values or any(t < 1 for t in values) or any(b <= a for a, b in zip(values, values[1:])):
        raise ConfigError(f"horizon list must be strictly increasing positive ints: {text!r}")
    return values


def load_config_file(path: str) -> dict:
    values = {}
    try:
        lines = open(path, encoding="utf-8").read().splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}") from None
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}: line {lineno}: expected 'key = value'")
        key, _, value = line.partition("=")
        values[key.strip().replace("-", "_")] = value.strip()
    return values


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", default=None, help="key = value file; flags override it")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="out", help="output directory")


def _add_data(p: argparse.ArgumentParser) -> None:
    p.add_argument("--data", default=None, help="training data path (csv, or idx images[,labels])")
    p.add_argument("--test-data", default=None, help="held-out data path")
    p.add_argument("--format", choices=["idx", "csv"], default="csv")
    p.add_argument("--arch", choices=["mlp", "cnn"], default="mlp")


def _add_train(p: argparse.ArgumentParser) -> None:
    p.add_argument("--lr", type=float, default=0.1)
    p.add_argument("--momentum", type=float, default=0.9)
    p.add_argument("--epochs", type=int, default=20)
    p.add_argument("--batch-size", type=int, default=64)
    p.add_argument("--weight-decay", type=float, default=5e-4)
    p.add_argument("--theta-decay", type=float, default=5e-4,
                   help="L2 decay of the clip upper bounds")
    p.add_argument("--lr-schedule", choices=["constant", "cosine"], default="cosine")


def build_parser() -> _Parser:
    parser = _Parser(prog="snnconvert")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="write a synthetic 10-class blob dataset")
    _add_common(p)
    p.add_argument("--train-samples", type=int, default=3000)
    p.add_argument("--test-samples", type=int, default=800)
    p.add_argument("--image-size", type=int, default=28)
    p.add_argument("--noise", type=float, default=0.35)
    p.add_argument("--data-format", choices=["csv", "idx"], default="csv")

    p = sub.add_parser("train", help="train a clipped-ReLU network")
    _add_common(p)
    _add_data(p)
    _add_train(p)
    p.add_argument("--model", default=None, help="where to save the trained model")

    p = sub.add_parser("convert", help="convert a trained model to spiking form")
    _add_common(p)
    _add_data(p)
    p.add_argument("--model", required=True, help="trained analog model file")
    p.add_argument("--snn-model", default=None, help="where to save the spiking model")
    p.add_argument("--init", action="append", default=None,
                   help="zero|half|const:<c>|uniform|gauss:<mu>,<sigma>")
    p.add_argument("--threshold", default="clip", help="clip|percentile:<p>")

    p = sub.add_parser("simulate", help="evaluate a spiking model at one horizon")
    _add_common(p)
    _add_data(p)
    p.add_argument("--model", required=True, help="spiking (or analog) model file")
    p.add_argument("--T", type=int, default=32)
    p.add_argument("--init", action="append", default=None)
    p.add_argument("--threshold", default="clip")
    p.add_argument("--trace-csv", default=None,
                   help="write a (layer,neuron,t,spike,potential) trace of the first sample")

    p = sub.add_parser("sweep", help="accuracy vs horizon for several init strategies")
    _add_common(p)
    _add_data(p)
    _add_train(p)
    p.add_argument("--model", default=None, help="load (or save) the analog model here")
    p.add_argument("--T-list", default="1,2,4,8,16,32")
    p.add_argument("--init", action="append", default=None,
                   help="repeatable; defaults to zero, half, uniform, gauss")
    p.add_argument("--threshold", default="clip")

    p = sub.add_parser("constant-sweep", help="accuracy surface over constant init fractions")
    _add_common(p)
    _add_data(p)
    _add_train(p)
    p.add_argument("--model", default=None)
    p.add_argument("--T-list", default="1,2,4,8,16,32")
    p.add_argument("--threshold", default="clip")
    p.add_argument("--c-grid", default="0.0,0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9,1.0")

    p = sub.add_parser("verify-theorem", help="closed-form error moments over a v0 grid")
    _add_common(p)
    p.add_argument("--v-thresh", type=float, default=1.0)
    p.add_argument("--T", type=int, default=8)
    p.add_argument("--grid-points", type=int, default=101)
    p.add_argument("--mc-samples", type=int, default=0,
                   help="if positive, also cross-check each grid point by sampling")

    p = sub.add_parser("verify-oracle", help="simulator vs staircase form, exact")
    _add_common(p)
    p.add_argument("--tuples", type=int, default=10000)

    p = sub.add_parser("energy", help="FLOP/SOP/energy report for a model on data")
    _add_common(p)
    _add_data(p)
    _add_train(p)
    p.add_argument("--model", default=None)
    p.add_argument("--T", type=int, default=32)
    p.add_argument("--init", action="append", default=None)
    p.add_argument("--threshold", default="clip")
    p.add_argument("--samples", type=int, default=64, help="images averaged over")
    return parser


def _load_dataset(path: str | None, fmt: str, what: str) -> datasets.Dataset:
    if not path:
        raise ConfigError(f"--{what} is required for this command")
    return datasets.ingest(path, fmt)


def _train_config(args) -> TrainConfig:
    return TrainConfig(learning_rate=args.lr, momentum=args.momentum, epochs=args.epochs,
                       batch_size=args.batch_size, weight_decay_w=args.weight_decay,
                       weight_decay_theta=args.theta_decay, lr_schedule=args.lr_schedule,
                       seed=args.seed)


def _experiment_config(args, inits=None) -> experiments.ExperimentConfig:
    return experiments.ExperimentConfig(
        data_path=args.data or "", data_format=args.format, arch=args.arch,
        train=_train_config(args), threshold=parse_threshold(args.threshold),
        inits=inits or [], t_values=parse_t_list(args.T_list),
        outdir=args.out, seed=args.seed, model_path=args.model or "")


def _default_inits(raw) -> list:
    if raw:
        return [parse_init(t) for t in raw]
    return [conv.zero_init(), conv.optimal_half_init(),
            conv.uniform_random_init(seed=0), conv.gaussian_random_init()]


def cmd_gen_data(args) -> int:
    os.makedirs(args.out, exist_ok=True)
    written = []
    for name, count, tag in (("train", args.train_samples, 1), ("test", args.test_samples, 2)):
        data = datasets.make_blob_images(count, seed=int(Rng(args.seed).derive(tag).seed),
                                         image_size=args.image_size, noise=args.noise)
        if args.data_format == "csv":
            path = os.path.join(args.out, f"{name}.csv")
            datasets.write_csv(datasets.as_flat_dataset(data), path)
            written.append(path)
        else:
            img = os.path.join(args.out, f"{name}-images.idx")
            lbl = os.path.join(args.out, f"{name}-labels.idx")
            datasets.write_idx(data, img, lbl)
            written.extend([img, lbl])
    for path in written:
        print(path)
    return 0


def cmd_train(args) -> int:
    train_data = experiments.shape_dataset(_load_dataset(args.data, args.format, "data"), args.arch)
    layers = experiments.build_architecture(args.arch, train_data)
    from .network import init_network
    net = init_network(layers, train_data.inputs.shape[1:], Rng(args.seed))
    started = time.time()
    net = experiments.train(net, train_data, _train_config(args))
    acc = evaluate(net, train_data)
    print(f"train accuracy {acc:.4f} ({time.time() - started:.1f}s)")
    if args.test_data:
        test = experiments.shape_dataset(_load_dataset(args.test_data, args.format, "test-data"),
                                         args.arch)
        print(f"test accuracy {evaluate(net, test):.4f}")
    model_path = args.model or os.path.join(args.out, "ann.txt")
    os.makedirs(os.path.dirname(model_path) or ".", exist_ok=True)
    modelio.save_network(net, model_path)
    print(model_path)
    return 0


def _load_ann(path: str) -> AnnNetwork:
    net = modelio.load_network(path)
    if not isinstance(net, AnnNetwork):
        raise ConfigError(f"{path}: expected an analog model")
    return net


def cmd_convert(args) -> int:
    ann = _load_ann(args.model)
    mode = parse_threshold(args.threshold)
    init = _default_inits(args.init)[1] if not args.init else parse_init(args.init[0])
    calib = None
    if mode.kind == "data_percentile":
        calib = experiments.shape_dataset(_load_dataset(args.data, args.format, "data"), args.arch)
    snn, rep = conv.convert(ann, mode, init, calib)
    os.makedirs(args.out, exist_ok=True)
    snn_path = args.snn_model or os.path.join(args.out, "snn.txt")
    modelio.save_network(snn, snn_path)
    rep_path = os.path.join(args.out, "conversion_report.csv")
    rep.write_csv(rep_path)
    print(snn_path)
    print(rep_path)
    return 0


def cmd_simulate(args) -> int:
    net = modelio.load_network(args.model)
    if isinstance(net, AnnNetwork):
        init = parse_init(args.init[0]) if args.init else conv.optimal_half_init()
        net, _ = conv.convert(net, parse_threshold(args.threshold), init)
    test = experiments.shape_dataset(_load_dataset(args.data, args.format, "data"), args.arch)
    curve = experiments.snn_accuracy_curve(net, test, [args.T])
    print(f"accuracy at T={args.T}: {curve['accuracy'][args.T]:.4f}")
    if args.trace_csv:
        from .simulator import export_trace_csv
        trace = simulate(net, test.inputs[0], args.T, record_potentials=True)
        export_trace_csv(trace, args.trace_csv)
        print(args.trace_csv)
    return 0


def cmd_sweep(args) -> int:
    cfg = _experiment_config(args, inits=_default_inits(args.init))
    train_data = _load_dataset(args.data, args.format, "data")
    test_data = _load_dataset(args.test_data or args.data, args.format, "test-data")
    result = experiments.run_sweep(cfg, train_data, test_data)
    for path in experiments.report(result, args.out):
        print(path)
    print(f"ann accuracy {result.ann_accuracy:.4f}")
    return 0


def cmd_constant_sweep(args) -> int:
    cfg = _experiment_config(args, inits=[conv.optimal_half_init()])
    fractions = [float(s) for s in args.c_grid.split(",") if s.strip()]
    train_data = _load_dataset(args.data, args.format, "data")
    test_data = _load_dataset(args.test_data or args.data, args.format, "test-data")
    result = experiments.constant_sweep(cfg, train_data, test_data, fractions=fractions)
    for path in experiments.report_constant(result, args.out):
        print(path)
    for t in result.t_values:
        print(f"T={t}: best fraction {result.best_fraction[t]:g}")
    return 0


def cmd_verify_theorem(args) -> int:
    grid = np.linspace(0.0, args.v_thresh, args.grid_points)
    sweep = theory.expected_error_sweep(args.v_thresh, args.T, grid)
    os.makedirs(args.out, exist_ok=True)
    csv_path = os.path.join(args.out, "expected_error_vs_v0.csv")
    sweep.write_csv(csv_path)
    from .plots import save_error_sweep_chart
    fig_path = os.path.join(args.out, "expected_error_vs_v0.svg")
    save_error_sweep_chart(sweep, fig_path)
    print(csv_path)
    print(fig_path)
    print(f"squared-error argmin at v0={sweep.argmin_v0:g} "
          f"(half threshold is {args.v_thresh / 2:g})")
    print(f"signed-error zero crossing at v0={sweep.signed_zero_crossing:g}")
    if args.mc_samples > 0:
        params = theory.FloorActivationParams(args.v_thresh, args.T, args.v_thresh / 2)
        sampler = theory.UniformSampler(args.v_thresh)
        signed, squared = theory.monte_carlo_error(params, sampler, args.mc_samples,
                                                   Rng(args.seed))
        print(f"monte carlo at v0=V/2: signed {signed:+.3e}, squared {squared:.3e}")
    return 0


def cmd_verify_oracle(args) -> int:
    started = time.time()
    check = verification.floor_form_check(args.tuples, seed=args.seed)
    print(f"{check.tuples} tuples, max rate difference {check.max_rate_difference!r}, "
          f"{check.mismatches} mismatches ({time.time() - started:.2f}s)")
    return 0 if check.mismatches == 0 else 2


def cmd_energy(args) -> int:
    test = experiments.shape_dataset(_load_dataset(args.data, args.format, "data"), args.arch)
    if args.model and os.path.exists(args.model):
        ann = _load_ann(args.model)
    else:
        cfg = _experiment_config(args, inits=[conv.optimal_half_init()])
        ann = experiments.train_or_load(cfg, test)
    init = parse_init(args.init[0]) if args.init else conv.optimal_half_init()
    mode = parse_threshold(args.threshold)
    calib = test if mode.kind == "data_percentile" else None
    snn, _ = conv.convert(ann, mode, init, calib)
    batch = test.inputs[: args.samples]
    trace = simulate(snn, batch, args.T)
    rep = count_ops(ann, snn, trace)
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, "energy.csv")
    rep.write_csv(path)
    print(path)
    print(f"ann {rep.ann_flops} flops, snn {rep.snn_sops:.1f} sops/inference, "
          f"energy ratio {rep.ratio:.1f}")
    return 0


_COMMANDS = {
    "gen-data": cmd_gen_data,
    "train": cmd_train,
    "convert": cmd_convert,
    "simulate": cmd_simulate,
    "sweep": cmd_sweep,
    "constant-sweep": cmd_constant_sweep,
    "verify-theorem": cmd_verify_theorem,
    "verify-oracle": cmd_verify_oracle,
    "energy": cmd_energy,
}

_NON_FLAG_KEYS = {"command"}


def _apply_config_file(parser: _Parser, argv: list) -> list:
    """Fold --config file values in as defaults; explicit flags win."""
    if "--config" not in argv:
        return argv
    idx = argv.index("--config")
    if idx + 1 >= len(argv):
        raise ConfigError("--config needs a file path")
    values = load_config_file(argv[idx + 1])
    extra = []
    for key, value in values.items():
        flag = "--" + key.replace("_", "-")
        if flag in argv:
            continue  # explicit flag overrides the file
        if key in _NON_FLAG_KEYS:
            continue
        extra.extend([flag, value])
    # insert after the subcommand so subparser flags resolve
    return argv[:1] + extra + argv[1:]


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        argv = _apply_config_file(parser, argv)
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except (ConfigError, ParseError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (SnnConvertError, OSError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
