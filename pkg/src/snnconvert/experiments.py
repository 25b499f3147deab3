"""Experiment orchestration: train, convert, sweep horizons, write reports.

A sweep trains one source network (or loads a saved one), converts it
once per initialization strategy, and evaluates every converted network
over the whole horizon list in a single simulation pass per sample.  All
aggregation is integer counting, so batch slicing does not change any
result.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field, replace

import numpy as np

from .convert import (ConversionReport, InitStrategy, ThresholdMode, convert,
                      constant_fraction_init)
from .datasets import Dataset, as_flat_dataset, as_image_dataset
from .errors import ConfigError
from .network import AnnNetwork, desk_cnn, desk_mlp, evaluate, init_network
from .opcount import OpCountReport, count_ops_from_spike_counts
from .rng import Rng
from .simulator import SnnNetwork, run_batch_dynamics
from .training import TrainConfig, train


@dataclass
class ExperimentConfig:
    data_path: str = ""
    data_format: str = "csv"
    arch: str = "mlp"  # "mlp" or "cnn"
    train: TrainConfig = field(default_factory=TrainConfig)
    threshold: ThresholdMode = field(default_factory=lambda: ThresholdMode("trained_clip"))
    inits: list = field(default_factory=list)
    t_values: list = field(default_factory=lambda: [1, 2, 4, 8, 16, 32])
    outdir: str = "out"
    seed: int = 0
    model_path: str = ""
    eval_batch: int = 256

    def validate(self) -> None:
        ts = list(self.t_values)
        if not ts or any(t < 1 for t in ts) or any(b <= a for a, b in zip(ts, ts[1:])):
            raise ConfigError(f"horizon list must be strictly increasing positive ints, got {ts}")
        if self.arch not in ("mlp", "cnn"):
            raise ConfigError(f"unknown architecture {self.arch!r}")
        if not self.inits:
            raise ConfigError("at least one init strategy is required")


@dataclass
class SweepResult:
    rows: list  # (strategy label, T, snn accuracy)
    ann_accuracy: float
    latency: dict  # (strategy label, layer index) -> mean first-spike step
    energy: dict  # strategy label -> OpCountReport
    strategies: list
    t_values: list
    spiking_layers: list

    def accuracy(self, strategy: str, t: int) -> float:
        for s, tv, acc in self.rows:
            if s == strategy and tv == t:
                return acc
        raise KeyError(f"no row for ({strategy}, {t})")


def shape_dataset(data: Dataset, arch: str) -> Dataset:
    return as_image_dataset(data) if arch == "cnn" else as_flat_dataset(data)


def build_architecture(arch: str, data: Dataset) -> list:
    if arch == "mlp":
        return desk_mlp(input_dim=data.inputs.shape[1], num_classes=data.num_classes)
    return desk_cnn(input_shape=data.inputs.shape[1:], num_classes=data.num_classes)


def train_or_load(cfg: ExperimentConfig, train_data: Dataset) -> AnnNetwork:
    from .modelio import load_network, save_network
    if cfg.model_path and os.path.exists(cfg.model_path):
        net = load_network(cfg.model_path)
        if not isinstance(net, AnnNetwork):
            raise ConfigError(f"{cfg.model_path}: expected an analog model")
        return net
    layers = build_architecture(cfg.arch, train_data)
    net = init_network(layers, train_data.inputs.shape[1:], Rng(cfg.train.seed))
    net = train(net, train_data, cfg.train)
    if cfg.model_path:
        save_network(net, cfg.model_path)
    return net


def snn_accuracy_curve(snn: SnnNetwork, test: Dataset, t_values: list,
                       batch_size: int = 256, want_first_spike: bool = False,
                       want_spike_counts: bool = False) -> dict:
    """Accuracy at every horizon in one pass, plus optional collectors."""
    steps = max(t_values)
    n = len(test)
    correct = {t: 0 for t in t_values}
    first_sums: dict = {}
    first_counts = 0
    counts: dict = {}
    for start in range(0, n, batch_size):
        stop = min(start + batch_size, n)
        out = run_batch_dynamics(snn, test.inputs[start:stop], steps, record_ts=list(t_values),
                                 want_first_spike=want_first_spike,
                                 want_spike_counts=want_spike_counts)
        for t in t_values:
            correct[t] += int(np.sum(out["predictions"][t] == test.labels[start:stop]))
        if want_first_spike:
            for layer, arr in out["first_spike"].items():
                first_sums[layer] = first_sums.get(layer, 0) + int(arr.sum())
            first_counts += (stop - start)
        if want_spike_counts:
            for layer, arr in out["spike_counts"].items():
                counts[layer] = counts.get(layer, 0) + arr
    result = {"accuracy": {t: correct[t] / n for t in t_values}}
    if want_first_spike:
        shapes = {layer: arr for layer, arr in counts.items()} if counts else None
        result["mean_first_spike"] = {
            layer: first_sums[layer] / (first_counts * _neurons(snn, layer))
            for layer in first_sums}
    if want_spike_counts:
        result["spike_counts"] = counts
    return result


def _neurons(snn: SnnNetwork, layer: int) -> int:
    from .network import output_shapes
    return int(np.prod(output_shapes(snn.layers, snn.input_shape)[layer]))


def run_sweep(cfg: ExperimentConfig, train_data: Dataset, test_data: Dataset,
              ann: AnnNetwork | None = None) -> SweepResult:
    """Evaluate every configured init strategy across the horizon list."""
    cfg.validate()
    train_data = shape_dataset(train_data, cfg.arch)
    test_data = shape_dataset(test_data, cfg.arch)
    if ann is None:
        ann = train_or_load(cfg, train_data)
    ann_acc = evaluate(ann, test_data)

    calib = train_data if cfg.threshold.kind == "data_percentile" else None
    rows, latency, energy, labels = [], {}, {}, []
    for init in cfg.inits:
        snn, _ = convert(ann, cfg.threshold, init, calib)
        labels.append(init.label)
        curve = snn_accuracy_curve(snn, test_data, cfg.t_values, batch_size=cfg.eval_batch,
                                   want_first_spike=True, want_spike_counts=True)
        for t in cfg.t_values:
            rows.append((init.label, t, curve["accuracy"][t]))
        for layer, mean_step in curve["mean_first_spike"].items():
            latency[(init.label, layer)] = mean_step
        energy[init.label] = count_ops_from_spike_counts(ann, snn, curve["spike_counts"],
                                                         inferences=len(test_data))
    spiking = sorted({layer for (_, layer) in latency})
    return SweepResult(rows, ann_acc, latency, energy, labels, list(cfg.t_values), spiking)


@dataclass
class ConstantSweepResult:
    fractions: list
    t_values: list
    accuracy: np.ndarray  # [len(fractions), len(t_values)]
    best_fraction: dict  # T -> centre of the argmax plateau
    ann_accuracy: float

    def column(self, fraction: float) -> np.ndarray:
        idx = self.fractions.index(fraction)
        return self.accuracy[idx]


def constant_sweep(cfg: ExperimentConfig, train_data: Dataset, test_data: Dataset,
                   fractions=None, ann: AnnNetwork | None = None) -> ConstantSweepResult:
    """Accuracy surface over (constant init fraction, horizon).

    The per-horizon best fraction is reported as the midpoint of the
    argmax plateau: accuracy curves flatten once the horizon is long
    enough, and the centre of the maximizing set is the stable summary of
    where the optimum sits.
    """
    fractions = [round(c, 10) for c in (fractions if fractions is not None
                                        else np.linspace(0.0, 1.0, 11))]
    if any(c < 0 or c > 1 for c in fractions):
        raise ConfigError("init fractions must lie in [0, 1]")
    sweep_cfg = replace(cfg, inits=[constant_fraction_init(c) for c in fractions])
    result = run_sweep(sweep_cfg, train_data, test_data, ann=ann)
    acc = np.array([[result.accuracy(f"const:{c:g}", t) for t in cfg.t_values]
                    for c in fractions])
    best = {}
    for j, t in enumerate(cfg.t_values):
        col = acc[:, j]
        winners = np.where(col == col.max())[0]
        best[t] = float(np.mean([fractions[k] for k in winners]))
    return ConstantSweepResult(fractions, list(cfg.t_values), acc, best, result.ann_accuracy)


def _write_rows(path: str, header: str, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(header + "\n")
        for row in rows:
            fh.write(",".join(str(c) for c in row) + "\n")


def report(result: SweepResult, outdir: str) -> list:
    """Write sweep.csv, latency.csv, energy.csv and the accuracy chart.

    Returns the list of paths written.  Numbers are rendered with repr,
    so identical results produce byte-identical files.
    """
    if not result.rows:
        raise ConfigError("cannot report an empty sweep")
    os.makedirs(outdir, exist_ok=True)
    paths = []

    sweep_path = os.path.join(outdir, "sweep.csv")
    _write_rows(sweep_path, "strategy,T,accuracy",
                [(s, t, repr(a)) for s, t, a in result.rows])
    paths.append(sweep_path)

    latency_path = os.path.join(outdir, "latency.csv")
    rows = [(layer, strategy, repr(result.latency[(strategy, layer)]))
            for layer in result.spiking_layers for strategy in result.strategies]
    _write_rows(latency_path, "layer,strategy,mean_first_spike_step", rows)
    paths.append(latency_path)

    energy_path = os.path.join(outdir, "energy.csv")
    energy_rows = [("-", "ann_accuracy", repr(result.ann_accuracy))]
    for strategy in result.strategies:
        for name, value in result.energy[strategy].rows():
            energy_rows.append((strategy, name, repr(value)))
    _write_rows(energy_path, "strategy,metric,value", energy_rows)
    paths.append(energy_path)

    from .plots import save_accuracy_chart
    chart_path = os.path.join(outdir, "accuracy_vs_T.svg")
    save_accuracy_chart(result, chart_path)
    paths.append(chart_path)
    return paths


def report_constant(result: ConstantSweepResult, outdir: str) -> list:
    """Write the accuracy surface (heat table plus figure) and best fractions."""
    os.makedirs(outdir, exist_ok=True)
    paths = []
    heat_path = os.path.join(outdir, "constant_heat.csv")
    header = "fraction," + ",".join(f"T={t}" for t in result.t_values)
    rows = [[f"{c:g}"] + [repr(a) for a in result.accuracy[i]]
            for i, c in enumerate(result.fractions)]
    _write_rows(heat_path, header, rows)
    paths.append(heat_path)

    best_path = os.path.join(outdir, "best_fraction.csv")
    _write_rows(best_path, "T,best_fraction",
                [(t, repr(result.best_fraction[t])) for t in result.t_values])
    paths.append(best_path)

    from .plots import save_constant_heatmap
    fig_path = os.path.join(outdir, "constant_heat.svg")
    save_constant_heatmap(result, fig_path)
    paths.append(fig_path)
    return paths
