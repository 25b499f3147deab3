"""Conversion of trained clipped-ReLU networks into spiking networks.

Weights and biases are copied bit for bit.  Each clipped layer becomes a
spiking layer whose threshold is its trained clip bound (or a percentile
of observed pre-clip activations over a calibration set), and whose start
potentials follow the chosen initialization strategy.  The bare output
layer stays an analog accumulator: no threshold, no start potential.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .datasets import Dataset
from .errors import ConfigError, ConversionError
from .network import AnnNetwork, forward_batch, output_shapes
from .rng import Rng
from .simulator import SnnNetwork, simulate

INIT_KINDS = ("zero", "optimal_half", "constant_fraction", "uniform_random", "gaussian_random")


@dataclass(frozen=True)
class InitStrategy:
    """Start-potential rule applied per spiking layer.

    zero              -> 0
    optimal_half      -> threshold / 2 (identical to constant_fraction(0.5))
    constant_fraction -> fraction * threshold
    uniform_random    -> iid uniform on [0, threshold]
    gaussian_random   -> iid normal(mu*threshold, sigma*threshold), truncated
                         to [0, threshold]
    """
    kind: str
    fraction: float = 0.5
    mu: float = 0.5
    sigma: float = 0.2
    seed: int = 0

    def __post_init__(self):
        if self.kind not in INIT_KINDS:
            raise ConfigError(f"unknown init strategy {self.kind!r}")
        if self.kind == "constant_fraction" and not 0.0 <= self.fraction <= 1.0:
            raise ConfigError(f"constant fraction must lie in [0, 1], got {self.fraction}")
        if self.kind == "gaussian_random" and self.sigma <= 0:
            raise ConfigError("gaussian init needs sigma > 0")

    @property
    def label(self) -> str:
        if self.kind == "zero":
            return "zero"
        if self.kind == "optimal_half":
            return "half"
        if self.kind == "constant_fraction":
            return f"const:{self.fraction:g}"
        if self.kind == "uniform_random":
            return "uniform"
        return f"gauss:{self.mu:g},{self.sigma:g}"


def zero_init() -> InitStrategy:
    return InitStrategy("zero")


def optimal_half_init() -> InitStrategy:
    return InitStrategy("optimal_half")


def constant_fraction_init(fraction: float) -> InitStrategy:
    return InitStrategy("constant_fraction", fraction=fraction)


def uniform_random_init(seed: int) -> InitStrategy:
    return InitStrategy("uniform_random", seed=seed)


def gaussian_random_init(mu: float = 0.5, sigma: float = 0.2, seed: int = 0) -> InitStrategy:
    return InitStrategy("gaussian_random", mu=mu, sigma=sigma, seed=seed)


@dataclass(frozen=True)
class ThresholdMode:
    """Threshold source: trained clip bounds, or an activation percentile."""
    kind: str  # "trained_clip" or "data_percentile"
    percentile: float = 99.9

    def __post_init__(self):
        if self.kind not in ("trained_clip", "data_percentile"):
            raise ConfigError(f"unknown threshold mode {self.kind!r}")
        if self.kind == "data_percentile" and not 0.0 < self.percentile <= 100.0:
            raise ConfigError(f"percentile must lie in (0, 100], got {self.percentile}")

    @property
    def label(self) -> str:
        return "clip" if self.kind == "trained_clip" else f"percentile:{self.percentile:g}"


@dataclass
class ConversionReport:
    """Per-spiking-layer summary of the produced network."""
    threshold_mode: str
    init_strategy: str
    layers: list[int]
    thresholds: list[float]
    v_init_mean: list[float]
    v_init_min: list[float]
    v_init_max: list[float]

    def write_csv(self, path: str) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("layer,threshold_mode,init_strategy,threshold,v_init_mean,v_init_min,v_init_max\n")
            for k, layer in enumerate(self.layers):
                fh.write(f"{layer},{self.threshold_mode},{self.init_strategy},"
                         f"{self.thresholds[k]!r},{self.v_init_mean[k]!r},"
                         f"{self.v_init_min[k]!r},{self.v_init_max[k]!r}\n")


def _percentile_thresholds(ann: AnnNetwork, calib: Dataset, percentile: float,
                           batch_size: int = 256) -> dict:
    """Percentile of each clipped layer's pre-clip activations over calib."""
    if len(calib) == 0:
        raise ConfigError("percentile threshold mode needs a non-empty calibration set")
    clipped = [i for i, s in enumerate(ann.layers) if s.has_clip]
    pools: dict = {i: [] for i in clipped}
    for start in range(0, len(calib), batch_size):
        _, _, preacts = forward_batch(ann, calib.inputs[start:start + batch_size],
                                      want_preacts=True)
        for i in clipped:
            pools[i].append(preacts[i].ravel())
    return {i: float(np.percentile(np.concatenate(pools[i]), percentile)) for i in clipped}


def _init_potentials(shape: tuple, threshold: float, init: InitStrategy, rng: Rng) -> np.ndarray:
    if init.kind == "zero":
        return np.zeros(shape, dtype=np.float64)
    if init.kind == "optimal_half":
        return np.full(shape, threshold / 2.0, dtype=np.float64)
    if init.kind == "constant_fraction":
        return np.full(shape, init.fraction * threshold, dtype=np.float64)
    if init.kind == "uniform_random":
        return rng.uniform(0.0, threshold, shape)
    return rng.truncated_normal(init.mu * threshold, init.sigma * threshold,
                                0.0, threshold, shape)


def convert(ann: AnnNetwork, mode: ThresholdMode, init: InitStrategy,
            calib: Dataset | None = None):
    """Build the spiking counterpart of a trained network.

    Returns (SnnNetwork, ConversionReport).  A calibration set is required
    exactly when mode is data_percentile.
    """
    if (calib is not None) != (mode.kind == "data_percentile"):
        raise ConfigError("calibration data must be given iff threshold mode is data_percentile")
    if ann.layers and ann.layers[-1].has_clip:
        raise ConversionError("the final layer must be bare (unclipped) to act as the readout")

    shapes = output_shapes(ann.layers, ann.input_shape)
    percentiles = (_percentile_thresholds(ann, calib, mode.percentile)
                   if mode.kind == "data_percentile" else None)
    rng = Rng(init.seed)

    thresholds, v_init = [], []
    rep_layers, rep_thr, rep_mean, rep_min, rep_max = [], [], [], [], []
    for i, spec in enumerate(ann.layers):
        if not spec.has_clip:
            thresholds.append(None)
            v_init.append(None)
            continue
        if percentiles is not None:
            thr = percentiles[i]
        else:
            thr = ann.clip_bounds[i]
        if thr is None or not np.isfinite(thr) or thr <= 0:
            raise ConversionError(f"layer {i}: degenerate threshold {thr!r}")
        thr = float(thr)
        v0 = _init_potentials(shapes[i], thr, init, rng)
        thresholds.append(thr)
        v_init.append(v0)
        rep_layers.append(i)
        rep_thr.append(thr)
        rep_mean.append(float(v0.mean()))
        rep_min.append(float(v0.min()))
        rep_max.append(float(v0.max()))

    snn = SnnNetwork(
        input_shape=tuple(ann.input_shape),
        layers=list(ann.layers),
        weights=[None if w is None else w.copy() for w in ann.weights],
        biases=[None if b is None else b.copy() for b in ann.biases],
        thresholds=thresholds,
        v_init=v_init,
        seed=ann.seed,
    )
    report = ConversionReport(mode.label, init.label, rep_layers, rep_thr,
                              rep_mean, rep_min, rep_max)
    return snn, report


@dataclass
class EquivalenceReport:
    probes: int
    steps: int
    total_spikes: int
    max_discrepancy: int


def rescale_to_unit_thresholds(snn: SnnNetwork) -> SnnNetwork:
    """Fold thresholds into the weights so every spiking layer fires at 1.

    Layer l's weights are multiplied by thr[l-1]/thr[l] (thr of the input
    side is 1), biases and start potentials divided by thr[l]; the bare
    output layer keeps its bias and only absorbs the upstream scale.
    """
    weights, biases, thresholds, v_init = [], [], [], []
    prev_thr = 1.0
    for i, spec in enumerate(snn.layers):
        if not spec.parametric:
            weights.append(None)
            biases.append(None)
            thresholds.append(None)
            v_init.append(None)
            continue
        thr = snn.thresholds[i]
        if thr is None:
            weights.append(snn.weights[i] * prev_thr)
            biases.append(snn.biases[i].copy())
            thresholds.append(None)
            v_init.append(None)
        else:
            weights.append(snn.weights[i] * (prev_thr / thr))
            biases.append(snn.biases[i] / thr)
            thresholds.append(1.0)
            v_init.append(snn.v_init[i] / thr)
            prev_thr = thr
    return SnnNetwork(tuple(snn.input_shape), list(snn.layers), weights, biases,
                      thresholds, v_init, seed=snn.seed)


def weight_normalize_equivalence_check(ann: AnnNetwork, probes: int = 8, steps: int = 32,
                                       seed: int = 0) -> EquivalenceReport:
    """Compare raw-threshold and folded-threshold spiking networks.

    Both are simulated on the same probe batch; the report carries the
    maximum per-step spike-train discrepancy, which is 0 when threshold
    scaling and weight rescaling are truly interchangeable.
    """
    snn_raw, _ = convert(ann, ThresholdMode("trained_clip"), optimal_half_init())
    snn_unit = rescale_to_unit_thresholds(snn_raw)
    rng = Rng(seed).derive(0x0BE5)
    batch = rng.uniform(0.0, 1.0, (probes,) + tuple(ann.input_shape))
    trace_a = simulate(snn_raw, batch, steps)
    trace_b = simulate(snn_unit, batch, steps)
    worst = 0
    total = 0
    for i in snn_raw.spiking_layers:
        diff = trace_a.spikes[i] ^ trace_b.spikes[i]
        worst = max(worst, int(diff.sum()))
        total += int(trace_a.spikes[i].sum())
    return EquivalenceReport(probes, steps, total, worst)
