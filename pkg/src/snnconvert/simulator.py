"""Time-stepped simulation of integrate-and-fire networks with soft reset.

Dynamics per spiking layer and step t (thresholds are per layer, drives
come from the same weights the source network uses):

    v_temp = v(t-1) + W x_in(t) + b
    spike  = v_temp > v_thresh          (strict; a tie does not fire)
    x_out  = spike * v_thresh
    v(t)   = v_temp - x_out             (reset by subtraction)

A step is synchronous and layer-ordered: layer l consumes layer l-1's
output from the same step index.  Pooling and flatten layers apply their
usual linear map to whatever passes through.  The final bare linear layer
never fires; it accumulates its analog drive, and accumulator/t is the
logit estimate at horizon t.  Network input is applied as a constant
analog drive into the first layer at every step.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import tensor
from .errors import ConfigError, ShapeError, SimulationError
from .network import LayerSpec, output_shapes


@dataclass
class SnnNetwork:
    """Converted network: source topology plus thresholds and start potentials.

    thresholds[l] is a positive scalar for spiking layers and None
    elsewhere; v_init[l] stores one start potential per neuron (constant
    strategies simply broadcast the same value).
    """
    input_shape: tuple
    layers: list[LayerSpec]
    weights: list
    biases: list
    thresholds: list
    v_init: list
    seed: int = 0

    @property
    def spiking_layers(self) -> list[int]:
        return [i for i, t in enumerate(self.thresholds) if t is not None]

    @property
    def output_layer(self) -> int:
        return len(self.layers) - 1

    def validate(self) -> None:
        shapes = output_shapes(self.layers, self.input_shape)
        for i in self.spiking_layers:
            if not self.thresholds[i] > 0:
                raise ConfigError(f"layer {i}: threshold must be positive")
            if self.v_init[i].shape != shapes[i]:
                raise ShapeError(f"layer {i}: v_init shape {self.v_init[i].shape} "
                                 f"vs neuron shape {shapes[i]}")


@dataclass
class NeuronState:
    """Membrane potentials per layer (None for non-spiking layers)."""
    v: list

    def copy(self) -> "NeuronState":
        return NeuronState([None if vi is None else vi.copy() for vi in self.v])


@dataclass
class SimTrace:
    """Recorded run: spike trains, rates, average postsynaptic potentials.

    spikes[l] is a [T, ...neuron shape] boolean array for spiking layers
    (None elsewhere); rates[l] = spike count / T; avg_potential[l] =
    rates[l] * threshold[l].  output_accumulator is the summed analog
    drive of the final layer; potentials[l] ([T, ...]) is only kept when
    requested.
    """
    steps: int
    spikes: list
    rates: list
    avg_potential: list
    output_accumulator: np.ndarray
    potentials: list | None = None

    def first_spike_steps(self, layer: int) -> np.ndarray:
        """Per-neuron step of first spike, steps+1 where a neuron stayed silent."""
        s = self.spikes[layer]
        fired = s.any(axis=0)
        first = np.where(fired, s.argmax(axis=0) + 1, self.steps + 1)
        return first.astype(np.int64)


def initial_state(net: SnnNetwork, batch: int | None = None) -> NeuronState:
    """Fresh state holding each spiking layer's start potentials."""
    v = []
    for i, spec in enumerate(net.layers):
        if net.thresholds[i] is None:
            v.append(None)
        elif batch is None:
            v.append(net.v_init[i].copy())
        else:
            v.append(np.broadcast_to(net.v_init[i], (batch,) + net.v_init[i].shape).copy())
    return NeuronState(v)


def _layer_drive(net: SnnNetwork, i: int, x: np.ndarray) -> np.ndarray:
    spec = net.layers[i]
    if spec.kind == "linear":
        return tensor.affine(x, net.weights[i], net.biases[i])
    return tensor.conv2d_batch(x, net.weights[i], net.biases[i], spec.stride, spec.padding)


def _advance(net: SnnNetwork, v: list, x: np.ndarray, acc: np.ndarray | None,
             t: int, drive_first: np.ndarray | None = None):
    """One synchronous step over all layers, updating v (and acc) in place.

    Returns (spikes, x_outs), lists aligned with layers.  drive_first, if
    given, is the precomputed constant drive of the first layer.
    """
    spikes: list = [None] * len(net.layers)
    x_outs: list = [None] * len(net.layers)
    for i, spec in enumerate(net.layers):
        if spec.kind == "avgpool2d":
            x = tensor.avgpool2d_batch(x, spec.window)
        elif spec.kind == "flatten":
            x = tensor.flatten_batch(x)
        elif net.thresholds[i] is not None:
            drive = drive_first if (i == 0 and drive_first is not None) else _layer_drive(net, i, x)
            with np.errstate(over="ignore", invalid="ignore"):
                v[i] += drive
            if not np.all(np.isfinite(v[i])):
                raise SimulationError(f"non-finite potential in layer {i} at step {t}")
            fired = v[i] > net.thresholds[i]
            x = fired * net.thresholds[i]
            v[i] -= x
            spikes[i] = fired
            x_outs[i] = x
        else:
            # bare output layer: analog accumulation, no firing
            drive = _layer_drive(net, i, x)
            if acc is not None:
                acc += drive
            x = drive
            x_outs[i] = x
    return spikes, x_outs


def step(net: SnnNetwork, state: NeuronState, x_in: np.ndarray):
    """Advance one step from a single-sample input; purely functional.

    Returns (new_state, spikes, x_outs) where spikes[l] and x_outs[l] are
    the layer's firing pattern and emitted postsynaptic values.  Interior
    layer inputs are produced in the same step, so callers supply only the
    network input.
    """
    x_in = np.asarray(x_in, dtype=np.float64)
    if x_in.shape != tuple(net.input_shape):
        raise ShapeError(f"input shape {x_in.shape} does not match network input {net.input_shape}")
    new = state.copy()
    v_batched = [None if vi is None else vi[np.newaxis] for vi in new.v]
    spikes, x_outs = _advance(net, v_batched, x_in[np.newaxis], None, t=1)
    new.v = [None if vb is None else vb[0] for vb in v_batched]
    return (new,
            [None if s is None else s[0] for s in spikes],
            [None if x is None else x[0] for x in x_outs])


def simulate(net: SnnNetwork, x0: np.ndarray, steps: int,
             record_potentials: bool = False) -> SimTrace:
    """Run `steps` steps under constant input x0 and record a full trace.

    x0 is one sample shaped like the network input, or a batch with a
    leading axis; batched traces carry the batch axis after the time axis.
    """
    if steps < 1:
        raise ConfigError(f"steps must be positive, got {steps}")
    x0 = np.asarray(x0, dtype=np.float64)
    single = x0.shape == tuple(net.input_shape)
    batch = x0[np.newaxis] if single else x0
    if batch.shape[1:] != tuple(net.input_shape):
        raise ShapeError(f"input shape {x0.shape} does not match network input {net.input_shape}")
    n = batch.shape[0]

    v = initial_state(net, batch=n).v
    shapes = output_shapes(net.layers, net.input_shape)
    acc = np.zeros((n,) + shapes[-1], dtype=np.float64)
    spike_hist = [np.zeros((steps, n) + shapes[i], dtype=bool) if net.thresholds[i] is not None
                  else None for i in range(len(net.layers))]
    pot_hist = None
    if record_potentials:
        pot_hist = [np.zeros((steps, n) + shapes[i], dtype=np.float64)
                    if net.thresholds[i] is not None else None for i in range(len(net.layers))]
    drive_first = _layer_drive(net, 0, batch) if net.thresholds[0] is not None else None

    for t in range(1, steps + 1):
        spikes, _ = _advance(net, v, batch, acc, t, drive_first=drive_first)
        for i in net.spiking_layers:
            spike_hist[i][t - 1] = spikes[i]
            if pot_hist is not None:
                pot_hist[i][t - 1] = v[i]

    rates, avg_pot = [], []
    for i in range(len(net.layers)):
        if spike_hist[i] is None:
            rates.append(None)
            avg_pot.append(None)
        else:
            r = spike_hist[i].sum(axis=0, dtype=np.int64) / steps
            rates.append(r)
            avg_pot.append(r * net.thresholds[i])

    if single:
        spike_hist = [None if s is None else s[:, 0] for s in spike_hist]
        rates = [None if r is None else r[0] for r in rates]
        avg_pot = [None if a is None else a[0] for a in avg_pot]
        acc = acc[0]
        if pot_hist is not None:
            pot_hist = [None if p is None else p[:, 0] for p in pot_hist]
    return SimTrace(steps, spike_hist, rates, avg_pot, acc, potentials=pot_hist)


def classify(net: SnnNetwork, x0: np.ndarray, steps: int):
    """Prediction at horizon `steps` plus the running prediction per step.

    The prediction after t steps is the argmax of the output accumulator
    (ties to the lowest class), so one run yields the whole
    accuracy-versus-horizon curve.
    """
    x0 = np.asarray(x0, dtype=np.float64)
    if x0.shape != tuple(net.input_shape):
        raise ShapeError(f"classify expects one sample shaped {net.input_shape}, got {x0.shape}")
    result = run_batch_dynamics(net, x0[np.newaxis], steps,
                                record_ts=list(range(1, steps + 1)))
    per_t = np.array([result["predictions"][t][0] for t in range(1, steps + 1)], dtype=np.int64)
    return int(per_t[-1]), per_t


def run_batch_dynamics(net: SnnNetwork, batch: np.ndarray, steps: int,
                       record_ts: list[int] | None = None,
                       want_first_spike: bool = False,
                       want_spike_counts: bool = False) -> dict:
    """Memory-light batched run used by sweeps.

    Returns a dict with "predictions" {t: [n] argmax} for each recorded t,
    and optionally per-layer first-spike sums and per-neuron spike counts
    (summed over the batch).
    """
    batch = np.asarray(batch, dtype=np.float64)
    if batch.shape[1:] != tuple(net.input_shape):
        raise ShapeError(f"batch shape {batch.shape[1:]} does not match network input "
                         f"{net.input_shape}")
    n = batch.shape[0]
    record = set(record_ts or [steps])
    shapes = output_shapes(net.layers, net.input_shape)
    v = initial_state(net, batch=n).v
    acc = np.zeros((n,) + shapes[-1], dtype=np.float64)
    first = {i: np.zeros((n,) + shapes[i], dtype=np.int64) for i in net.spiking_layers} \
        if want_first_spike else None
    counts = {i: np.zeros(shapes[i], dtype=np.int64) for i in net.spiking_layers} \
        if want_spike_counts else None
    drive_first = _layer_drive(net, 0, batch) if net.thresholds[0] is not None else None

    predictions = {}
    for t in range(1, steps + 1):
        spikes, _ = _advance(net, v, batch, acc, t, drive_first=drive_first)
        if first is not None:
            for i in net.spiking_layers:
                newly = spikes[i] & (first[i] == 0)
                first[i][newly] = t
        if counts is not None:
            for i in net.spiking_layers:
                counts[i] += spikes[i].sum(axis=0)
        if t in record:
            predictions[t] = np.argmax(acc, axis=1)

    out = {"predictions": predictions, "n": n}
    if first is not None:
        for i in net.spiking_layers:
            first[i][first[i] == 0] = steps + 1  # silent neurons censored past the horizon
        out["first_spike"] = first
    if counts is not None:
        out["spike_counts"] = counts
    return out


def export_trace_csv(trace: SimTrace, path: str) -> None:
    """Write a single-sample trace as (layer, neuron, t, spike, potential) rows.

    Potentials are filled only if the trace recorded them (blank otherwise).
    """
    if trace.spikes and any(s is not None and s.ndim > 0 and s.shape[0] != trace.steps
                            for s in trace.spikes):
        raise ConfigError("trace export expects a single-sample trace")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("layer,neuron,t,spike,potential\n")
        for layer, s in enumerate(trace.spikes):
            if s is None:
                continue
            flat_s = s.reshape(trace.steps, -1)
            flat_v = None
            if trace.potentials is not None and trace.potentials[layer] is not None:
                flat_v = trace.potentials[layer].reshape(trace.steps, -1)
            for t in range(trace.steps):
                for neuron in range(flat_s.shape[1]):
                    pot = "" if flat_v is None else repr(float(flat_v[t, neuron]))
                    fh.write(f"{layer},{neuron},{t + 1},{int(flat_s[t, neuron])},{pot}\n")
