"""Operation counting and energy estimates for analog vs spiking inference.

Analog cost is counted in FLOPs per inference: every multiply-accumulate
is 2 ops, every bias add 1, and pooling contributes its window sums as
adds only (the division per output is not counted).  Spiking cost is
counted in synaptic operations (SOPs): each emitted spike charges the
fan-out synapse count of the emitting neuron, i.e. the number of
downstream weight applications its postsynaptic value reaches, summed
over all simulated steps.  Pooling and flatten are fixed wiring, so a
spike that crosses them charges the synapses of the next weighted layer
at its mapped position.

Energy uses published per-op figures for an FPGA-class analog pipeline
and a neuromorphic chip: 12.5 pJ per FLOP and 77 fJ per SOP.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .network import AnnNetwork, output_shapes
from .simulator import SimTrace, SnnNetwork

ENERGY_PER_FLOP_J = 12.5e-12
ENERGY_PER_SOP_J = 77e-15

# Reference operating point for a VGG-16-scale model at 32 steps on this
# energy model (documentation values, not something this package reproduces):
# 332.973 MFLOP vs 869.412 MSOP per image, analog/spiking energy ratio 62.
REFERENCE_VGG16_T32 = {"mflop": 332.973, "msop": 869.412, "power_ratio": 62}

SOP_CONVENTION = ("sops = per spike, fan-out synapse count of the emitting neuron, "
                  "summed over all steps")
FLOP_CONVENTION = ("flops = 2 per multiply-accumulate + 1 per bias add; "
                   "pooling counted as window adds only")


@dataclass
class OpCountReport:
    ann_flops: int
    snn_sops: float
    ann_energy_j: float
    snn_energy_j: float
    ratio: float
    flop_energy_j: float = ENERGY_PER_FLOP_J
    sop_energy_j: float = ENERGY_PER_SOP_J
    notes: tuple = (FLOP_CONVENTION, SOP_CONVENTION)

    def rows(self) -> list:
        return [
            ("ann_flops", self.ann_flops),
            ("snn_sops", self.snn_sops),
            ("ann_energy_j", self.ann_energy_j),
            ("snn_energy_j", self.snn_energy_j),
            ("ann_over_snn_energy", self.ratio),
            ("flop_energy_j", self.flop_energy_j),
            ("sop_energy_j", self.sop_energy_j),
        ]

    def write_csv(self, path: str) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            for note in self.notes:
                fh.write(f"# {note}\n")
            fh.write("metric,value\n")
            for name, value in self.rows():
                fh.write(f"{name},{value!r}\n")


def count_flops(ann: AnnNetwork) -> int:
    """Hand-countable FLOPs of one analog inference."""
    shapes = output_shapes(ann.layers, ann.input_shape)
    total = 0
    for i, spec in enumerate(ann.layers):
        if spec.kind == "linear":
            total += 2 * spec.in_features * spec.out_features + spec.out_features
        elif spec.kind == "conv2d":
            out_elems = int(np.prod(shapes[i]))
            macs_per_out = spec.in_channels * spec.kernel_size * spec.kernel_size
            total += 2 * macs_per_out * out_elems + out_elems
        elif spec.kind == "avgpool2d":
            total += (spec.window * spec.window - 1) * int(np.prod(shapes[i]))
    return total


def _conv_coverage(spec, in_hw: tuple) -> np.ndarray:
    """How many conv output positions each input pixel feeds, per (y, x)."""
    h, w = in_hw
    span_h = h + 2 * spec.padding - spec.kernel_size
    span_w = w + 2 * spec.padding - spec.kernel_size
    h_out = span_h // spec.stride + 1
    w_out = span_w // spec.stride + 1

    def axis_counts(size, out):
        counts = np.zeros(size, dtype=np.int64)
        for pos in range(size):
            padded = pos + spec.padding
            for u in range(spec.kernel_size):
                step = padded - u
                if step >= 0 and step % spec.stride == 0 and step // spec.stride < out:
                    counts[pos] += 1
        return counts

    return np.outer(axis_counts(h, h_out), axis_counts(w, w_out))


def fanout_map(net: SnnNetwork | AnnNetwork, layer: int) -> np.ndarray:
    """Downstream synapse count per neuron of a spiking layer.

    Walks through any pooling/flatten wiring to the next weighted layer.
    For a linear consumer every neuron fans out to out_features; for a
    convolutional consumer the count depends on the (pooled) spatial
    position.
    """
    shapes = output_shapes(net.layers, net.input_shape)
    shape = shapes[layer]
    pool_factor = 1
    j = layer + 1
    while j < len(net.layers):
        spec = net.layers[j]
        if spec.kind == "avgpool2d":
            pool_factor *= spec.window
        elif spec.kind == "flatten":
            pass
        elif spec.kind == "linear":
            return np.full(shape, spec.out_features, dtype=np.int64)
        else:  # conv2d
            pooled_hw = (shape[1] // pool_factor, shape[2] // pool_factor)
            coverage = _conv_coverage(spec, pooled_hw) * spec.out_channels
            expanded = np.repeat(np.repeat(coverage, pool_factor, axis=0), pool_factor, axis=1)
            return np.broadcast_to(expanded, shape).copy()
        j += 1
    return np.zeros(shape, dtype=np.int64)  # nothing downstream


def count_ops_from_spike_counts(ann: AnnNetwork, snn: SnnNetwork | AnnNetwork,
                                spike_counts: dict, inferences: int = 1) -> OpCountReport:
    """Report from per-neuron spike counts (summed over `inferences` runs)."""
    flops = count_flops(ann)
    sops = 0.0
    for layer, counts in spike_counts.items():
        sops += float(np.sum(counts * fanout_map(snn, layer)))
    sops /= inferences
    ann_energy = flops * ENERGY_PER_FLOP_J
    snn_energy = sops * ENERGY_PER_SOP_J
    ratio = ann_energy / snn_energy if snn_energy > 0 else float("inf")
    return OpCountReport(flops, sops, ann_energy, snn_energy, ratio)


def count_ops(ann: AnnNetwork, snn: SnnNetwork, trace: SimTrace) -> OpCountReport:
    """FLOP/SOP/energy report for one simulated inference (or a batch).

    The trace must come from the spiking counterpart of `ann`; a batched
    trace yields mean SOPs per inference.
    """
    shapes = output_shapes(ann.layers, ann.input_shape)
    counts = {}
    inferences = 1
    for i, s in enumerate(trace.spikes):
        if s is None:
            continue
        if ann.layers[i] != snn.layers[i]:
            raise ConfigError(f"layer {i}: analog and spiking topologies disagree")
        per_neuron = s.sum(axis=0, dtype=np.int64)
        if per_neuron.shape != shapes[i]:
            if per_neuron.shape[1:] != shapes[i]:
                raise ConfigError(f"layer {i}: trace shape {per_neuron.shape} does not "
                                  f"match network shape {shapes[i]}")
            inferences = per_neuron.shape[0]
            per_neuron = per_neuron.sum(axis=0)
        counts[i] = per_neuron
    return count_ops_from_spike_counts(ann, snn, counts, inferences=inferences)
