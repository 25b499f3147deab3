"""Single-file text persistence for analog and spiking networks.

A model file has a header (format version, kind, seed, input shape, layer
specs in order) followed by named parameter blocks.  Values are printed
as decimals with 17 significant digits, one per line, which round-trips
float64 exactly.  Blocks are `W.i`, `b.i` and `theta.i` per parametric
layer; spiking models add `Vth.i` and `vinit.i` per spiking layer.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .errors import ParseError
from .network import AnnNetwork, LayerSpec
from .simulator import SnnNetwork

FORMAT_NAME = "snnconvert-model"
FORMAT_VERSION = 1

_LAYER_FIELDS = {
    "linear": ("in_features", "out_features", "has_clip"),
    "conv2d": ("in_channels", "out_channels", "kernel_size", "stride", "padding", "has_clip"),
    "avgpool2d": ("window",),
    "flatten": (),
}


def _spec_line(spec: LayerSpec) -> str:
    parts = [spec.kind]
    for name in _LAYER_FIELDS[spec.kind]:
        value = getattr(spec, name)
        parts.append(f"{name}={int(value)}")
    return " ".join(parts)


def _parse_spec(line: str, lineno: int, path: str) -> LayerSpec:
    parts = line.split()
    kind = parts[0]
    if kind not in _LAYER_FIELDS:
        raise ParseError(f"{path}: line {lineno}: unknown layer kind {kind!r}")
    kwargs = {}
    for item in parts[1:]:
        name, _, raw = item.partition("=")
        if name not in _LAYER_FIELDS[kind]:
            raise ParseError(f"{path}: line {lineno}: unexpected field {name!r}")
        kwargs[name] = bool(int(raw)) if name == "has_clip" else int(raw)
    return LayerSpec(kind, **kwargs)


def _write_block(fh, name: str, array: np.ndarray) -> None:
    shape = ",".join(str(s) for s in np.asarray(array).shape) or "scalar"
    fh.write(f"param {name} {shape}\n")
    for value in np.asarray(array, dtype=np.float64).ravel():
        fh.write(f"{value:.17g}\n")


def save_network(net: AnnNetwork | SnnNetwork, path: str) -> None:
    kind = "snn" if isinstance(net, SnnNetwork) else "ann"
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"{FORMAT_NAME} {FORMAT_VERSION}\n")
        fh.write(f"kind {kind}\n")
        fh.write(f"seed {net.seed}\n")
        fh.write("input_shape " + ",".join(str(s) for s in net.input_shape) + "\n")
        fh.write(f"layers {len(net.layers)}\n")
        for spec in net.layers:
            fh.write("layer " + _spec_line(spec) + "\n")
        for i, spec in enumerate(net.layers):
            if not spec.parametric:
                continue
            _write_block(fh, f"W.{i}", net.weights[i])
            _write_block(fh, f"b.{i}", net.biases[i])
            if kind == "ann":
                if net.clip_bounds[i] is not None:
                    _write_block(fh, f"theta.{i}", np.float64(net.clip_bounds[i]))
            elif net.thresholds[i] is not None:
                _write_block(fh, f"Vth.{i}", np.float64(net.thresholds[i]))
                _write_block(fh, f"vinit.{i}", net.v_init[i])


class _Reader:
    def __init__(self, path: str):
        self.path = str(path)
        self.lines = Path(path).read_text(encoding="utf-8").splitlines()
        self.pos = 0

    def next(self, what: str) -> str:
        if self.pos >= len(self.lines):
            raise ParseError(f"{self.path}: truncated at line {self.pos + 1}, expected {what}")
        line = self.lines[self.pos]
        self.pos += 1
        return line

    def expect(self, prefix: str) -> str:
        line = self.next(prefix)
        if not line.startswith(prefix + " "):
            raise ParseError(f"{self.path}: line {self.pos}: expected {prefix!r}, got {line!r}")
        return line[len(prefix) + 1 :]


def _read_block(reader: _Reader):
    header = reader.expect("param")
    name, shape_txt = header.split()
    if shape_txt == "scalar":
        shape: tuple = ()
        count = 1
    else:
        shape = tuple(int(s) for s in shape_txt.split(","))
        count = int(np.prod(shape))
    values = np.empty(count, dtype=np.float64)
    for j in range(count):
        line = reader.next(f"value {j} of block {name}")
        try:
            values[j] = float(line)
        except ValueError:
            raise ParseError(f"{reader.path}: line {reader.pos}: bad number {line!r}") from None
    return name, values.reshape(shape)


def load_network(path: str) -> AnnNetwork | SnnNetwork:
    reader = _Reader(path)
    if not reader.lines:
        raise ParseError(f"{path}: empty file")
    head = reader.next("header").split()
    if len(head) != 2 or head[0] != FORMAT_NAME:
        raise ParseError(f"{path}: line 1: not a {FORMAT_NAME} file")
    if int(head[1]) != FORMAT_VERSION:
        raise ParseError(f"{path}: unsupported format version {head[1]}")
    kind = reader.expect("kind")
    seed = int(reader.expect("seed"))
    input_shape = tuple(int(s) for s in reader.expect("input_shape").split(","))
    n_layers = int(reader.expect("layers"))
    layers = [_parse_spec(reader.expect("layer"), reader.pos, reader.path)
              for _ in range(n_layers)]

    blocks = {}
    while reader.pos < len(reader.lines):
        if not reader.lines[reader.pos].strip():
            reader.pos += 1
            continue
        name, values = _read_block(reader)
        blocks[name] = values

    def grab(name, required=True):
        if name in blocks:
            return blocks.pop(name)
        if required:
            raise ParseError(f"{path}: missing parameter block {name!r}")
        return None

    weights = [grab(f"W.{i}") if spec.parametric else None for i, spec in enumerate(layers)]
    biases = [grab(f"b.{i}") if spec.parametric else None for i, spec in enumerate(layers)]
    if kind == "ann":
        bounds = [float(grab(f"theta.{i}")) if spec.has_clip else None
                  for i, spec in enumerate(layers)]
        net = AnnNetwork(input_shape, layers, weights, biases, bounds, seed=seed)
        net.validate()
        return net
    if kind == "snn":
        thresholds, v_init = [], []
        for i, spec in enumerate(layers):
            if spec.has_clip:
                thresholds.append(float(grab(f"Vth.{i}")))
                v_init.append(grab(f"vinit.{i}"))
            else:
                thresholds.append(None)
                v_init.append(None)
        net = SnnNetwork(input_shape, layers, weights, biases, thresholds, v_init, seed=seed)
        net.validate()
        return net
    raise ParseError(f"{path}: unknown model kind {kind!r}")
