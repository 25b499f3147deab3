import numpy as np
import pytest

import snnconvert as sc
from snnconvert import SimulationError, SnnNetwork, classify, simulate, step
from snnconvert.errors import ConfigError
from snnconvert.network import forward_batch, output_shapes
from snnconvert.simulator import export_trace_csv, initial_state
from snnconvert import tensor


def one_neuron(v_thresh=1.0, v0=0.5, weight=1.0, bias=0.0):
    return SnnNetwork((1,), [sc.linear(1, 1, clip=True)], [np.array([[weight]])],
                      [np.array([bias])], [v_thresh], [np.array([v0])])


def random_snn(seed, dims=(5, 8, 6, 3), v0_fraction=0.5, weight_scale=1.0):
    rng = sc.Rng(seed)
    layers = [sc.linear(dims[0], dims[1], clip=True),
              sc.linear(dims[1], dims[2], clip=True),
              sc.linear(dims[2], dims[3], clip=False)]
    ann = sc.init_network(layers, (dims[0],), rng)
    for i, spec in enumerate(layers):
        if spec.parametric:
            ann.weights[i] *= weight_scale
    snn, _ = sc.convert(ann, sc.ThresholdMode("trained_clip"),
                        sc.constant_fraction_init(v0_fraction))
    return ann, snn


class TestStep:
    def test_hand_trace_spike(self):
        net = one_neuron(v_thresh=1.0, v0=0.5)
        state = initial_state(net)
        new, spikes, x_out = step(net, state, np.array([0.6]))
        assert spikes[0][0]
        assert x_out[0][0] == 1.0
        assert abs(new.v[0][0] - 0.1) < 1e-12
        assert state.v[0][0] == 0.5  # functional: input state untouched

    def test_below_threshold_no_spike(self):
        net = one_neuron(v_thresh=1.0, v0=0.5)
        new, spikes, _ = step(net, initial_state(net), np.array([0.0]))
        assert not spikes[0][0]
        assert new.v[0][0] == 0.5

    def test_exact_threshold_does_not_fire(self):
        net = one_neuron(v_thresh=1.0, v0=0.5)
        new, spikes, _ = step(net, initial_state(net), np.array([0.5]))
        assert not spikes[0][0]  # strict inequality: a tie is not a spike
        assert new.v[0][0] == 1.0


class TestSimulate:
    def test_four_step_hand_trace(self):
        trace = simulate(one_neuron(v0=0.5), np.array([0.6]), 4)
        assert np.array_equal(trace.spikes[0].ravel(), [True, False, True, False])
        assert trace.rates[0][0] == 0.5
        assert trace.avg_potential[0][0] == 0.5

    def test_subthreshold_drive_never_fires(self):
        trace = simulate(one_neuron(v0=0.0), np.array([0.2]), 4)
        assert trace.rates[0][0] == 0.0

    def test_half_start_one_spike(self):
        trace = simulate(one_neuron(v0=0.5), np.array([0.2]), 4)
        assert trace.rates[0][0] == 0.25

    def test_rate_and_potential_identities(self):
        _, snn = random_snn(0)
        x0 = sc.Rng(1).uniform(0, 1, 5)
        trace = simulate(snn, x0, 16)
        for i in snn.spiking_layers:
            counts = trace.spikes[i].sum(axis=0)
            assert np.array_equal(trace.rates[i], counts / 16)
            assert np.all((trace.rates[i] >= 0) & (trace.rates[i] <= 1))
            assert np.array_equal(trace.avg_potential[i], trace.rates[i] * snn.thresholds[i])

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_conservation_per_layer(self, seed):
        # v(T) - v(0) must equal summed drive minus T * rate * threshold
        _, snn = random_snn(seed)
        x0 = sc.Rng(seed + 50).uniform(0, 1, 5)
        steps = 12
        state = initial_state(snn)
        drive_sums = {i: np.zeros(v.shape) for i, v in enumerate(state.v) if v is not None}
        spike_counts = {i: np.zeros(v.shape) for i, v in enumerate(state.v) if v is not None}
        for _ in range(steps):
            prev_x = x0
            new_state, spikes, x_outs = step(snn, state, x0)
            for i, spec in enumerate(snn.layers):
                if i in drive_sums:
                    drive_sums[i] += tensor.affine(prev_x[np.newaxis], snn.weights[i],
                                                   snn.biases[i])[0]
                    spike_counts[i] += spikes[i]
                prev_x = x_outs[i]
            state = new_state
        for i in drive_sums:
            lhs = state.v[i] - snn.v_init[i]
            rhs = drive_sums[i] - spike_counts[i] * snn.thresholds[i]
            assert np.max(np.abs(lhs - rhs)) < 1e-9

    @pytest.mark.parametrize("seed", [0, 1, 2, 3])
    def test_layer1_rate_equals_staircase_for_all_horizons(self, seed):
        rng = sc.Rng(seed)
        n = 16
        v_thresh = float(rng.uniform(0.5, 2.0))
        z = rng.uniform(-0.3, v_thresh * 0.95, n)
        v0 = rng.uniform(0, v_thresh, n)
        net = SnnNetwork((1,), [sc.linear(1, n, clip=True)], [z[:, None].copy()],
                         [np.zeros(n)], [v_thresh], [v0.copy()])
        for steps in range(1, 65):
            trace = simulate(net, np.array([1.0]), steps)
            expected = np.maximum(np.floor((steps * z + v0) / v_thresh), 0.0) / steps
            assert np.array_equal(trace.rates[0], expected), f"T={steps}"

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_average_potential_converges_to_activations(self, seed):
        # scaled-down weights keep drives inside the clip range
        ann, snn = random_snn(seed, weight_scale=0.6)
        x0 = sc.Rng(seed + 9).uniform(0, 1, (4, 5))
        _, acts = forward_batch(ann, x0)
        errs = {}
        for steps in (16, 256):
            trace = simulate(snn, x0, steps)
            errs[steps] = max(np.max(np.abs(trace.avg_potential[i] - acts[i]))
                              for i in snn.spiking_layers)
        assert errs[256] < errs[16]

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_no_spike_in_layer_l_before_step_l(self, seed):
        # unit thresholds, per-step drives < 1, zero biases, zero start
        rng = sc.Rng(seed)
        dims = (6, 8, 7, 5, 3)
        layers = [sc.linear(dims[i], dims[i + 1], clip=i < 3) for i in range(4)]
        ann = sc.init_network(layers, (dims[0],), rng)
        for i in range(4):
            fan_in = ann.weights[i].shape[1]
            ann.weights[i] = rng.uniform(0, 0.9 / fan_in, ann.weights[i].shape)
        snn, _ = sc.convert(ann, sc.ThresholdMode("trained_clip"), sc.zero_init())
        x0 = rng.uniform(0, 0.98, 6)
        trace = simulate(snn, x0, 10)
        for depth, layer in enumerate(snn.spiking_layers, start=1):
            early = trace.spikes[layer][: depth - 1]
            assert not early.any(), f"layer depth {depth} fired before step {depth}"

    def test_non_finite_potential_reports_layer_and_step(self):
        net = one_neuron(weight=1e308, v0=0.0)
        with pytest.raises(SimulationError, match=r"layer 0 at step 2"):
            simulate(net, np.array([1.0]), 8)

    def test_batched_matches_single(self):
        _, snn = random_snn(4)
        xs = sc.Rng(60).uniform(0, 1, (3, 5))
        batched = simulate(snn, xs, 8)
        for j in range(3):
            single = simulate(snn, xs[j], 8)
            for i in snn.spiking_layers:
                assert np.array_equal(batched.spikes[i][:, j], single.spikes[i])
            assert np.array_equal(batched.output_accumulator[j], single.output_accumulator)

    def test_invalid_horizon(self):
        with pytest.raises(ConfigError):
            simulate(one_neuron(), np.array([0.1]), 0)


class TestClassify:
    def test_constant_drive_on_one_class(self):
        net = SnnNetwork((2,), [sc.linear(2, 4, clip=False)], [np.zeros((4, 2))],
                         [np.array([0.0, 0.0, 1.0, 0.0])], [None], [None])
        pred, per_t = classify(net, np.zeros(2), 6)
        assert pred == 2
        assert np.all(per_t == 2)

    def test_all_zero_ties_break_to_class_zero(self):
        net = SnnNetwork((2,), [sc.linear(2, 4, clip=False)], [np.zeros((4, 2))],
                         [np.zeros(4)], [None], [None])
        pred, per_t = classify(net, np.zeros(2), 5)
        assert pred == 0
        assert np.all(per_t == 0)

    def test_running_prediction_matches_fresh_run(self):
        _, snn = random_snn(7, dims=(4, 6, 5, 3))
        x0 = sc.Rng(70).uniform(0, 1, 4)
        _, per_t = classify(snn, x0, 12)
        for horizon in (3, 7, 12):
            fresh_pred, _ = classify(snn, x0, horizon)
            assert per_t[horizon - 1] == fresh_pred


class TestTraceExport:
    def test_csv_layout(self, tmp_path):
        trace = simulate(one_neuron(v0=0.5), np.array([0.6]), 4, record_potentials=True)
        path = tmp_path / "trace.csv"
        export_trace_csv(trace, str(path))
        lines = path.read_text().splitlines()
        assert lines[0] == "layer,neuron,t,spike,potential"
        assert len(lines) == 1 + 4  # one spiking neuron, four steps
        layer, neuron, t, spike, potential = lines[1].split(",")
        assert (layer, neuron, t, spike) == ("0", "0", "1", "1")
        assert abs(float(potential) - 0.1) < 1e-12
