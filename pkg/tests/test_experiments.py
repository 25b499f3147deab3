import numpy as np
import pytest

import snnconvert as sc
from snnconvert.errors import ConfigError
from snnconvert.experiments import (ExperimentConfig, constant_sweep, report,
                                    report_constant, run_sweep, shape_dataset)
from snnconvert.plots import accuracy_chart
from snnconvert.training import TrainConfig


@pytest.fixture(scope="module")
def tiny_data():
    train = sc.make_blob_images(300, seed=61, flat=True)
    test = sc.make_blob_images(120, seed=62, flat=True)
    return train, test


@pytest.fixture(scope="module")
def tiny_net(tiny_data):
    train, _ = tiny_data
    net = sc.init_network(sc.desk_mlp(784, 10), (784,), sc.Rng(2))
    return sc.train(net, train, TrainConfig(epochs=3, seed=2))


def tiny_config(**kw):
    defaults = dict(arch="mlp", t_values=[2, 4], inits=[sc.zero_init(), sc.optimal_half_init()],
                    train=TrainConfig(epochs=3, seed=2))
    defaults.update(kw)
    return ExperimentConfig(**defaults)


class TestRunSweep:
    def test_single_cell_gives_one_row(self, tiny_data, tiny_net):
        train, test = tiny_data
        cfg = tiny_config(t_values=[4], inits=[sc.optimal_half_init()])
        result = run_sweep(cfg, train, test, ann=tiny_net)
        assert len(result.rows) == 1
        assert result.rows[0][0] == "half"
        assert result.rows[0][1] == 4

    def test_row_grid_and_accuracy_range(self, tiny_data, tiny_net):
        train, test = tiny_data
        result = run_sweep(tiny_config(), train, test, ann=tiny_net)
        assert len(result.rows) == 4  # 2 strategies x 2 horizons
        assert all(0.0 <= acc <= 1.0 for _, _, acc in result.rows)
        assert set(s for s, _, _ in result.rows) == {"zero", "half"}

    def test_latency_and_energy_collected(self, tiny_data, tiny_net):
        train, test = tiny_data
        result = run_sweep(tiny_config(), train, test, ann=tiny_net)
        assert set(result.spiking_layers) == {0, 1}
        for strategy in ("zero", "half"):
            assert (strategy, 0) in result.latency
            assert result.energy[strategy].ann_flops > 0

    def test_horizon_validation(self):
        with pytest.raises(ConfigError):
            tiny_config(t_values=[4, 2]).validate()
        with pytest.raises(ConfigError):
            tiny_config(t_values=[0, 2]).validate()
        with pytest.raises(ConfigError):
            tiny_config(inits=[]).validate()


class TestReport:
    def test_files_and_headers(self, tiny_data, tiny_net, tmp_path):
        train, test = tiny_data
        result = run_sweep(tiny_config(), train, test, ann=tiny_net)
        paths = report(result, str(tmp_path / "out"))
        names = [p.split("/")[-1] for p in paths]
        assert names == ["sweep.csv", "latency.csv", "energy.csv", "accuracy_vs_T.svg"]
        sweep_lines = (tmp_path / "out" / "sweep.csv").read_text().splitlines()
        assert sweep_lines[0] == "strategy,T,accuracy"
        assert len(sweep_lines) == 1 + 4
        latency_lines = (tmp_path / "out" / "latency.csv").read_text().splitlines()
        assert latency_lines[0] == "layer,strategy,mean_first_spike_step"

    def test_rerun_is_byte_identical(self, tiny_data, tiny_net, tmp_path):
        train, test = tiny_data
        blobs = {}
        for tag in ("a", "b"):
            result = run_sweep(tiny_config(), train, test, ann=tiny_net)
            out = tmp_path / tag
            report(result, str(out))
            blobs[tag] = {f: (out / f).read_bytes()
                          for f in ("sweep.csv", "latency.csv", "energy.csv")}
        assert blobs["a"] == blobs["b"]

    def test_chart_axes_span_swept_range(self, tiny_data, tiny_net):
        train, test = tiny_data
        result = run_sweep(tiny_config(t_values=[2, 4, 8]), train, test, ann=tiny_net)
        fig, ax = accuracy_chart(result)
        assert ax.get_xlim() == (2.0, 8.0)
        assert ax.get_ylim() == (0.0, 1.0)

    def test_empty_sweep_rejected(self, tmp_path):
        from snnconvert.experiments import SweepResult
        empty = SweepResult([], 0.0, {}, {}, [], [], [])
        with pytest.raises(ConfigError):
            report(empty, str(tmp_path))


class TestConstantSweep:
    def test_fraction_columns_match_named_strategies(self, tiny_data, tiny_net, tmp_path):
        train, test = tiny_data
        cfg = tiny_config()
        const = constant_sweep(cfg, train, test, fractions=[0.0, 0.5, 1.0], ann=tiny_net)
        named = run_sweep(cfg, train, test, ann=tiny_net)
        for j, t in enumerate(cfg.t_values):
            assert const.column(0.5)[j] == named.accuracy("half", t)
            assert const.column(0.0)[j] == named.accuracy("zero", t)
        paths = report_constant(const, str(tmp_path))
        heat = (tmp_path / "constant_heat.csv").read_text().splitlines()
        assert heat[0] == "fraction,T=2,T=4"
        assert len(heat) == 1 + 3

    def test_best_fraction_is_plateau_midpoint(self):
        from snnconvert.experiments import ConstantSweepResult
        acc = np.array([[0.2], [0.9], [0.9], [0.9], [0.3]])
        fractions = [0.0, 0.25, 0.5, 0.75, 1.0]
        winners = np.where(acc[:, 0] == acc[:, 0].max())[0]
        assert float(np.mean([fractions[k] for k in winners])) == 0.5


def test_shape_dataset_for_each_arch():
    flat = sc.make_blob_images(4, seed=1, flat=True)
    assert shape_dataset(flat, "cnn").inputs.shape == (4, 1, 28, 28)
    assert shape_dataset(flat, "mlp").inputs.shape == (4, 784)
    img = sc.make_blob_images(4, seed=1)
    assert shape_dataset(img, "mlp").inputs.shape == (4, 784)
