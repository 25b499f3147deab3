import numpy as np
import pytest

import snnconvert as sc
from snnconvert import (ErrorModel, FloorActivationParams, PiecewiseUniformSampler,
                        PointMassSampler, UniformSampler, expected_error_sweep,
                        expected_signed_error, expected_squared_error,
                        floor_activation, monte_carlo_error)
from snnconvert.errors import ConfigError


class TestFloorActivation:
    def test_interior_value(self):
        p = FloorActivationParams(1.0, 4, 0.5)
        assert floor_activation(np.array([0.6]), p)[0] == 0.5

    def test_negative_input_clamps_to_zero(self):
        p = FloorActivationParams(1.0, 4, 0.5)
        assert floor_activation(np.array([-0.3]), p)[0] == 0.0

    def test_full_rate_saturation(self):
        for v_thresh in (0.5, 1.0, 2.0):
            p = FloorActivationParams(v_thresh, 8, v_thresh / 2)
            assert floor_activation(np.array([v_thresh]), p)[0] == v_thresh

    def test_vector_start_potentials(self):
        p = FloorActivationParams(1.0, 4, np.array([0.0, 0.5]))
        out = floor_activation(np.array([0.6, 0.6]), p)
        assert np.array_equal(out, [0.5, 0.5])  # floor(2.4)=2, floor(2.9)=2

    def test_invalid_params(self):
        with pytest.raises(ConfigError):
            FloorActivationParams(0.0, 4, 0.0)
        with pytest.raises(ConfigError):
            FloorActivationParams(1.0, 4, 1.5)


class TestClosedForms:
    def test_uniform_half_start(self):
        model = ErrorModel(1.0, 4, 0.5)
        assert abs(expected_squared_error(model) - 1 / 192) < 1e-12

    def test_uniform_zero_start(self):
        model = ErrorModel(1.0, 4, 0.0)
        assert abs(expected_squared_error(model) - 1 / 48) < 1e-12
        assert abs(expected_signed_error(model) - 1 / 8) < 1e-12

    def test_signed_error_vanishes_at_half(self):
        for v_thresh, steps in [(1.0, 4), (0.5, 16), (2.0, 7)]:
            model = ErrorModel(v_thresh, steps, v_thresh / 2)
            assert expected_signed_error(model) == 0.0

    def test_signed_error_antisymmetric_about_half(self):
        hi = ErrorModel(1.0, 4, 1.0)
        lo = ErrorModel(1.0, 4, 0.0)
        assert abs(expected_signed_error(hi) + expected_signed_error(lo)) < 1e-12
        assert abs(expected_signed_error(hi) + 1 / 8) < 1e-12

    def test_doubling_horizon_quarters_squared_error(self):
        for v0 in (0.0, 0.3, 0.5):
            a = expected_squared_error(ErrorModel(1.0, 8, v0))
            b = expected_squared_error(ErrorModel(1.0, 16, v0))
            assert abs(a / b - 4.0) < 1e-9

    def test_densities_normalize_to_unit_mass(self):
        rng = sc.Rng(2)
        for steps in (1, 3, 8):
            weights = rng.uniform(0.1, 2.0, steps + 1)
            model = ErrorModel(1.3, steps, 0.4, weights)
            assert abs(model.total_mass - 1.0) < 1e-12
            assert model.densities[0] == model.densities[steps]

    def test_negative_weights_rejected(self):
        with pytest.raises(ConfigError):
            ErrorModel(1.0, 4, 0.5, [-1, 1, 1, 1, 1])


class TestMonteCarlo:
    def test_uniform_sampler_agrees_with_closed_forms(self):
        model = ErrorModel(1.0, 4, 0.25)
        sampler = UniformSampler(1.0)
        n = 200_000
        z = sampler.draw(sc.Rng(77), n)
        err = z - floor_activation(z, model.params())
        signed, squared = monte_carlo_error(model.params(), sampler, n, sc.Rng(77))
        assert signed == err.mean()  # estimator uses exactly these draws
        for moment, closed, spread in [
                (signed, expected_signed_error(model), err.std()),
                (squared, expected_squared_error(model), (err ** 2).std())]:
            assert abs(moment - closed) < 4 * spread / np.sqrt(n)

    def test_piecewise_sampler_agrees_with_closed_forms(self):
        weights = np.array([2.0, 0.5, 1.0, 0.3, 2.0])
        model = ErrorModel(1.0, 4, 0.4, weights)
        sampler = PiecewiseUniformSampler(model)
        n = 200_000
        z = sampler.draw(sc.Rng(78), n)
        assert z.min() >= 0.0 and z.max() <= 1.0
        err = z - floor_activation(z, model.params())
        signed, squared = monte_carlo_error(model.params(), sampler, n, sc.Rng(78))
        for moment, closed, spread in [
                (signed, expected_signed_error(model), err.std()),
                (squared, expected_squared_error(model), (err ** 2).std())]:
            assert abs(moment - closed) < 4 * spread / np.sqrt(n)

    def test_point_mass_on_lattice_has_zero_error(self):
        params = FloorActivationParams(1.0, 4, 0.5)
        signed, squared = monte_carlo_error(params, PointMassSampler(0.5), 100, sc.Rng(0))
        assert signed == 0.0
        assert squared == 0.0

    def test_single_draw_reproducible(self):
        params = FloorActivationParams(1.0, 4, 0.5)
        sampler = UniformSampler(1.0)
        assert monte_carlo_error(params, sampler, 1, sc.Rng(5)) == \
            monte_carlo_error(params, sampler, 1, sc.Rng(5))


class TestSweep:
    def test_uniform_grid_finds_half(self):
        grid = np.linspace(0.0, 1.0, 11)
        sweep = expected_error_sweep(1.0, 8, grid)
        assert sweep.argmin_v0 == 0.5
        assert abs(dict((r[0], r[2]) for r in sweep.rows)[0.5]) < 1e-12
        assert sweep.signed_zero_crossing == 0.5

    def test_squared_column_symmetric_about_half(self):
        grid = np.linspace(0.0, 1.0, 21)
        sweep = expected_error_sweep(1.0, 8, grid)
        squared = [r[1] for r in sweep.rows]
        for a, b in zip(squared, squared[::-1]):
            assert abs(a - b) < 1e-12

    def test_non_uniform_density_keeps_argmin_at_half(self):
        rng = sc.Rng(3)
        weights = rng.uniform(0.2, 3.0, 9)  # T=8 needs 9 cell weights
        grid = np.linspace(0.0, 1.0, 101)
        sweep = expected_error_sweep(1.0, 8, grid, weights=weights)
        assert sweep.argmin_v0 == 0.5

    def test_csv_export(self, tmp_path):
        sweep = expected_error_sweep(1.0, 4, np.linspace(0, 1, 5))
        path = tmp_path / "sweep.csv"
        sweep.write_csv(str(path))
        lines = path.read_text().splitlines()
        assert lines[0] == "v0,expected_squared,expected_signed"
        assert len(lines) == 6

    def test_grid_outside_threshold_rejected(self):
        with pytest.raises(ConfigError):
            expected_error_sweep(1.0, 4, [0.0, 1.5])
