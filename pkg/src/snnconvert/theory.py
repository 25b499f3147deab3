"""Closed-form and Monte Carlo analysis of the rate-quantization error.

A spiking layer that sees a constant drive z for T steps, starting at
potential v0 with threshold V, delivers the average postsynaptic value

    f'(z) = max( (V / T) * floor((T z + v0) / V), 0 ),

a staircase approximation of the source activation f(z) = max(z, 0).  For
z confined to [0, V] and piecewise-uniform with densities p_t on the
staircase cells [m_t, m_{t+1}] (m_0 = 0, m_{T+1} = V, m_t = (t V - v0)/T,
and p_0 = p_T), the error moments have closed forms

    E[(z - f'(z))^2] = (sum_{j<T} p_j) * ((V - v0)^3 + v0^3) / (3 T^3)
    E[ z - f'(z)   ] = (sum_{j<T} p_j) * ((V - v0)^2 - v0^2) / (2 T^2)

so the squared error is minimized, and the signed error vanishes, at
v0 = V / 2.  The Monte Carlo estimator here is the independent check of
those expressions, and the staircase itself is the oracle the simulator
is tested against.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .rng import Rng


@dataclass(frozen=True)
class FloorActivationParams:
    """Threshold, horizon and start potential of the staircase activation.

    v0 may be a scalar or an array broadcastable against the inputs (used
    when many start potentials are evaluated at once).
    """
    v_thresh: float
    steps: int
    v0: float | np.ndarray = 0.0

    def __post_init__(self):
        if not self.v_thresh > 0:
            raise ConfigError(f"threshold must be positive, got {self.v_thresh}")
        if self.steps < 1:
            raise ConfigError(f"steps must be positive, got {self.steps}")
        v0 = np.asarray(self.v0, dtype=np.float64)
        if np.any(v0 < 0) or np.any(v0 > self.v_thresh):
            raise ConfigError("v0 must lie in [0, threshold]")


def floor_activation(z, params: FloorActivationParams) -> np.ndarray:
    """Elementwise max(V/T * floor((T z + v0) / V), 0)."""
    z = np.asarray(z, dtype=np.float64)
    V, T = params.v_thresh, params.steps
    return np.maximum((V / T) * np.floor((T * z + params.v0) / V), 0.0)


class ErrorModel:
    """Piecewise-uniform input distribution on [0, V] over staircase cells.

    Built from T+1 non-negative cell weights; the constraint p_0 = p_T is
    enforced by overwriting the last weight with the first, after which
    the densities are normalized to unit total mass.  That constraint is
    what makes the normalizer, and hence sum_{j<T} p_j, independent of v0.
    """

    def __init__(self, v_thresh: float, steps: int, v0: float, weights=None):
        if not v_thresh > 0:
            raise ConfigError(f"threshold must be positive, got {v_thresh}")
        if steps < 1:
            raise ConfigError(f"steps must be positive, got {steps}")
        if not 0.0 <= v0 <= v_thresh:
            raise ConfigError(f"v0 must lie in [0, {v_thresh}], got {v0}")
        self.v_thresh = float(v_thresh)
        self.steps = int(steps)
        self.v0 = float(v0)

        T, V = self.steps, self.v_thresh
        edges = np.empty(T + 2, dtype=np.float64)
        edges[0] = 0.0
        edges[1 : T + 1] = (np.arange(1, T + 1) * V - v0) / T
        edges[T + 1] = V
        self.edges = edges

        if weights is None:
            weights = np.ones(T + 1, dtype=np.float64)
        weights = np.asarray(weights, dtype=np.float64).copy()
        if weights.shape != (T + 1,):
            raise ConfigError(f"need {T + 1} cell weights, got shape {weights.shape}")
        if np.any(weights < 0):
            raise ConfigError("cell weights must be non-negative")
        weights[T] = weights[0]
        lengths = np.diff(edges)
        mass = float(np.sum(weights * lengths))
        if mass <= 0:
            raise ConfigError("cell weights carry no mass")
        self.densities = weights / mass
        self.cell_lengths = lengths

    @property
    def total_mass(self) -> float:
        return float(np.sum(self.densities * self.cell_lengths))

    @property
    def density_head_sum(self) -> float:
        """sum_{j=0}^{T-1} p_j, the factor shared by both error moments."""
        return float(np.sum(self.densities[: self.steps]))

    def params(self) -> FloorActivationParams:
        return FloorActivationParams(self.v_thresh, self.steps, self.v0)


def expected_squared_error(model: ErrorModel) -> float:
    """Closed-form E[(z - f'(z))^2] under the model's distribution."""
    V, T, v0 = model.v_thresh, model.steps, model.v0
    return model.density_head_sum * ((V - v0) ** 3 + v0 ** 3) / (3.0 * T ** 3)


def expected_signed_error(model: ErrorModel) -> float:
    """Closed-form E[z - f'(z)]; zero exactly at v0 = V/2."""
    V, T, v0 = model.v_thresh, model.steps, model.v0
    return model.density_head_sum * ((V - v0) ** 2 - v0 ** 2) / (2.0 * T ** 2)


class UniformSampler:
    """Uniform draws over [0, high]."""

    def __init__(self, high: float):
        self.high = float(high)

    def draw(self, rng: Rng, n: int) -> np.ndarray:
        return rng.uniform(0.0, self.high, n)


class PiecewiseUniformSampler:
    """Draws from an ErrorModel's piecewise-uniform distribution."""

    def __init__(self, model: ErrorModel):
        self.model = model
        mass = model.densities * model.cell_lengths
        self.cum = np.cumsum(mass)
        self.cum[-1] = 1.0

    def draw(self, rng: Rng, n: int) -> np.ndarray:
        cell = np.searchsorted(self.cum, rng.random(n), side="right")
        cell = np.minimum(cell, len(self.cum) - 1)
        lo = self.model.edges[cell]
        return lo + self.model.cell_lengths[cell] * rng.random(n)


class PointMassSampler:
    """Degenerate distribution at a single point."""

    def __init__(self, value: float):
        self.value = float(value)

    def draw(self, rng: Rng, n: int) -> np.ndarray:
        rng.random(n)  # consume the stream like the other samplers
        return np.full(n, self.value, dtype=np.float64)


def monte_carlo_error(params: FloorActivationParams, sampler, n: int, rng: Rng):
    """Sample means of z - f'(z) and its square under `sampler`."""
    if n < 1:
        raise ConfigError(f"sample count must be positive, got {n}")
    z = sampler.draw(rng, n)
    err = z - floor_activation(z, params)
    return float(err.mean()), float(np.mean(err * err))


@dataclass
class ErrorSweepResult:
    """Both error moments across a grid of start potentials."""
    v_thresh: float
    steps: int
    rows: list  # (v0, expected_squared, expected_signed)
    argmin_v0: float
    signed_zero_crossing: float

    def write_csv(self, path: str) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("v0,expected_squared,expected_signed\n")
            for v0, sq, sg in self.rows:
                fh.write(f"{v0!r},{sq!r},{sg!r}\n")


def expected_error_sweep(v_thresh: float, steps: int, v0_grid, weights=None) -> ErrorSweepResult:
    """Evaluate both closed-form moments over a grid of start potentials.

    Reports the grid argmin of the squared error and the zero crossing of
    the signed error (linear interpolation between the bracketing grid
    points; exact grid zeros are returned as-is).
    """
    v0_grid = np.asarray(v0_grid, dtype=np.float64)
    if np.any(v0_grid < 0) or np.any(v0_grid > v_thresh):
        raise ConfigError("v0 grid must lie within [0, threshold]")
    rows = []
    for v0 in v0_grid:
        model = ErrorModel(v_thresh, steps, float(v0), weights)
        rows.append((float(v0), expected_squared_error(model), expected_signed_error(model)))
    squared = np.array([r[1] for r in rows])
    signed = np.array([r[2] for r in rows])
    argmin_v0 = float(v0_grid[int(np.argmin(squared))])

    crossing = float("nan")
    exact = np.where(signed == 0.0)[0]
    if exact.size:
        crossing = float(v0_grid[exact[0]])
    else:
        flips = np.where(np.sign(signed[:-1]) * np.sign(signed[1:]) < 0)[0]
        if flips.size:
            k = int(flips[0])
            x0, x1 = v0_grid[k], v0_grid[k + 1]
            y0, y1 = signed[k], signed[k + 1]
            crossing = float(x0 - y0 * (x1 - x0) / (y1 - y0))
    return ErrorSweepResult(float(v_thresh), int(steps), rows, argmin_v0, crossing)
