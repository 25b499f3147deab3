"""Counter-based pseudo-random stream (splitmix64).

Draw i of a stream with seed s is a pure function of (s, i), so sequences
are identical across runs, platforms and numpy versions, and a stream can
be consumed in any call granularity without changing the values produced.
Throughput is fine for this package's needs (weight init, data synthesis,
Monte Carlo sampling) because whole batches of draws are produced with
vectorised uint64 arithmetic.
"""

from __future__ import annotations

import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_INV53 = 1.0 / float(1 << 53)


class Rng:
    """Deterministic random stream identified by (algorithm, seed)."""

    algorithm = "splitmix64"

    def __init__(self, seed: int):
        self.seed = np.uint64(seed & 0xFFFFFFFFFFFFFFFF)
        self.position = 0

    def _raw(self, n: int) -> np.ndarray:
        idx = np.arange(self.position, self.position + n, dtype=np.uint64)
        self.position += n
        z = self.seed + (idx + np.uint64(1)) * _GOLDEN
        z = (z ^ (z >> _S30)) * _MIX1
        z = (z ^ (z >> _S27)) * _MIX2
        return z ^ (z >> _S31)

    def uint64(self, n: int) -> np.ndarray:
        return self._raw(n)

    def random(self, shape=None) -> np.ndarray | float:
        """Uniform float64 draws in [0, 1)."""
        if shape is None:
            return float(self._raw(1)[0] >> _S11) * _INV53
        shape = (shape,) if isinstance(shape, int) else tuple(shape)
        n = int(np.prod(shape)) if shape else 1
        u = (self._raw(n) >> _S11).astype(np.float64) * _INV53
        return u.reshape(shape)

    def uniform(self, low: float, high: float, shape=None):
        return low + (high - low) * self.random(shape)

    def normal(self, shape=None) -> np.ndarray | float:
        """Standard normal draws via Box-Muller (two uniforms per value)."""
        scalar = shape is None
        shape = (1,) if scalar else ((shape,) if isinstance(shape, int) else tuple(shape))
        n = int(np.prod(shape)) if shape else 1
        raw = self._raw(2 * n)
        # u1 in (0, 1] so the log is finite
        u1 = ((raw[:n] >> _S11).astype(np.float64) + 1.0) * _INV53
        u2 = (raw[n:] >> _S11).astype(np.float64) * _INV53
        out = np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)
        return float(out[0]) if scalar else out.reshape(shape)

    def truncated_normal(self, mu: float, sigma: float, low: float, high: float, shape) -> np.ndarray:
        """Normal(mu, sigma) conditioned on [low, high], by rejection."""
        shape = (shape,) if isinstance(shape, int) else tuple(shape)
        out = np.empty(shape, dtype=np.float64).reshape(-1)
        pending = np.arange(out.size)
        for _ in range(10_000):
            if pending.size == 0:
                return out.reshape(shape)
            draws = mu + sigma * self.normal(pending.size)
            ok = (draws >= low) & (draws <= high)
            out[pending[ok]] = draws[ok]
            pending = pending[~ok]
        raise RuntimeError(
            f"truncated_normal: acceptance region [{low}, {high}] too improbable "
            f"for mu={mu}, sigma={sigma}"
        )

    def permutation(self, n: int) -> np.ndarray:
        """Deterministic permutation of range(n) (argsort of fresh keys)."""
        return np.argsort(self.random(n), kind="stable")

    def derive(self, tag: int) -> "Rng":
        """Independent child stream; used to give components their own seeds."""
        mask = 0xFFFFFFFFFFFFFFFF
        z = (int(self.seed) + (tag & mask) * int(_GOLDEN)) & mask
        z = ((z ^ (z >> 30)) * int(_MIX1)) & mask
        z = ((z ^ (z >> 27)) * int(_MIX2)) & mask
        return Rng(z ^ (z >> 31))
