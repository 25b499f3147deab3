"""Cross-checks between the simulator and the closed-form staircase.

A single spiking neuron driven by a constant z for T steps must fire at
rate max(floor((T z + v0) / V), 0) / T, with no tolerance: the simulator
and the staircase walk the same float64 lattice.  The check below runs a
batch of random (z, v0, T, V) tuples grouped into one-layer networks and
reports the worst absolute rate difference (expected 0.0).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .network import linear
from .rng import Rng
from .simulator import SnnNetwork, simulate


@dataclass
class FloorFormCheck:
    tuples: int
    max_rate_difference: float
    mismatches: int


def floor_form_check(n_tuples: int = 10_000, seed: int = 0,
                     thresholds=(0.5, 1.0, 2.0), max_steps: int = 64) -> FloorFormCheck:
    """Compare simulated single-neuron rates against the staircase form.

    Drives are drawn from [-0.5, V] (so sub-threshold, silent and
    saturated regimes all occur) and start potentials from [0, V].
    """
    rng = Rng(seed)
    thr_choice = np.asarray(thresholds)[
        (rng.uint64(n_tuples) % np.uint64(len(thresholds))).astype(np.int64)]
    steps = (rng.uint64(n_tuples) % np.uint64(max_steps)).astype(np.int64) + 1
    z = rng.uniform(0.0, 1.0, n_tuples) * (thr_choice + 0.5) - 0.5
    v0 = rng.uniform(0.0, 1.0, n_tuples) * thr_choice

    worst = 0.0
    mismatches = 0
    for v_th in thresholds:
        for t_steps in range(1, max_steps + 1):
            sel = np.where((thr_choice == v_th) & (steps == t_steps))[0]
            if sel.size == 0:
                continue
            # one-layer net: weight column z_i, unit input, so drive_i == z_i
            net = SnnNetwork(
                input_shape=(1,),
                layers=[linear(1, sel.size, clip=True)],
                weights=[z[sel][:, np.newaxis].copy()],
                biases=[np.zeros(sel.size)],
                thresholds=[float(v_th)],
                v_init=[v0[sel].copy()],
            )
            trace = simulate(net, np.array([1.0]), t_steps)
            expected = np.maximum(np.floor((t_steps * z[sel] + v0[sel]) / v_th), 0.0) / t_steps
            diff = np.abs(trace.rates[0] - expected)
            worst = max(worst, float(diff.max()))
            mismatches += int(np.count_nonzero(diff))
    return FloorFormCheck(n_tuples, worst, mismatches)
