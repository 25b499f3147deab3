"""Figure rendering (vector SVG files next to the CSV output)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "snnconvert"

import matplotlib.pyplot as plt
import numpy as np

_SAVE_KW = {"format": "svg", "metadata": {"Date": None}}


def accuracy_chart(result):
    """Accuracy versus horizon, one line per strategy, source net dotted."""
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ts = result.t_values
    for strategy in result.strategies:
        ys = [result.accuracy(strategy, t) for t in ts]
        ax.plot(ts, ys, marker="o", markersize=3.5, linewidth=1.2, label=strategy)
    ax.axhline(result.ann_accuracy, linestyle=":", color="black", linewidth=1.0,
               label="source ANN")
    if len(ts) > 1:
        ax.set_xlim(ts[0], ts[-1])
    else:
        ax.set_xlim(ts[0] - 0.5, ts[0] + 0.5)
    ax.set_ylim(0.0, 1.0)
    ax.set_xlabel("time-steps")
    ax.set_ylabel("accuracy")
    ax.legend(fontsize=8, loc="lower right")
    fig.tight_layout()
    return fig, ax


def save_accuracy_chart(result, path: str) -> None:
    fig, _ = accuracy_chart(result)
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)


def save_constant_heatmap(result, path: str) -> None:
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    img = ax.imshow(result.accuracy, aspect="auto", origin="lower", cmap="viridis",
                    vmin=0.0, vmax=1.0)
    ax.set_xticks(range(len(result.t_values)), [str(t) for t in result.t_values])
    ax.set_yticks(range(len(result.fractions)), [f"{c:g}" for c in result.fractions])
    ax.set_xlabel("time-steps")
    ax.set_ylabel("initial potential / threshold")
    fig.colorbar(img, ax=ax, label="accuracy")
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)


def save_error_sweep_chart(sweep, path: str) -> None:
    """Expected squared and signed error against the start potential."""
    v0 = [r[0] for r in sweep.rows]
    squared = [r[1] for r in sweep.rows]
    signed = [r[2] for r in sweep.rows]
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(8.0, 3.4))
    ax1.plot(v0, squared, linewidth=1.2)
    ax1.axvline(sweep.argmin_v0, linestyle=":", color="black", linewidth=1.0)
    ax1.set_xlabel("initial potential")
    ax1.set_ylabel("expected squared error")
    ax2.plot(v0, signed, linewidth=1.2)
    ax2.axhline(0.0, linestyle=":", color="black", linewidth=1.0)
    ax2.set_xlabel("initial potential")
    ax2.set_ylabel("expected signed error")
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)
