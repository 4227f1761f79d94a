"""Figure rendering for the CLI report paths.

Every exporting subcommand writes its delimited output first; these helpers
render the companion PNG next to it. Rendering is headless (Agg).
"""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def save_kernel_figure(path, columns: dict[str, np.ndarray], title: str) -> None:
    """Per-node kernel values, one stem series per column."""
    fig, ax = plt.subplots(figsize=(6.4, 3.6))
    n = len(next(iter(columns.values())))
    nodes = np.arange(n)
    width = 0.8 / len(columns)
    for i, (label, values) in enumerate(columns.items()):
        ax.bar(nodes + (i - (len(columns) - 1) / 2) * width, values,
               width=width, label=label)
    ax.axhline(0.0, color="black", linewidth=0.6)
    ax.set_xlabel("node")
    ax.set_ylabel("kernel value")
    ax.set_title(title)
    ax.set_xticks(nodes)
    if len(columns) > 1:
        ax.legend(frameon=False)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_filters_figure(path, node: int, b_av_row: np.ndarray,
                        b_dx_row: np.ndarray) -> None:
    """Directional smoothing and derivative weights seen from one node."""
    fig, axes = plt.subplots(1, 2, figsize=(8.0, 3.2), sharex=True)
    nodes = np.arange(len(b_av_row))
    for ax, row, label in ((axes[0], b_av_row, "directional smoothing"),
                           (axes[1], b_dx_row, "directional derivative")):
        ax.bar(nodes, row, color="tab:green" if label.endswith("smoothing")
               else "tab:red")
        ax.axhline(0.0, color="black", linewidth=0.6)
        ax.set_xlabel("source node")
        ax.set_title(f"{label} at node {node}")
        ax.set_xticks(nodes)
    axes[0].set_ylabel("weight")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_training_figure(path, metrics) -> None:
    """Loss/MAE curves plus the learned per-channel diffusion times."""
    epochs = [e["epoch"] for e in metrics.entries]
    fig, axes = plt.subplots(1, 2, figsize=(9.6, 3.6))

    axes[0].plot(epochs, [e["train_loss"] for e in metrics.entries],
                 label="train loss")
    axes[0].plot(epochs, [e["val_mae"] for e in metrics.entries],
                 label="val MAE")
    axes[0].plot(epochs, [e["test_mae"] for e in metrics.entries],
                 label="test MAE")
    axes[0].set_xlabel("epoch")
    axes[0].set_ylabel("MAE")
    axes[0].set_yscale("log")
    axes[0].legend(frameon=False)
    axes[0].set_title("learning curves")

    times = np.array([np.concatenate(e["times"]) for e in metrics.entries])
    for c in range(times.shape[1]):
        axes[1].plot(epochs, times[:, c], linewidth=0.8)
    axes[1].set_xlabel("epoch")
    axes[1].set_ylabel("diffusion time t")
    axes[1].set_yscale("log")
    axes[1].set_title("learned per-channel times")

    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
