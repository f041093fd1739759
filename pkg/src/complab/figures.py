"""PNG rendering for report directories.

Every writer takes already-computed values and a target path, renders with
the Agg backend, and returns the path as a string.  Nothing here computes
results; figures are a presentation of what the report already contains.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def save_loss_curve(epochs: list[int], losses: list[float], val_accs: list[float],
                    path, title: str = "training") -> str:
    fig, ax = plt.subplots(figsize=(6.5, 4))
    ax.plot(epochs, losses, color="tab:blue", label="train loss")
    ax.set_xlabel("epoch")
    ax.set_ylabel("train loss", color="tab:blue")
    ax.tick_params(axis="y", labelcolor="tab:blue")
    twin = ax.twinx()
    twin.plot(epochs, val_accs, color="tab:orange", label="val acc")
    twin.set_ylabel("validation accuracy", color="tab:orange")
    twin.tick_params(axis="y", labelcolor="tab:orange")
    twin.set_ylim(0.0, 1.0)
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return str(path)


def save_matrix_heatmaps(blocks: list[tuple[str, np.ndarray]], path) -> str:
    """One annotated heatmap per (title, matrix) block, side by side."""
    n = len(blocks)
    size = max(len(np.asarray(m)) for _, m in blocks)
    fig, axes = plt.subplots(1, n, figsize=(0.55 * size * n + 2.2, 0.55 * size + 1.6),
                             squeeze=False)
    for ax, (title, matrix) in zip(axes[0], blocks):
        matrix = np.asarray(matrix, dtype=float)
        c = matrix.shape[0]
        image = ax.imshow(matrix, cmap="viridis", vmin=0.0, vmax=1.0)
        ax.set_title(title)
        ax.set_xlabel("complementary label")
        ax.set_ylabel("true class")
        ax.set_xticks(range(c), [str(j + 1) for j in range(c)])
        ax.set_yticks(range(c), [str(i + 1) for i in range(c)])
        if c <= 10:
            for i in range(c):
                for j in range(c):
                    shade = "black" if matrix[i, j] > 0.55 else "white"
                    ax.text(j, i, f"{matrix[i, j]:.2f}", ha="center", va="center",
                            color=shade, fontsize=7)
        fig.colorbar(image, ax=ax, fraction=0.046)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return str(path)


def save_learning_curve(sizes: list[int], medians: dict[str, list[float]],
                        per_seed: dict[str, list[list[float]]], path) -> str:
    """Median accuracy per training-set size, one line per regime.

    per_seed maps each label to one accuracy list per seed; individual runs
    are drawn faint behind the median line.
    """
    fig, ax = plt.subplots(figsize=(6.5, 4))
    colors = ("tab:blue", "tab:orange", "tab:green", "tab:red")
    for color, (label, med) in zip(colors, medians.items()):
        for run in per_seed.get(label, []):
            ax.plot(sizes, run, color=color, alpha=0.25, linewidth=1)
        ax.plot(sizes, med, color=color, marker="o", label=f"{label} (median)")
    ax.set_xlabel("training examples")
    ax.set_ylabel("test accuracy")
    ax.set_ylim(0.0, 1.0)
    ax.legend()
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return str(path)
