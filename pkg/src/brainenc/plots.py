"""Flat static plots for pipeline artifacts (no surface rendering)."""

from __future__ import annotations

import numpy as np


def _axes(figsize):
    import matplotlib
    matplotlib.use("Agg", force=False)
    import matplotlib.pyplot as plt
    return plt, plt.subplots(figsize=figsize)


def save_heatmap(matrix: np.ndarray, row_labels, col_labels, path, title: str = "",
                 xlabel: str = "", ylabel: str = "") -> None:
    plt, (fig, ax) = _axes((0.6 * len(col_labels) + 2.5, 0.5 * len(row_labels) + 2))
    im = ax.imshow(np.asarray(matrix, dtype=float), aspect="auto", cmap="viridis")
    ax.set_xticks(range(len(col_labels)), [str(c) for c in col_labels], rotation=45, ha="right")
    ax.set_yticks(range(len(row_labels)), [str(r) for r in row_labels])
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    fig.colorbar(im, ax=ax)
    fig.tight_layout()
    fig.savefig(path, metadata={"Software": None})
    plt.close(fig)


def save_curves(x, series: dict[str, np.ndarray], path, title: str = "",
                xlabel: str = "", ylabel: str = "") -> None:
    plt, (fig, ax) = _axes((6, 4))
    for label, y in series.items():
        ax.plot(x, y, marker="o", label=label)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, metadata={"Software": None})
    plt.close(fig)
