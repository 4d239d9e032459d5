"""Report figures.  Rendered with the Agg backend and no timestamp metadata so
that reruns produce identical files."""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from ..conversation import LABELS  # noqa: E402

_PNG_METADATA = {"Software": None}

plt.rcParams.update({
    "font.size": 9,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "figure.dpi": 100,
    "savefig.dpi": 150,
})


def _save(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, format="png", metadata=_PNG_METADATA, bbox_inches="tight")
    plt.close(fig)
    return path


def plot_per_depth(series: dict, path, title: str = "") -> Path:
    """``series`` maps a run name to its per-depth table {bucket: (micro, macro, n)}.

    Micro and macro F1 are drawn on two panels sharing the depth axis.
    """
    buckets = []
    for table in series.values():
        for k in table:
            if k not in buckets:
                buckets.append(k)
    buckets.sort(key=lambda k: k if isinstance(k, int) else 10 ** 6)
    x = np.arange(len(buckets))
    fig, axes = plt.subplots(1, 2, figsize=(7.0, 2.8), sharey=True)
    for name, table in series.items():
        for ax, col in zip(axes, (0, 1)):
            y = [table[b][col] if b in table else np.nan for b in buckets]
            ax.plot(x, y, marker="o", markersize=3, linewidth=1.2, label=name)
    for ax, name in zip(axes, ("micro-F1", "macro-F1")):
        ax.set_xticks(x)
        ax.set_xticklabels([str(b) for b in buckets])
        ax.set_xlabel("depth")
        ax.set_title(name)
        ax.set_ylim(0, 1)
        ax.grid(axis="y", linewidth=0.4, alpha=0.5)
    axes[0].set_ylabel("F1")
    if len(series) > 1:
        axes[1].legend(frameon=False, fontsize=7)
    if title:
        fig.suptitle(title)
    return _save(fig, path)


def plot_confusion(counts, path, title: str = "") -> Path:
    counts = np.asarray(counts)
    rows = counts.sum(axis=1, keepdims=True)
    pct = np.divide(100.0 * counts, rows, out=np.zeros(counts.shape), where=rows > 0)
    fig, ax = plt.subplots(figsize=(3.4, 3.0))
    ax.imshow(pct, cmap="Greys", vmin=0, vmax=100)
    for i in range(counts.shape[0]):
        for j in range(counts.shape[1]):
            ax.text(j, i, f"{pct[i, j]:.1f}%\n({counts[i, j]})", ha="center", va="center",
                    fontsize=6.5, color="white" if pct[i, j] > 55 else "black")
    tags = [l.short for l in LABELS]
    ax.set_xticks(range(len(tags)))
    ax.set_yticks(range(len(tags)))
    ax.set_xticklabels(tags)
    ax.set_yticklabels(tags)
    ax.set_xlabel("predicted")
    ax.set_ylabel("gold")
    ax.spines[:].set_visible(False)
    if title:
        ax.set_title(title)
    return _save(fig, path)
