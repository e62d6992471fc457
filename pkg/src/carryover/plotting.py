"""Figures written next to CLI reports (PNG, non-interactive backend)."""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .metrics import EvalReport  # noqa: E402


def plot_bucket_f1(report: EvalReport, path: str | os.PathLike, title: str = "") -> None:
    labels = list(report.by_distance) + [report.aggregate_label]
    values = [report.by_distance[l][2] for l in report.by_distance] + [report.f1]
    fig, ax = plt.subplots(figsize=(5, 3.2))
    bars = ax.bar(labels, values, color=["#4c72b0"] * (len(labels) - 1) + ["#dd8452"])
    for bar, v in zip(bars, values):
        ax.text(bar.get_x() + bar.get_width() / 2, v + 0.01, f"{v:.3f}", ha="center", va="bottom", fontsize=8)
    ax.set_ylim(0, 1.08)
    ax.set_xlabel("slot distance")
    ax.set_ylabel("F1")
    ax.set_title(title or f"F1 by distance ({report.preset})")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_grid(report: EvalReport, path: str | os.PathLike) -> None:
    """Heatmap of F1 over (S_Final, S_Carry) cells; empty cells stay blank."""
    n = max((sf for sf, _ in report.grid), default=0) + 1
    f1 = np.full((n, n), np.nan)
    counts = np.zeros((n, n), dtype=int)
    for (sf, sc), (f, cnt) in report.grid.items():
        f1[sf, sc] = f
        counts[sf, sc] = cnt
    fig, ax = plt.subplots(figsize=(5, 4.2))
    im = ax.imshow(np.ma.masked_invalid(f1), cmap="viridis", vmin=0, vmax=1, origin="lower")
    for sf in range(n):
        for sc in range(n):
            if counts[sf, sc]:
                ax.text(sc, sf, f"{f1[sf, sc]:.2f}\n({counts[sf, sc]})", ha="center", va="center",
                        fontsize=6, color="white" if f1[sf, sc] < 0.6 else "black")
    ax.set_xticks(range(n))
    ax.set_yticks(range(n))
    ax.set_xlabel("S_Carry")
    ax.set_ylabel("S_Final")
    ax.set_title("F1 by final / carried slot count")
    fig.colorbar(im, ax=ax, fraction=0.046, pad=0.04)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_history(train_loss, dev_f1, path: str | os.PathLike, best_epoch: int | None = None) -> None:
    fig, ax = plt.subplots(figsize=(5, 3.2))
    epochs = np.arange(1, len(train_loss) + 1)
    ax.plot(epochs, train_loss, color="#4c72b0", label="train loss")
    ax.set_xlabel("epoch")
    ax.set_ylabel("loss")
    ax2 = ax.twinx()
    ax2.plot(epochs, dev_f1, color="#dd8452", label="dev F1")
    ax2.set_ylim(0, 1.02)
    ax2.set_ylabel("dev F1")
    if best_epoch is not None and best_epoch >= 0:
        ax2.axvline(best_epoch + 1, color="grey", linestyle=":", linewidth=1)
    fig.legend(loc="lower center", ncol=2, fontsize=8)
    fig.tight_layout(rect=(0, 0.06, 1, 1))
    fig.savefig(path, dpi=120)
    plt.close(fig)
