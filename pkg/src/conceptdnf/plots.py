"""Matplotlib figures rendered next to the delimited reports: per-class
coverage curves and the minimal-set size histogram."""

from __future__ import annotations

from pathlib import Path
from typing import Mapping, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt


def save_coverage_curve(
    class_name: str,
    support_curve: Sequence[float],
    validation_curve: Sequence[float] | None,
    path: str | Path,
) -> None:
    fig, ax = plt.subplots(figsize=(5, 3.5))
    xs = range(1, len(support_curve) + 1)
    ax.plot(xs, [100 * v for v in support_curve], marker="o", label="support")
    if validation_curve is not None:
        ax.plot(
            range(1, len(validation_curve) + 1),
            [100 * v for v in validation_curve],
            marker="s",
            label="validation",
        )
    ax.set_xlabel("number of clauses")
    ax.set_ylabel("images covered (%)")
    ax.set_ylim(0, 105)
    ax.set_title(f"Coverage vs clauses: {class_name}")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_size_histogram(hist: Mapping[int, int], path: str | Path) -> None:
    fig, ax = plt.subplots(figsize=(5, 3.5))
    sizes = sorted(hist)
    ax.bar(sizes, [hist[s] for s in sizes], width=0.8)
    ax.set_xlabel("concepts per minimal sufficient set")
    ax.set_ylabel("count")
    ax.set_title("Minimal sufficient set sizes")
    if sizes:
        ax.set_xticks(sizes)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
