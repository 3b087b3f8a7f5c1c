"""Figure rendering for reports: interval plots, sweeps, and component maps."""

from __future__ import annotations

from pathlib import Path

import matplotlib
import numpy as np
import pandas as pd

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

__all__ = ["interval_plot", "sweep_plot", "component_maps", "save_fig"]

_COLORS = {"pm_total": "black", "pm_mean": "#d95f02", "pm_low": "#1b9e77",
           "pm_high": "#7570b3", "pm_filtered": "#e7298a"}


def save_fig(fig, path, dpi: int = 150) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=dpi, bbox_inches="tight")
    plt.close(fig)
    return path


def interval_plot(estimates: pd.DataFrame, path, title: str | None = None) -> Path:
    """Point estimates with interval bars, grouped by model.

    Expects columns model, coefficient, estimate, lower, upper; when several
    replications are present the replication-median row set is drawn.
    """
    frame = estimates
    if "replication" in frame.columns and frame["replication"].nunique() > 1:
        mid = frame.groupby(["model", "coefficient"])[["estimate", "lower", "upper"]]
        frame = mid.median().reset_index()
    fig, ax = plt.subplots(figsize=(7, 4))
    positions = []
    labels = []
    x = 0.0
    for model, rows in frame.groupby("model", sort=False):
        for row in rows.itertuples(index=False):
            color = _COLORS.get(row.coefficient, "gray")
            ax.errorbar(
                x,
                row.estimate,
                yerr=[[row.estimate - row.lower], [row.upper - row.estimate]],
                fmt="o",
                capsize=4,
                color=color,
            )
            positions.append(x)
            labels.append(f"{model}\n{row.coefficient}")
            x += 1.0
        x += 0.6
    ax.axhline(0.0, color="0.6", lw=0.8, ls="--")
    ax.set_xticks(positions)
    ax.set_xticklabels(labels, fontsize=8)
    ax.set_ylabel("estimate (g per unit exposure)")
    if title:
        ax.set_title(title)
    return save_fig(fig, path)


def sweep_plot(sweep: pd.DataFrame, path, title: str | None = None) -> Path:
    """Effect estimates as successively more fine levels are removed."""
    frame = sweep
    if "replication" in frame.columns and frame["replication"].nunique() > 1:
        frame = (
            frame.groupby(["dropped", "n_dropped_levels"])[["estimate", "lower", "upper"]]
            .median()
            .reset_index()
        )
    frame = frame.sort_values("n_dropped_levels")
    fig, ax = plt.subplots(figsize=(6.5, 4))
    x = frame["n_dropped_levels"].to_numpy()
    est = frame["estimate"].to_numpy()
    ax.errorbar(
        x,
        est,
        yerr=[est - frame["lower"].to_numpy(), frame["upper"].to_numpy() - est],
        fmt="o-",
        capsize=4,
        color="#1b9e77",
    )
    ax.axhline(0.0, color="0.6", lw=0.8, ls="--")
    ax.set_xticks(x)
    ax.set_xticklabels(frame["dropped"], fontsize=8)
    ax.set_xlabel("removed levels")
    ax.set_ylabel("spatial effect estimate")
    if title:
        ax.set_title(title)
    return save_fig(fig, path)


def component_maps(decomposed, path, title: str | None = None) -> Path:
    """Three-panel scatter map of one day's low, high, and total surfaces."""
    pts = decomposed.points
    panels = [
        ("low frequency", decomposed.low_values),
        ("high frequency", decomposed.high_values),
        ("total", decomposed.total()),
    ]
    fig, axes = plt.subplots(1, 3, figsize=(12, 3.8), constrained_layout=True)
    for ax, (name, vals) in zip(axes, panels):
        sc = ax.scatter(pts[:, 0], pts[:, 1], c=vals, s=4, cmap="viridis")
        ax.set_title(name, fontsize=9)
        ax.set_aspect("equal")
        fig.colorbar(sc, ax=ax, shrink=0.85)
    if title:
        fig.suptitle(title)
    return save_fig(fig, path)
