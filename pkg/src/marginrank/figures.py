"""Report figures rendered to files next to the delimited outputs.

All rendering uses the Agg backend so runs are headless and repeatable;
figure content is derived only from the report/trace objects passed in.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .evaluation import OBJECTIVES, EvalReport
from .train import TrainTrace

_DPI = 150


def save_figure(fig: plt.Figure, path: str | Path) -> None:
    fig.savefig(Path(path), dpi=_DPI)
    plt.close(fig)


def trace_figure(trace: TrainTrace) -> plt.Figure:
    """Loss components and mean tau to the original ranking, per epoch."""
    fig, (ax_loss, ax_tau) = plt.subplots(
        1, 2, figsize=(9.0, 3.6), constrained_layout=True
    )
    epochs = np.arange(len(trace))
    ax_loss.plot(epochs, trace.total, label="total", color="black")
    ax_loss.plot(epochs, trace.rank_loss, label="margin rank loss", color="tab:red")
    ax_loss.plot(epochs, trace.regularizer, label="closeness penalty", color="tab:blue")
    ax_loss.set_xlabel("epoch")
    ax_loss.set_ylabel("mean loss per session")
    ax_loss.legend(frameon=False)
    ax_loss.set_title("training loss")

    ax_tau.plot(epochs, trace.mean_tau, color="tab:green")
    ax_tau.set_xlabel("epoch")
    ax_tau.set_ylabel("mean Kendall tau to original")
    ax_tau.set_ylim(-1.05, 1.05)
    ax_tau.set_title("ranking drift")
    return fig


def lift_figure(report: EvalReport) -> plt.Figure:
    """Grouped bars: NDCG lift percent per method, one group per objective."""
    methods = [
        name
        for name in dict.fromkeys(r.method for r in report.results)
        if name != report.reference
    ]
    fig, ax = plt.subplots(figsize=(6.4, 3.6), constrained_layout=True)
    width = 0.8 / max(1, len(methods))
    centers = np.arange(len(OBJECTIVES))
    for pos, method in enumerate(methods):
        lifts = [
            report.result(method, obj).lift_pct or 0.0 for obj in OBJECTIVES
        ]
        offset = (pos - (len(methods) - 1) / 2) * width
        bars = ax.bar(centers + offset, lifts, width=width, label=method)
        ax.bar_label(bars, fmt="%+.1f%%", fontsize=8)
    ax.axhline(0.0, color="black", linewidth=0.8)
    ax.set_xticks(centers, OBJECTIVES)
    ax.set_ylabel(f"NDCG@{report.k} lift vs {report.reference} (%)")
    if methods:
        ax.legend(frameon=False)
    ax.set_title("objective tradeoff by method")
    return fig


def risk_reward_figure(report: EvalReport) -> plt.Figure:
    """Stacked risk/ties/reward fractions per method, one panel per objective."""
    methods = [
        name
        for name in dict.fromkeys(r.method for r in report.results)
        if name != report.risk_baseline
    ]
    fig, axes = plt.subplots(
        1, len(OBJECTIVES), figsize=(8.0, 3.6), constrained_layout=True, sharey=True
    )
    for ax, obj in zip(np.atleast_1d(axes), OBJECTIVES):
        ypos = np.arange(len(methods))
        risks = np.array([float(report.result(m, obj).risk) for m in methods])
        ties = np.array([float(report.result(m, obj).ties) for m in methods])
        rewards = np.array([float(report.result(m, obj).reward) for m in methods])
        ax.barh(ypos, risks, color="tab:red", label="risk")
        ax.barh(ypos, ties, left=risks, color="lightgray", label="ties")
        ax.barh(ypos, rewards, left=risks + ties, color="tab:green", label="reward")
        ax.set_yticks(ypos, methods)
        ax.set_xlim(0, 1)
        ax.set_xlabel("fraction of queries")
        ax.set_title(f"{obj} vs {report.risk_baseline}")
    if methods:
        np.atleast_1d(axes)[-1].legend(frameon=False, loc="lower right", fontsize=8)
    return fig
