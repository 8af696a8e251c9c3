"""Figure rendering for the report paths.

Figures are a side output next to the delimited files, never the data
boundary: anything plotted here is also written as CSV or JSON.  The Agg
backend plus pinned savefig metadata keeps reruns byte-identical, which
the determinism tests rely on.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .reports import CheckReport, HOLDS, HOLDS_CI

# savefig defaults pinned for reproducible bytes
_SAVE = {"dpi": 120, "metadata": {"Software": "carnotou"}}
_VERDICT_COLOR = {HOLDS: "#2a7e43", HOLDS_CI: "#d88a2d"}
_VIOLATED_COLOR = "#b2332e"


def save_decay_figure(reports: list[CheckReport], path) -> None:
    """Semilog decay curve with its bound; reports share one name."""
    ts = [float(r.parameters["t"]) for r in reports]
    vals = [r.lhs.mean for r in reports]
    cis = [r.lhs.half_width for r in reports]
    bounds = [r.rhs.mean for r in reports]
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ax.errorbar(ts, vals, yerr=cis, fmt="o-", color="#1f4e79", capsize=3,
                label="estimate")
    ax.plot(ts, bounds, "s--", color="#b2332e", label="bound")
    positive = [v for v in vals + bounds if v > 0]
    if positive and min(positive) > 0 and all(v > 0 for v in vals + bounds):
        ax.set_yscale("log")
    ax.set_xlabel("t")
    name = reports[0].name if reports else "decay"
    ax.set_ylabel(name)
    ax.legend(loc="best")
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, **_SAVE)
    plt.close(fig)


def save_slack_figure(reports: list[CheckReport], path) -> None:
    """Horizontal slack bars with CI whiskers, colored by verdict."""
    n = len(reports)
    fig, ax = plt.subplots(figsize=(6.5, max(2.0, 0.45 * n + 1.2)))
    ys = np.arange(n)[::-1]
    for y, r in zip(ys, reports):
        color = _VERDICT_COLOR.get(r.verdict, _VIOLATED_COLOR)
        ax.barh(y, r.slack, xerr=r.half_width, color=color, height=0.6,
                capsize=3, error_kw={"ecolor": "#444444"})
    labels = []
    for r in reports:
        t = r.parameters.get("t")
        labels.append(f"{r.name}" if t is None else f"{r.name} (t={t:g})")
    ax.set_yticks(ys)
    ax.set_yticklabels(labels, fontsize=8)
    ax.axvline(0.0, color="#222222", lw=0.8)
    ax.set_xlabel("slack (bound minus estimate)")
    ax.grid(True, axis="x", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, **_SAVE)
    plt.close(fig)


def save_ensemble_figure(xs: np.ndarray, zs: np.ndarray, t: float, path) -> None:
    """Scatter of the first horizontal pair and first vertical coordinate."""
    fig, axes = plt.subplots(1, 2, figsize=(8.0, 4.0))
    axes[0].scatter(xs[:, 0], xs[:, 1], s=3, alpha=0.35, color="#1f4e79",
                    linewidths=0)
    axes[0].set_xlabel("x1")
    axes[0].set_ylabel("x2")
    axes[0].set_title(f"horizontal slice, t={t:g}")
    axes[1].scatter(xs[:, 0], zs[:, 0], s=3, alpha=0.35, color="#2a7e43",
                    linewidths=0)
    axes[1].set_xlabel("x1")
    axes[1].set_ylabel("z1")
    axes[1].set_title("horizontal vs vertical")
    for ax in axes:
        ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, **_SAVE)
    plt.close(fig)
