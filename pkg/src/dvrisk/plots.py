"""Report figures rendered to files next to the delimited outputs.

Every function takes already-computed numbers and a target path, draws one
figure with the Agg backend, and returns the path. No statistics happen
here.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .geo import CATEGORIES

__all__ = [
    "save_report_count_hist",
    "save_reporter_scores",
    "save_correlation_bars",
    "save_metrics_panel",
    "save_table1_bars",
    "save_choropleth",
]

_FIG_DPI = 150


def _finish(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=_FIG_DPI)
    plt.close(fig)
    return path


def save_report_count_hist(histogram: dict[int, int], path):
    fig, ax = plt.subplots(figsize=(6, 4))
    keys = sorted(histogram)
    ax.bar(keys, [histogram[k] for k in keys], color="#4878a8")
    ax.set_xlabel("reports per victim in the year")
    ax.set_ylabel("cases")
    ax.set_title("Report count distribution")
    ax.axvline(2.5, color="#b04030", linestyle="--", linewidth=1)
    return _finish(fig, path)


def save_reporter_scores(stats: list[dict], path):
    """stats rows: {group, mean, sd, n}."""
    fig, ax = plt.subplots(figsize=(6, 4))
    groups = [s["group"] for s in stats]
    means = [s["mean"] for s in stats]
    sds = [s["sd"] for s in stats]
    ax.bar(groups, means, yerr=sds, capsize=4, color="#6a9a58")
    ax.set_ylabel("mean danger-assessment score")
    ax.set_title("Scores by reporter occupation")
    ax.tick_params(axis="x", rotation=20)
    return _finish(fig, path)


def save_correlation_bars(correlations: dict[str, float | None], path):
    fig, ax = plt.subplots(figsize=(6, 4))
    names = [k for k, v in correlations.items() if v is not None]
    values = [correlations[k] for k in names]
    ax.barh(names, values, color="#8060a0")
    ax.axvline(0, color="black", linewidth=0.8)
    ax.set_xlabel("rank correlation with repeat victimization")
    ax.set_xlim(-1, 1)
    return _finish(fig, path)


def save_metrics_panel(report, path):
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 4))
    matrix = np.array([[report.tp, report.fn], [report.fp, report.tn]])
    ax1.imshow(matrix, cmap="Blues")
    for (i, j), value in np.ndenumerate(matrix):
        ax1.text(j, i, str(value), ha="center", va="center")
    ax1.set_xticks([0, 1], ["pred 1", "pred 0"])
    ax1.set_yticks([0, 1], ["actual 1", "actual 0"])
    ax1.set_title("Confusion matrix")

    names, values = [], []
    for name in ("accuracy", "recall", "precision", "f1"):
        value = getattr(report, name)
        if value is not None:
            names.append(name)
            values.append(value)
    ax2.bar(names, values, color="#4878a8")
    ax2.set_ylim(0, 1)
    ax2.set_title("Holdout metrics")
    for i, v in enumerate(values):
        ax2.text(i, v + 0.02, f"{v:.3f}", ha="center")
    return _finish(fig, path)


def save_table1_bars(rows: list[dict], path):
    fig, ax = plt.subplots(figsize=(7, 4))
    cats = [r["category"] for r in rows]
    shares = [r["proportion_pct"] for r in rows]
    ax.bar(cats, shares, color="#b08030")
    ax.set_ylabel("share of cases (%)")
    ax.set_title("Case types")
    ax.tick_params(axis="x", rotation=15)
    for i, v in enumerate(shares):
        ax.text(i, v + 0.5, f"{v:.1f}%", ha="center")
    return _finish(fig, path)


def save_choropleth(feature_collection: dict, path, layer: str = "total"):
    """Shade village polygons by count quantiles of the chosen layer."""
    features = feature_collection["features"]
    values = np.array([f["properties"].get(layer, 0) or 0 for f in features])
    positive = values[values > 0]
    edges = (
        np.quantile(positive, [0.2, 0.4, 0.6, 0.8]) if positive.size else np.array([])
    )
    cmap = plt.get_cmap("YlOrRd")

    fig, ax = plt.subplots(figsize=(8, 7))
    for feat, value in zip(features, values):
        ring = feat["geometry"]["coordinates"][0]
        xs = [p[0] for p in ring]
        ys = [p[1] for p in ring]
        if value <= 0 or edges.size == 0:
            color = "#eeeeee"
        else:
            band = int(np.searchsorted(edges, value, side="right"))
            color = cmap(0.15 + 0.85 * band / max(len(edges), 1))
        ax.fill(xs, ys, color=color, edgecolor="white", linewidth=0.3)
    ax.set_aspect("equal")
    ax.set_title(f"Village choropleth: {layer}")
    ax.set_xlabel("longitude")
    ax.set_ylabel("latitude")
    return _finish(fig, path)
