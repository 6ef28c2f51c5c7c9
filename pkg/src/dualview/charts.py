"""Optional SVG charts for the sweep and the gain analysis.

matplotlib is imported lazily; byte-determinism is enforced by pinning the
svg hash salt and dropping the creation date from the metadata.
"""

from __future__ import annotations

from pathlib import Path

from .evaluate import GainAnalysis, SweepResult


def _plt():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = "dualview"
    return plt


def _save(fig, path: str | Path) -> None:
    fig.savefig(path, format="svg", metadata={"Date": None})


def sweep_chart(sweep: SweepResult, path: str | Path) -> None:
    """Metric vs fusion weight, with a diamond at the selected optimum."""
    plt = _plt()
    alphas = [a for a, _ in sweep.points]
    values = [v for _, v in sweep.points]
    best_value = dict(sweep.points)[sweep.best_alpha]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(alphas, values, marker="o", linewidth=1.5)
    ax.plot([sweep.best_alpha], [best_value], marker="D", markersize=11, color="crimson")
    ax.set_xlabel("fusion weight")
    ax.set_ylabel(sweep.metric)
    ax.set_title(f"{sweep.metric} across fusion weights (best at {sweep.best_alpha:g})")
    ax.grid(True, alpha=0.3)
    _save(fig, path)
    plt.close(fig)


def gain_cdf_chart(analysis: GainAnalysis, path: str | Path, label: str = "gain") -> None:
    """Cumulative distribution of per-pair similarity gains; dashed mean line."""
    plt = _plt()
    gains = sorted(analysis.gains)
    if not gains:
        raise ValueError("no gain records to plot")
    fractions = [(i + 1) / len(gains) for i in range(len(gains))]
    mean = sum(gains) / len(gains)
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.step(gains, fractions, where="post")
    ax.axvline(mean, linestyle="--", color="gray", label=f"mean {mean:+.3f}")
    ax.axvline(0.0, linestyle=":", color="black")
    ax.set_xlabel(label)
    ax.set_ylabel("fraction of pairs")
    ax.legend()
    ax.grid(True, alpha=0.3)
    _save(fig, path)
    plt.close(fig)


def gain_box_chart(analysis: GainAnalysis, path: str | Path, label: str = "gain") -> None:
    """Box plot of similarity gains with a dashed zero line."""
    plt = _plt()
    if not analysis.records:
        raise ValueError("no gain records to plot")
    fig, ax = plt.subplots(figsize=(4, 4))
    ax.boxplot([analysis.gains], tick_labels=[label])
    ax.axhline(0.0, linestyle="--", color="gray")
    ax.set_ylabel(label)
    ax.grid(True, axis="y", alpha=0.3)
    _save(fig, path)
    plt.close(fig)
