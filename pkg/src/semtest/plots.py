"""Figure rendering for reports and sweeps.

All figures are written to files (Agg backend); nothing is shown
interactively.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

from .etest import _level_key  # noqa: E402

_METHOD_LABELS = {
    "proposed": "e-value test",
    "softmax_baseline": "softmax baseline",
    "bootstrap_sign_test": "bootstrap sign test",
}


def render_report_figure(table, path) -> None:
    """Type I error and power against the significance level, per method."""
    fig, axes = plt.subplots(1, 2, figsize=(9, 3.5), sharex=True)
    levels = list(table.levels)
    for metric, ax, title in (
        ("type_i", axes[0], "Type I error"),
        ("power", axes[1], "Power"),
    ):
        for method, metrics in sorted(table.methods.items()):
            means = [metrics[metric][_level_key(a)]["mean"] for a in levels]
            ax.plot(levels, means, marker="o", label=_METHOD_LABELS.get(method, method))
        if metric == "type_i":
            ax.plot(levels, levels, "k--", lw=0.8, label="nominal level")
        ax.set_xlabel("significance level")
        ax.set_ylabel(title)
        ax.set_ylim(-0.02, 1.02)
        ax.grid(alpha=0.3)
    axes[0].legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_tau_tradeoff(rows, path, level: float = 0.05) -> None:
    """Reconstruction quality of y1 versus testing power from y2.

    Each point is one tau; the x axis is PSNR(y1) so the curve reads as
    the accuracy/power trade-off.
    """
    key = _level_key(level)
    psnr = [row.psnr_y1 for row in rows]
    power = [row.power[key] for row in rows]
    fig, ax = plt.subplots(figsize=(5.5, 4))
    ax.plot(psnr, power, marker="o")
    for row, x, y in zip(rows, psnr, power):
        label = f"{row.tau:g}"
        ax.annotate(label, (x, y), textcoords="offset points", xytext=(4, 4), fontsize=8)
    ax.set_xlabel("PSNR of y1 (dB)")
    ax.set_ylabel(f"power at level {level:g}")
    ax.set_title("tau trade-off (labels: tau)")
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
