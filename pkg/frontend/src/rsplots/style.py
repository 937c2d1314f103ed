"""Shared figure style: deterministic, headless, print-friendly."""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

plt.rcParams.update(
    {
        "figure.dpi": 110,
        "savefig.dpi": 110,
        "font.size": 9,
        "axes.grid": True,
        "grid.alpha": 0.3,
        "lines.markersize": 4,
        "legend.fontsize": 8,
        "svg.hashsalt": "rsplots",
    }
)

PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf"]


def color(i: int) -> str:
    return PALETTE[i % len(PALETTE)]


def save(fig, out: str) -> None:
    fig.savefig(out, metadata={"Software": None} if out.endswith(".png") else None)
    plt.close(fig)
