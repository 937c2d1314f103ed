"""Mollification-ladder figure: adjacent-rung model distances per index
and the counterterm divergence with its fitted exponent against the
target |beta| - 2."""

from __future__ import annotations

import argparse
import math
import sys

from . import style
from .indexmath import homogeneity
from .schemas import SchemaError, homogeneity_map, read_table


def _fit_loglog(xs, ys):
    n = len(xs)
    lx = [math.log(x) for x in xs]
    ly = [math.log(y) for y in ys]
    mx = sum(lx) / n
    my = sum(ly) / n
    sxx = sum((a - mx) ** 2 for a in lx)
    slope = sum((a - mx) * (b - my) for a, b in zip(lx, ly)) / sxx
    return slope, my - slope * mx


def render(
    cauchy_path: str,
    counterterm_path: str | None,
    out: str,
    alpha: float | None = None,
    enumerate_path: str | None = None,
) -> None:
    import matplotlib.pyplot as plt

    cauchy = read_table(cauchy_path, "cauchy")
    panels = 2 if counterterm_path else 1
    fig, axes = plt.subplots(1, panels, figsize=(4.6 * panels, 3.4), squeeze=False)
    ax = axes[0][0]
    by_beta: dict = {}
    for row in cauchy:
        d = float(row["distance"])
        if d > 0:
            by_beta.setdefault(row["beta"], []).append((float(row["tau"]), d))
    for i, beta in enumerate(sorted(by_beta)):
        pts = sorted(by_beta[beta], reverse=True)
        ax.loglog(
            [t**0.25 for t, _ in pts],
            [d for _, d in pts],
            "o-",
            color=style.color(i),
            label=beta,
        )
    ax.set_xlabel("quarter-root mollification scale")
    ax.set_ylabel("adjacent-rung distance")
    ax.set_title("mollification ladder")
    ax.legend(loc="best", ncol=2)

    if counterterm_path:
        axc = axes[0][1]
        ladder = read_table(counterterm_path, "counterterm_ladder")
        homs = homogeneity_map(read_table(enumerate_path, "enumerate")) if enumerate_path else {}
        series: dict = {}
        for row in ladder:
            v = abs(float(row["value"]))
            if v > 0:
                series.setdefault(row["beta"], []).append((float(row["tau"]), v))
        for i, beta in enumerate(sorted(series)):
            pts = sorted(series[beta])
            if len(pts) < 3:
                continue
            qts = [t**0.25 for t, _ in pts]
            vals = [v for _, v in pts]
            slope, _ = _fit_loglog(qts, vals)
            label = f"{beta}: fitted {slope:.2f}"
            if beta in homs:
                label += f", target {homs[beta] - 2.0:.2f}"
            elif alpha is not None:
                label += f", target {homogeneity(beta, alpha) - 2.0:.2f}"
            axc.loglog(qts, vals, "o-", color=style.color(i), label=label)
        axc.set_xlabel("quarter-root mollification scale")
        axc.set_ylabel("|counterterm|")
        axc.set_title("renormalization divergence")
        axc.legend(loc="best")
    fig.tight_layout()
    style.save(fig, out)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="rsplots-convergence",
        description="Cauchy ladder curves and the counterterm divergence panel",
    )
    parser.add_argument("--cauchy", required=True)
    parser.add_argument("--counterterm", default=None)
    parser.add_argument("--enumerate", dest="enumerate_path", default=None)
    parser.add_argument("--alpha", type=float, default=None, help="used for target exponents when no enumerate table is given")
    parser.add_argument("--out", required=True)
    args = parser.parse_args(argv)
    try:
        render(args.cauchy, args.counterterm, args.out, args.alpha, args.enumerate_path)
    except (SchemaError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
