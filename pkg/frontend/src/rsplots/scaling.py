"""Scaling figure: per-index moment profiles in log-log with the fitted
line and the dashed reference of slope |beta| from the enumerate table."""

from __future__ import annotations

import argparse
import math
import sys

from . import style
from .schemas import SchemaError, homogeneity_map, read_table


def render(exponents_path: str, moments_path: str, enumerate_path: str, out: str) -> None:
    import matplotlib.pyplot as plt

    moments = read_table(moments_path, "moments")
    exponents = read_table(exponents_path, "exponents")
    homs = homogeneity_map(read_table(enumerate_path, "enumerate"))

    by_beta: dict = {}
    for row in moments:
        est = float(row["estimate"])
        if est > 0:
            by_beta.setdefault(row["beta"], []).append(
                (float(row["radius"]), est, float(row["stderr"]))
            )
    fits = {row["beta"]: (float(row["slope"]), float(row["stderr"])) for row in exponents}

    betas = [b for b in sorted(by_beta) if len(by_beta[b]) >= 2]
    if not betas:
        raise SchemaError(f"{moments_path}: no plottable moment profiles")
    ncol = min(3, len(betas))
    nrow = (len(betas) + ncol - 1) // ncol
    fig, axes = plt.subplots(nrow, ncol, figsize=(3.4 * ncol, 2.8 * nrow), squeeze=False)
    for i, beta in enumerate(betas):
        ax = axes[i // ncol][i % ncol]
        pts = sorted(by_beta[beta])
        radii = [p[0] for p in pts]
        ests = [p[1] for p in pts]
        ax.loglog(radii, ests, "o", color=style.color(i), label="moments")
        if beta in fits:
            slope, _ = fits[beta]
            anchor = ests[len(ests) // 2] / radii[len(radii) // 2] ** slope
            ax.loglog(
                radii,
                [anchor * r**slope for r in radii],
                "-",
                color=style.color(i),
                label=f"fit {slope:.3f}",
            )
        if beta in homs:
            ref = homs[beta]
            anchor = ests[0] / radii[0] ** ref
            ax.loglog(
                radii,
                [anchor * r**ref for r in radii],
                "--",
                color="0.3",
                label=f"reference {ref:.3f}",
            )
        ax.set_title(beta)
        ax.set_xlabel("parabolic radius")
        ax.set_ylabel("moment")
        ax.legend(loc="best")
    for j in range(len(betas), nrow * ncol):
        axes[j // ncol][j % ncol].axis("off")
    fig.tight_layout()
    style.save(fig, out)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="rsplots-scaling",
        description="log-log moment profiles with fitted and reference slopes",
    )
    parser.add_argument("--exponents", required=True)
    parser.add_argument("--moments", required=True)
    parser.add_argument("--enumerate", dest="enumerate_path", required=True)
    parser.add_argument("--out", required=True)
    args = parser.parse_args(argv)
    try:
        render(args.exponents, args.moments, args.enumerate_path, args.out)
    except (SchemaError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
