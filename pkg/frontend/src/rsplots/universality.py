"""Universality figure: per-index moment profiles of the two ensembles
overlaid with shared axes, plus the standardized differences along the
mollification ladder."""

from __future__ import annotations

import argparse
import sys

from . import style
from .schemas import SchemaError, read_table


def render(path: str, out: str) -> None:
    import matplotlib.pyplot as plt

    rows = read_table(path, "universality")
    betas = sorted({r["beta"] for r in rows})
    taus = sorted({float(r["tau"]) for r in rows})
    smallest = taus[0]
    fig, axes = plt.subplots(
        len(betas), 2, figsize=(9.2, 3.0 * len(betas)), squeeze=False
    )
    names = (rows[0]["ensemble_a"], rows[0]["ensemble_b"])
    for i, beta in enumerate(betas):
        prof = [r for r in rows if r["beta"] == beta and float(r["tau"]) == smallest]
        prof.sort(key=lambda r: float(r["radius"]))
        ax = axes[i][0]
        radii = [float(r["radius"]) for r in prof]
        for tag, col in (("a", style.color(0)), ("b", style.color(1))):
            est = [float(r[f"estimate_{tag}"]) for r in prof]
            se = [float(r[f"stderr_{tag}"]) for r in prof]
            ax.errorbar(radii, est, yerr=[2 * s for s in se], fmt="o-", color=col,
                        label=names[tag == "b"], capsize=2)
        ax.set_xscale("log")
        ax.set_yscale("log")
        ax.set_xlabel("parabolic radius")
        ax.set_ylabel("moment")
        ax.set_title(f"{beta}: profiles at the smallest mollification")
        ax.legend(loc="best")

        axd = axes[i][1]
        per_tau = {}
        for r in rows:
            if r["beta"] == beta:
                per_tau.setdefault(float(r["tau"]), []).append(
                    float(r["standardized_difference"])
                )
        ladder = sorted(per_tau, reverse=True)
        meds = [sorted(per_tau[t])[len(per_tau[t]) // 2] for t in ladder]
        axd.semilogx([t**0.25 for t in ladder], meds, "o-", color=style.color(2))
        axd.axhline(2.0, color="0.4", ls="--", lw=1)
        axd.invert_xaxis()
        axd.set_xlabel("quarter-root mollification scale (descending)")
        axd.set_ylabel("standardized difference")
        axd.set_title(f"{beta}: cross-ensemble gap along the ladder")
    fig.tight_layout()
    style.save(fig, out)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="rsplots-universality",
        description="two-ensemble moment overlays and standardized differences",
    )
    parser.add_argument("--input", required=True)
    parser.add_argument("--out", required=True)
    args = parser.parse_args(argv)
    try:
        render(args.input, args.out)
    except (SchemaError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
