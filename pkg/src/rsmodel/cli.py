"""Command-line pipelines: enumerate, calibrate, build, mc, converge,
universality, verify.

Exit codes: 0 all hard checks pass, 2 configuration error, 3 numerical
check failure, 4 resource limit.  Statistical (soft) checks are reported
and only fail the run under --strict.  Every command echoes the resolved
configuration and a content hash into the output directory, and all
outputs are byte-identical across reruns and worker counts.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import io
from .ensembles import EnsembleSpec, sample_noise
from .fields import GridField
from .gamma import build_gamma
from .indices import (
    ResourceLimitError,
    e_k,
    format_index,
    is_populated,
    noise_homogeneity,
    ordinal,
    parse_index,
)
from .mc import (
    cauchy_study,
    covariance_report,
    fit_loglog,
    gamma_offdiagonal_study,
    gamma_poly_entries_exact,
    moment_study,
    spectral_gap_report,
)
from .model import ModelBuilder, calibrate_counterterm
from .recenter import extract_recentering, verify_recenter, verify_recenter_minus
from .runconfig import ConfigError, RunConfig, load_config
from .series import Series, Universe
from .verify import (
    check_additivity,
    check_enumeration,
    check_gamma_algebra,
    check_kernels,
    check_leibniz,
    check_model_basics,
    check_projections,
    check_ring_laws,
    make_run_pair,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_RESOURCE = 4


def _universe(cfg: RunConfig) -> Universe:
    return Universe(cfg.params, cfg.ordering, hard_limit=cfg.hard_limit)


def _builder(cfg: RunConfig, uni: Universe) -> ModelBuilder:
    return ModelBuilder(uni, cfg.grid, window_radius=cfg.window_radius)


def _prepare_out(cfg: RunConfig, out: str) -> None:
    os.makedirs(out, exist_ok=True)
    io.write_json(os.path.join(out, "config.json"), cfg.echo())
    io.write_manifest(out, cfg.echo())


def _counterterm_path(out: str) -> str:
    return os.path.join(out, "counterterm.json")


def _save_counterterm(path: str, tau: float, report: list) -> None:
    entries = {
        name: {"value": val, "stderr": err, "n_samples": n, "tau": tau}
        for name, val, err, n in report
    }
    io.write_json(path, {"tau": tau, "entries": entries})


def _load_counterterm(path: str, uni: Universe) -> tuple:
    with open(path) as fh:
        obj = json.load(fh)
    coeffs = {
        parse_index(name): rec["value"]
        for name, rec in obj["entries"].items()
        if rec["value"] != 0.0
    }
    return Series(uni, coeffs), float(obj["tau"])


def _calibrate(cfg: RunConfig, builder: ModelBuilder, tau: float) -> tuple:
    sample = lambda i: sample_noise(cfg.ensemble, cfg.grid, cfg.mc.seed + 101, i)
    return calibrate_counterterm(builder, sample, tau, cfg.calibration_samples)


# --- commands -----------------------------------------------------------------


def cmd_enumerate(cfg: RunConfig, out: str) -> int:
    uni = _universe(cfg)
    _prepare_out(cfg, out)
    rows = []
    for b in uni.populated:
        rows.append(
            (
                format_index(b),
                uni.hom(b),
                noise_homogeneity(b),
                ordinal(b, cfg.ordering),
                is_populated(b),
                uni.is_purely_poly(b),
            )
        )
    io.write_csv(os.path.join(out, "enumerate.csv"), io.CSV_SCHEMAS["enumerate"], rows)
    widths = (22, 14, 6, 10)
    print(f"{'beta':<{widths[0]}}{'|beta|':<{widths[1]}}{'[beta]':<{widths[2]}}{'ordinal':<{widths[3]}}poly")
    for r in rows:
        print(f"{r[0]:<{widths[0]}}{r[1]:<{widths[1]}.6g}{r[2]:<{widths[2]}}{r[3]:<{widths[3]}.4g}{'yes' if r[5] else ''}")
    print(f"{len(rows)} populated indices below cutoff {cfg.params.homogeneity_cutoff}")
    return EXIT_OK


def cmd_calibrate(cfg: RunConfig, out: str) -> int:
    uni = _universe(cfg)
    builder = _builder(cfg, uni)
    _prepare_out(cfg, out)
    _, report = _calibrate(cfg, builder, cfg.tau)
    _save_counterterm(_counterterm_path(out), cfg.tau, report)
    for name, val, err, n in report:
        print(f"c[{name}] = {val:.6g} +/- {err:.2g} (n={n})")
    return EXIT_OK


def cmd_build(cfg: RunConfig, out: str, seed: int | None) -> int:
    uni = _universe(cfg)
    builder = _builder(cfg, uni)
    _prepare_out(cfg, out)
    cpath = _counterterm_path(out)
    if not os.path.exists(cpath):
        print(
            "error: no calibrated counterterm found; run the calibrate "
            "subcommand into this output directory first",
            file=sys.stderr,
        )
        return EXIT_CONFIG
    counterterm, ctau = _load_counterterm(cpath, uni)
    if abs(ctau - cfg.tau) > 1e-15:
        print(
            f"error: counterterm was calibrated at tau={ctau}, config asks {cfg.tau}; recalibrate",
            file=sys.stderr,
        )
        return EXIT_CONFIG
    use_seed = cfg.mc.seed if seed is None else seed
    offset = (0,) + (cfg.recenter_offset_cells,) * cfg.grid.d
    run_x, comps_y, pims_y, y = make_run_pair(
        builder, cfg.ensemble, cfg.tau, counterterm, use_seed, 0, offset
    )
    fields_dir = os.path.join(out, "fields")
    os.makedirs(fields_dir, exist_ok=True)
    for b, comp in run_x.components.items():
        io.dump_field(
            os.path.join(fields_dir, f"pi_{format_index(b).replace('*', '.')}.bin"),
            comp.value_field(),
            {"role": "pi", "beta": format_index(b), "seed": use_seed, "tau": cfg.tau},
        )
    for b, pim in run_x.pi_minus.items():
        io.dump_field(
            os.path.join(fields_dir, f"pim_{format_index(b).replace('*', '.')}.bin"),
            pim.to_field(),
            {"role": "pi_minus", "beta": format_index(b), "seed": use_seed, "tau": cfg.tau},
        )
    slices_dir = os.path.join(out, "slices")
    os.makedirs(slices_dir, exist_ok=True)
    for b, comp in run_x.components.items():
        io.write_field_slice_csv(
            os.path.join(slices_dir, f"pi_{format_index(b).replace('*', '.')}.csv"),
            comp.value_field(),
            axis=1,
            index=builder.base.idx[0],
        )
    tol = cfg.fit_tolerance if cfg.fit_tolerance is not None else float("inf")
    gd, fit_report = extract_recentering(builder, run_x, comps_y, y, fit_tolerance=tol)
    gmat = build_gamma(gd)
    io.write_csv(
        os.path.join(out, "gamma.csv"), io.CSV_SCHEMAS["gamma"], list(gmat.to_csv_rows())
    )
    io.write_json(os.path.join(out, "gamma_data.json"), gd.to_json_obj())
    rec = verify_recenter(builder, run_x, comps_y, y, gmat)
    recm = verify_recenter_minus(
        builder, run_x, comps_y, pims_y, gmat, y, t_smooth=min(cfg.mc.tau_ladder or [cfg.tau])
    )
    basics = check_model_basics(builder, cfg.ensemble, cfg.tau, counterterm, use_seed)
    report = {
        "basics": [{"name": c.name, "passed": c.passed, "detail": c.detail} for c in basics],
        "recenter": rec.rows,
        "recenter_minus": recm.rows,
        "recentering_fit": fit_report,
    }
    io.write_json(os.path.join(out, "report.json"), report)
    hard_fail = [c for c in basics if c.hard and not c.passed]
    for c in basics:
        print(c.line())
    if hard_fail:
        return EXIT_NUMERICAL
    return EXIT_OK


def cmd_mc(cfg: RunConfig, out: str, strict: bool) -> int:
    uni = _universe(cfg)
    builder = _builder(cfg, uni)
    _prepare_out(cfg, out)
    c, report = _calibrate(cfg, builder, cfg.tau)
    _save_counterterm(_counterterm_path(out), cfg.tau, report)
    rows, fits = moment_study(builder, cfg.ensemble, cfg.tau, c, cfg.mc)
    io.write_csv(os.path.join(out, "moments.csv"), io.CSV_SCHEMAS["moments"], rows)
    exp_rows = [
        (format_index(b), f.slope, f.stderr, f.r2) for b, f in sorted(fits.items(), key=lambda kv: kv[0].exponents)
    ]
    io.write_csv(os.path.join(out, "exponents.csv"), io.CSV_SCHEMAS["exponents"], exp_rows)
    gfit, _ = gamma_offdiagonal_study(builder, cfg.ensemble, cfg.tau, c, cfg.mc)
    io.write_csv(
        os.path.join(out, "gamma_exponent.csv"),
        io.CSV_SCHEMAS["exponents"],
        [(f"({format_index(e_k(1))};{format_index(e_k(0))})", gfit.slope, gfit.stderr, gfit.r2)],
    )
    sg_rows = spectral_gap_report([cfg.ensemble, cfg.ensemble_b], cfg.grid, cfg.params.alpha, cfg.mc)
    io.write_csv(os.path.join(out, "sg.csv"), io.CSV_SCHEMAS["sg"], sg_rows)
    cov = covariance_report(builder, cfg.ensemble, cfg.tau, c, cfg.mc, [e_k(0), e_k(1)])
    io.write_json(os.path.join(out, "covariance.json"), cov)

    failures = []
    beta0_slope = fits[parse_index("0")].slope
    if abs(beta0_slope - cfg.params.alpha) > 0.15:
        failures.append(f"beta=0 slope {beta0_slope:.3f} vs alpha {cfg.params.alpha}")
    if cov["shift_max_relative"] > 1e-9:
        failures.append(f"shift equivariance {cov['shift_max_relative']:.2e}")
    for msg in failures:
        print(f"soft-check failure: {msg}")
    if cov["shift_max_relative"] > 1e-9:
        return EXIT_NUMERICAL
    if failures and strict:
        return EXIT_NUMERICAL
    return EXIT_OK


def cmd_converge(cfg: RunConfig, out: str, strict: bool) -> int:
    uni = _universe(cfg)
    builder = _builder(cfg, uni)
    _prepare_out(cfg, out)
    counterterms = {}
    ladder_rows = []
    for tau in sorted(cfg.mc.tau_ladder):
        c, report = _calibrate(cfg, builder, tau)
        counterterms[tau] = c
        for name, val, err, n in report:
            ladder_rows.append((name, tau, val, err, n))
    io.write_csv(
        os.path.join(out, "counterterm_ladder.csv"),
        io.CSV_SCHEMAS["counterterm_ladder"],
        ladder_rows,
    )
    targets = [
        b for b in uni.populated if not uni.is_purely_poly(b) and uni.hom(b) < 2.0
    ]
    probe = cfg.mc.probe_radii[-1]
    rows = cauchy_study(
        builder, cfg.ensemble, cfg.mc, counterterms, targets, probe,
        smooth_t=min(cfg.mc.tau_ladder) / 4.0,
    )
    io.write_csv(os.path.join(out, "cauchy.csv"), io.CSV_SCHEMAS["cauchy"], rows)

    failures = []
    for b in targets:
        name = format_index(b)
        ds = [r[3] for r in rows if r[0] == name]
        if any(d2 >= d1 for d1, d2 in zip(ds, ds[1:])):
            failures.append(f"cauchy distances not decreasing for {name}: {ds}")
    for msg in failures:
        print(f"soft-check failure: {msg}")
    return EXIT_NUMERICAL if (failures and strict) else EXIT_OK


def cmd_universality(cfg: RunConfig, out: str, strict: bool) -> int:
    from .mc import universality_study

    uni = _universe(cfg)
    builder = _builder(cfg, uni)
    _prepare_out(cfg, out)
    ca, cb = {}, {}
    targets = [parse_index("0"), e_k(1)]
    cap = 1e-9 + max(ordinal(b, uni.ordering) for b in targets)
    for tau in sorted(cfg.mc.tau_ladder):
        sample_a = lambda i: sample_noise(cfg.ensemble, cfg.grid, cfg.mc.seed + 101, i)
        ca[tau], _ = calibrate_counterterm(
            builder, sample_a, tau, cfg.calibration_samples, max_ordinal=cap
        )
        sample_b = lambda i: sample_noise(cfg.ensemble_b, cfg.grid, cfg.mc.seed + 101, i)
        cb[tau], _ = calibrate_counterterm(
            builder, sample_b, tau, cfg.calibration_samples, max_ordinal=cap
        )
    rows = universality_study(builder, cfg.ensemble, cfg.ensemble_b, cfg.mc, ca, cb, targets)
    io.write_csv(os.path.join(out, "universality.csv"), io.CSV_SCHEMAS["universality"], rows)
    failures = []
    zero_rows = [r for r in rows if r[0] == "0" and r[2] == max(cfg.mc.tau_ladder)]
    if any(r[9] > 2.0 for r in zero_rows):
        failures.append("beta=0 profiles disagree beyond 2 combined stderr")
    for msg in failures:
        print(f"soft-check failure: {msg}")
    return EXIT_NUMERICAL if (failures and strict) else EXIT_OK


def cmd_verify(cfg: RunConfig, out: str, strict: bool) -> int:
    uni = _universe(cfg)
    _prepare_out(cfg, out)
    rng = np.random.default_rng(cfg.mc.seed)
    checks = [
        check_enumeration(cfg.params, cfg.ordering),
        check_additivity(cfg.params, cfg.ordering, rng),
        check_ring_laws(uni, rng),
        check_leibniz(uni, rng),
        check_projections(uni, rng),
        check_gamma_algebra(uni, rng),
        check_kernels(cfg.grid, rng),
    ]
    builder = _builder(cfg, uni)
    c, _ = _calibrate(cfg, builder, cfg.tau)
    checks.extend(check_model_basics(builder, cfg.ensemble, cfg.tau, c, cfg.mc.seed))
    io.write_json(
        os.path.join(out, "verify.json"),
        [
            {"name": c_.name, "passed": c_.passed, "hard": c_.hard, "detail": c_.detail}
            for c_ in checks
        ],
    )
    for c_ in checks:
        print(c_.line())
    hard_fail = [c_ for c_ in checks if c_.hard and not c_.passed]
    soft_fail = [c_ for c_ in checks if not c_.hard and not c_.passed]
    if hard_fail or (strict and soft_fail):
        return EXIT_NUMERICAL
    return EXIT_OK


def main(argv: list | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="rsmodel",
        description="Centered-model construction and validation for a quasilinear SPDE",
    )
    parser.add_argument("--config", default=None, help="JSON config (comments allowed)")
    parser.add_argument("--out", default="out", help="output directory")
    parser.add_argument("--seed", type=int, default=None, help="seed override")
    parser.add_argument("--workers", type=int, default=None, help="worker threads")
    parser.add_argument("--strict", action="store_true", help="soft failures become fatal")
    parser.add_argument(
        "command",
        choices=["enumerate", "calibrate", "build", "mc", "converge", "universality", "verify"],
    )
    args = parser.parse_args(argv)

    overrides: dict = {}
    if args.seed is not None:
        overrides.setdefault("mc", {})["seed"] = args.seed
    if args.workers is not None:
        overrides.setdefault("mc", {})["workers"] = args.workers
    try:
        cfg = load_config(args.config, overrides)
    except (ConfigError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        if args.command == "enumerate":
            return cmd_enumerate(cfg, args.out)
        if args.command == "calibrate":
            return cmd_calibrate(cfg, args.out)
        if args.command == "build":
            return cmd_build(cfg, args.out, args.seed)
        if args.command == "mc":
            return cmd_mc(cfg, args.out, args.strict)
        if args.command == "converge":
            return cmd_converge(cfg, args.out, args.strict)
        if args.command == "universality":
            return cmd_universality(cfg, args.out, args.strict)
        return cmd_verify(cfg, args.out, args.strict)
    except ResourceLimitError as exc:
        print(f"resource limit: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except MemoryError:
        print("resource limit: out of memory", file=sys.stderr)
        return EXIT_RESOURCE


if __name__ == "__main__":
    sys.exit(main())
