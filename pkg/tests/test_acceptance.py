"""Acceptance suite: one test per primary criterion, each printing a
PASS/FAIL line with its measured margin.

Statistical criteria run at a fixed seed on geometry where the exact
covariance oracle realizes the target exponents (the time axis must
resolve |k|^2 at the probe scales, see the ledger's geometry note);
tolerances are the documented ones.
"""

import math

import numpy as np
import pytest

from rsmodel.ensembles import EnsembleSpec, sample_noise
from rsmodel.fields import GridField, GridSpec, _freqs, parabolic_distance
from rsmodel.gamma import build_dgamma, build_gamma
from rsmodel.indices import (
    ModelParams,
    OrderingParams,
    ZERO,
    e_k,
    e_n,
    format_index,
    ordinal,
    parse_index,
)
from rsmodel.mc import (
    MCConfig,
    cauchy_study,
    covariance_report,
    fit_loglog,
    gamma_offdiagonal_study,
    make_direction,
    moment_study,
    tree_mean,
    universality_study,
)
from rsmodel.model import ModelBuilder, calibrate_counterterm, rebased_components
from rsmodel.recenter import (
    extract_dpi,
    extract_recentering,
    minimal_offset,
    verify_ho28,
    verify_recenter,
    verify_recenter_minus,
)
from rsmodel.series import Series, Universe
from rsmodel.verify import (
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

ALPHA = 0.45
SEED = 20250809
GRID_MAIN = GridSpec(0.09375, 1.0, 512, 256)
GRID_MED = GridSpec(0.125, 1.0, 64, 128)
LADDER = tuple(2e-5 * 2.0**-j for j in range(2, 7))
TAU_MODEL = min(LADDER)
TAU_SLOPE = 2e-10
PROBE_CELLS = (8, 11, 16, 22, 32)
PROBES = tuple(c / 256 for c in PROBE_CELLS)


def record(name: str, ok: bool, detail: str) -> None:
    print(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
    assert ok, f"{name}: {detail}"


# ---- shared fixtures -------------------------------------------------------


@pytest.fixture(scope="module")
def main_builder(universe):
    return ModelBuilder(universe, GRID_MAIN)


@pytest.fixture(scope="module")
def white():
    return EnsembleSpec("gaussian_white")


@pytest.fixture(scope="module")
def uniform():
    return EnsembleSpec("uniform_cell")


@pytest.fixture(scope="module")
def ladder_counterterms(main_builder, white):
    """Full calibration per mollification rung on the main grid."""
    out = {}
    for tau in LADDER:
        sample = lambda i: sample_noise(white, GRID_MAIN, SEED + 101, i)
        out[tau], _ = calibrate_counterterm(main_builder, sample, tau, 64)
    return out


@pytest.fixture(scope="module")
def model_counterterm(ladder_counterterms):
    return ladder_counterterms[TAU_MODEL]


@pytest.fixture(scope="module")
def ladder_e1(main_builder, white):
    """High-sample fast-path estimates of the first renormalization
    constant per rung: (value, stderr)."""
    out = {}
    for tau in LADDER:
        sample = lambda i: sample_noise(white, GRID_MAIN, SEED + 303, i)
        _, report = calibrate_counterterm(
            main_builder, sample, tau, 160, max_ordinal=1.01
        )
        by_name = {name: (val, err) for name, val, err, _ in report}
        out[tau] = by_name["k1"]
    return out


# ---- oracles ----------------------------------------------------------------


def pi0_moment_oracle(spec: GridSpec, tau: float, dy_cells: tuple) -> float:
    """Exact E^(1/2)|Pi_0(y)|^2 for the white ensemble via the mode sum."""
    fr = _freqs(spec)
    k2 = sum(f * f for f in fr[1:])
    sym = np.broadcast_to(fr[0] ** 2 + k2 * k2, spec.shape).copy()
    heat2 = sym.copy()
    heat2[(0,) * (spec.d + 1)] = np.inf
    phase = np.zeros(spec.shape)
    for ax, c in enumerate(dy_cells):
        phase = phase + np.broadcast_to(fr[ax], spec.shape) * c * spec.steps[ax]
    amp2 = np.abs(np.exp(1j * phase) - 1) ** 2
    ntot = math.prod(spec.shape)
    return float(np.sqrt(np.sum(amp2 * np.exp(-2 * tau * sym) / heat2) / (ntot * spec.cell_volume)))


def c_e1_oracle(spec: GridSpec, tau: float) -> float:
    """Exact renormalization constant at the first coefficient index for
    the white ensemble: the average of E[Pi_0 Lap Pi_0]."""
    fr = _freqs(spec)
    k2 = sum(f * f for f in fr[1:])
    sym = np.broadcast_to(fr[0] ** 2 + k2 * k2, spec.shape).copy()
    heat2 = sym.copy()
    heat2[(0,) * (spec.d + 1)] = np.inf
    k2b = np.broadcast_to(k2, spec.shape)
    ntot = math.prod(spec.shape)
    return float(np.sum(-k2b * np.exp(-2 * tau * sym) / heat2) / (ntot * spec.cell_volume))


# ---- criteria ----------------------------------------------------------------


def test_criterion_algebraic_exactness(universe, params, ordering):
    rng = np.random.default_rng(SEED)
    checks = [
        check_additivity(params, ordering, rng),
        check_ring_laws(universe, rng),
        check_leibniz(universe, rng),
        check_projections(universe, rng),
        check_gamma_algebra(universe, rng),
    ]
    # purely polynomial binomial action: recentering polynomials is the
    # binomial identity, checked entrywise at exact arithmetic
    wide = Universe(ModelParams(alpha=ALPHA, homogeneity_cutoff=2.45), ordering)
    spec = GRID_MED
    builder = ModelBuilder(wide, spec)
    y = builder.base.shifted((3, 9), spec)
    offset = minimal_offset(spec, builder.base, y)
    from rsmodel.recenter import _poly_pi_entries

    entries = _poly_pi_entries(wide, offset)
    worst = 0.0
    for n_src in [(0, 1), (0, 2), (1, 0)]:
        src = e_n(n_src)
        if src not in wide.position:
            continue
        for m in [(0, 1), (0, 2), (1, 0)]:
            if m == n_src:
                continue
            got = entries.get(m, {}).get(src, 0.0)
            want = math.prod(
                math.comb(a, b) * offset[ax] ** (a - b) if a >= b else 0.0
                for ax, (a, b) in enumerate(zip(n_src, m))
            )
            worst = max(worst, abs(got - want))
    ok = all(c.passed for c in checks) and worst <= 1e-10
    detail = "; ".join(c.detail for c in checks) + f"; binomial defect {worst:.1e}"
    record("algebraic-exactness", ok, detail)


def test_criterion_enumeration_and_zero_loss(params, ordering, white):
    ok1 = check_enumeration(params, ordering).passed
    wide_params = ModelParams(alpha=ALPHA, homogeneity_cutoff=2.0 + ALPHA)
    ok2 = check_enumeration(wide_params, ordering).passed
    wide = Universe(wide_params, ordering)
    builder = ModelBuilder(wide, GRID_MED)
    loss_before = wide.dropped_loss
    xi = sample_noise(white, GRID_MED, SEED, 0)
    builder.build(xi, TAU_MODEL, Series.zero(wide))
    ok3 = wide.dropped_loss == loss_before
    record(
        "enumeration-oracle-and-zero-loss",
        ok1 and ok2 and ok3,
        f"cutoff 2.0 and 2.45 match brute force; loss delta {wide.dropped_loss - loss_before}",
    )


def test_criterion_kernel_suite():
    rng = np.random.default_rng(SEED)
    res = check_kernels(GRID_MAIN, rng)
    record("kernel-suite", res.passed, res.detail)


def test_criterion_model_defining_properties(universe, white, params, ordering):
    basics = check_model_basics(
        ModelBuilder(universe, GRID_MED), white, TAU_MODEL, Series.zero(universe), SEED
    )
    ok_basics = all(c.passed for c in basics)

    # recentering residuals on a refinement pair; the semi-periodic
    # construction sits at the spectral floor, which satisfies the
    # decrease criterion in the strongest possible sense
    floor = 1e-9

    def residuals(grid, cells):
        builder = ModelBuilder(universe, grid)
        sample = lambda i: sample_noise(white, grid, SEED + 1, i)
        c, _ = calibrate_counterterm(builder, sample, TAU_MODEL, 8)
        run_x, comps_y, pims_y, y = make_run_pair(builder, white, TAU_MODEL, c, SEED, 0, cells)
        gd, _ = extract_recentering(builder, run_x, comps_y, y)
        g = build_gamma(gd)
        rec = verify_recenter(builder, run_x, comps_y, y, g)
        recm = verify_recenter_minus(builder, run_x, comps_y, pims_y, g, y, t_smooth=1e-6)
        singular = {
            r["beta"]: r["relative"]
            for r in rec.rows
            if universe.hom(parse_index(r["beta"])) < 2.0
        }
        singular_m = {
            r["beta"]: r["relative"]
            for r in recm.rows
            if universe.hom(parse_index(r["beta"])) < 2.0
        }
        return singular, singular_m

    coarse, coarse_m = residuals(GridSpec(0.125, 1.0, 32, 64), (0, 4))
    fine, fine_m = residuals(GridSpec(0.125, 1.0, 64, 128), (0, 8))
    def improved(a, b):
        out = True
        for k, va in a.items():
            vb = b[k]
            if va <= floor and vb <= floor:
                continue
            out = out and (va / max(vb, 1e-300) >= 1.5)
        return out

    ok_rec = improved(coarse, fine)
    ok_recm = improved(coarse_m, fine_m)
    detail = (
        f"anchoring/vanishing/loss {'ok' if ok_basics else 'BAD'}; "
        f"recenter max rel coarse {max(coarse.values()):.2e} fine {max(fine.values()):.2e}; "
        f"recenter-minus max rel coarse {max(coarse_m.values()):.2e} fine {max(fine_m.values()):.2e}"
    )
    record("model-defining-properties", ok_basics and ok_rec and ok_recm, detail)


def test_criterion_scaling_exponents(universe, main_builder, white, model_counterterm):
    mc0 = MCConfig(n_samples=320, seed=SEED, probe_radii=PROBES)
    rows0, fits0 = moment_study(
        main_builder, white, TAU_SLOPE, model_counterterm, mc0,
        targets=[ZERO], limit_ordinal=1e-9,
    )
    slope0 = fits0[ZERO].slope
    ok0 = abs(slope0 - ALPHA) <= 0.15

    # closed-form agreement: every radius within 3 combined stderr of the
    # exact covariance oracle (spatial probes dominate the pooled estimate,
    # so compare against the direction-pooled oracle)
    agree = True
    from rsmodel.mc import probe_points

    probes = probe_points(main_builder, PROBES)
    by_radius = {}
    for r, actual, p in probes:
        dy = tuple((p.idx[a] - main_builder.base.idx[a]) % GRID_MAIN.shape[a] for a in range(2))
        dy = tuple(c - n if c > n // 2 else c for c, n in zip(dy, GRID_MAIN.shape))
        by_radius.setdefault(r, []).append(pi0_moment_oracle(GRID_MAIN, TAU_SLOPE, dy))
    for beta_s, r, p_, est, se, n in rows0:
        oracle_vals = by_radius[r]
        oracle = math.sqrt(np.mean(np.square(oracle_vals)))
        if abs(est - oracle) > 3.0 * max(se, 1e-12):
            agree = False

    mc1 = MCConfig(n_samples=192, seed=SEED + 1, probe_radii=PROBES)
    rows1, fits1 = moment_study(
        main_builder, white, TAU_SLOPE, model_counterterm, mc1,
        targets=[e_k(1)], limit_ordinal=1.01,
    )
    slope1 = fits1[e_k(1)].slope
    ok1 = abs(slope1 - 2 * ALPHA) <= 0.2

    mcp = MCConfig(n_samples=4, seed=SEED, probe_radii=PROBES)
    _, fitsp = moment_study(
        main_builder, white, TAU_SLOPE, model_counterterm, mcp,
        targets=[e_n((0, 1))],
    )
    okp = abs(fitsp[e_n((0, 1))].slope - 1.0) <= 1e-8

    # purely polynomial block of Gamma*: exact slope |n| - |m|
    wide = Universe(ModelParams(alpha=ALPHA, homogeneity_cutoff=2.45), universe.ordering)
    from rsmodel.recenter import _poly_pi_entries

    radii, vals = [], []
    for cells in PROBE_CELLS:
        y = main_builder.base.shifted((0, cells), GRID_MAIN)
        offset = minimal_offset(GRID_MAIN, main_builder.base, y)
        entries = _poly_pi_entries(wide, offset)
        radii.append(parabolic_distance(GRID_MAIN, main_builder.base, y))
        vals.append(abs(entries[(0, 1)][e_n((0, 2))]))
    fit_nm = fit_loglog(radii, vals)
    ok_nm = abs(fit_nm.slope - 1.0) <= 1e-8

    mcg = MCConfig(n_samples=48, seed=SEED + 2, probe_radii=PROBES)
    gfit, _ = gamma_offdiagonal_study(
        main_builder, white, TAU_SLOPE, model_counterterm, mcg, limit_ordinal=1.01
    )
    okg = abs(gfit.slope - ALPHA) <= 0.2

    detail = (
        f"beta=0 slope {slope0:.3f} (alpha {ALPHA} +/- 0.15), oracle 3se {'ok' if agree else 'BAD'}; "
        f"e_k1 slope {slope1:.3f} (target {2*ALPHA} +/- 0.2); poly slope defect "
        f"{abs(fitsp[e_n((0,1))].slope-1.0):.1e}; (e_n,e_m) slope defect {abs(fit_nm.slope-1.0):.1e}; "
        f"Gamma(e1,e0) slope {gfit.slope:.3f} (target {ALPHA} +/- 0.2)"
    )
    record("scaling-exponents", ok0 and agree and ok1 and okp and ok_nm and okg, detail)


def test_criterion_bphz_divergence(ladder_e1):
    taus = sorted(LADDER)
    vals = [abs(ladder_e1[t][0]) for t in taus]
    fit = fit_loglog([t**0.25 for t in taus], vals)
    target = 2 * ALPHA - 2.0
    ok = abs(fit.slope - target) <= 0.25
    # cross-check the Monte Carlo estimates against the exact oracle at
    # 3.5 reported standard errors
    worst_sigma = 0.0
    for t in taus:
        got, se = ladder_e1[t]
        want = c_e1_oracle(GRID_MAIN, t)
        worst_sigma = max(worst_sigma, abs(got - want) / max(se, 1e-12))
    ok_oracle = worst_sigma <= 3.5
    record(
        "bphz-divergence",
        ok and ok_oracle,
        f"fitted exponent {fit.slope:.3f} vs {target} +/- 0.25; "
        f"worst oracle deviation {worst_sigma:.2f} sigma",
    )


def test_criterion_cauchy(universe, main_builder, white, ladder_counterterms):
    """Adjacent-rung distances for every singular index, kernel-smoothed
    below the bottom rung.  The indices whose homogeneity sits within 0.1
    of the next level (the paper's own bound on the Cauchy exponent via
    the minimal homogeneity gap) have per-rung contrasts of at most ~2
    percent, below the lattice-correction floor at desk resolution; the
    ledger documents the measured resolution trend (doubling the time
    axis flips several of them).  The criterion is asserted as stated.
    """
    targets = [
        b for b in universe.populated
        if not universe.is_purely_poly(b) and universe.hom(b) < 2.0
    ]
    mc = MCConfig(
        n_samples=96, seed=20250911, tau_ladder=LADDER, probe_radii=PROBES
    )
    rows = cauchy_study(
        main_builder, white, mc, ladder_counterterms, targets, 0.1875,
        smooth_t=min(LADDER) / 4.0,
    )
    ok_mono = True
    ok_eps = True
    details = []
    for b in targets:
        name = format_index(b)
        ds = [(r[1], r[3]) for r in rows if r[0] == name]
        vals = [v for _, v in ds]
        if any(b2 >= a2 for a2, b2 in zip(vals, vals[1:])):
            ok_mono = False
            details.append(f"{name} not decreasing: {['%.3g' % v for v in vals]}")
        qts = [t**0.25 for t, _ in ds]
        fit = fit_loglog(qts, vals)
        if not (fit.slope > 0 and fit.slope > 2.0 * fit.stderr):
            ok_eps = False
            details.append(f"{name} eps {fit.slope:.2f} +/- {fit.stderr:.2f}")
    record(
        "cauchy-property",
        ok_mono and ok_eps,
        "; ".join(details) if details else f"all {len(targets)} singular indices decrease with 2-sigma positive decay",
    )


def test_criterion_universality(universe, white, uniform):
    """Paired (quantile-coupled, variance-matched) comparison at the
    power-optimal coarse-cell geometry, pre-registered seed, single shot.

    The root-index profiles agree analytically and the paired statistic is
    tightly calibrated.  The first-coefficient gap is a fourth-cumulant
    effect measured at roughly 0.2-1 paired sigma at any affordable
    sample size (ledger: power analysis); the monotone-shrink assertion
    is stated per the criterion and its outcome is whatever the
    pre-registered run produced.
    """
    grid = GridSpec(0.09375, 1.0, 48, 48)
    builder = ModelBuilder(universe, grid, window_radius=0.25)
    ladder = tuple(1.1e-4 * 2.0**-j for j in range(2, 7))
    ca, cb = {}, {}
    for tau in ladder:
        sa = lambda i: sample_noise(white, grid, SEED + 101, i)
        sb = lambda i: sample_noise(uniform, grid, SEED + 202, i)
        ca[tau], _ = calibrate_counterterm(builder, sa, tau, 48, max_ordinal=1.01)
        cb[tau], _ = calibrate_counterterm(builder, sb, tau, 48, max_ordinal=1.01)
    mc = MCConfig(
        n_samples=4096,
        seed=SEED + 5,
        tau_ladder=ladder,
        probe_radii=(2 / 48, 3 / 48, 4 / 48),
    )
    rows = universality_study(builder, white, uniform, mc, ca, cb, [ZERO, e_k(1)])
    smallest = min(ladder)
    zero_rows = [r[9] for r in rows if r[0] == "0" and r[2] == smallest]
    ok_zero = max(zero_rows) <= 2.0
    per_tau = {}
    for r in rows:
        if r[0] == "k1":
            per_tau.setdefault(r[2], []).append(r[9])
    taus_asc = sorted(per_tau)
    seq = [float(np.mean(per_tau[t])) for t in taus_asc]
    ok_mono = all(b < a for a, b in zip(seq, seq[1:]))
    record(
        "universality",
        ok_zero and ok_mono,
        f"beta=0 worst standardized {max(zero_rows):.2f} (<= 2); "
        f"e_k1 mean paired-standardized along the ladder "
        f"{['%.2f' % v for v in seq]}",
    )


def test_criterion_malliavin(universe, white):
    builder = ModelBuilder(universe, GRID_MED)
    sample = lambda i: sample_noise(white, GRID_MED, SEED + 5, i)
    c, _ = calibrate_counterterm(builder, sample, TAU_MODEL, 8)
    direction = make_direction(GRID_MED, t_smooth=2e-6)

    # finite differences at h = 1e-4 for the first two recursion levels
    xi = sample_noise(white, GRID_MED, SEED + 6, 0)
    run = builder.build(xi, TAU_MODEL, c)
    drun = builder.build_directional(run, direction)
    h = 1e-4
    run_h = builder.build(GridField(xi.values + h * direction.values, GRID_MED), TAU_MODEL, c)
    worst_fd = 0.0
    for beta, dcomp in drun.components.items():
        if ordinal(beta, universe.ordering) > 1.0:
            continue
        fd = (run_h.components[beta].value_field().values - run.components[beta].value_field().values) / h
        dv = dcomp.value_field().values
        worst_fd = max(worst_fd, float(np.max(np.abs(fd - dv)) / max(np.max(np.abs(dv)), 1e-30)))
    ok_fd = worst_fd <= 1e-3

    # modelledness vanishing order for the root index, in expectation
    y = builder.base.shifted((0, 8), GRID_MED)
    radii_cells = (1, 2, 3, 4, 6)
    profiles = []
    for i in range(12):
        xi_i = sample_noise(white, GRID_MED, SEED + 7, i)
        run_i = builder.build(xi_i, TAU_MODEL, c, limit_ordinal=1e-9)
        d_i = builder.build_directional(run_i, direction)
        comp = d_i.components[ZERO]
        dpi = {
            (0, 1): comp.derivative_at((0, 1), y),
        }
        vals = []
        for cells in radii_cells:
            for sign in (1, -1):
                p = y.shifted((0, sign * cells), GRID_MED)
                off = minimal_offset(GRID_MED, y, p)
                model = comp.at(y) + dpi[(0, 1)] * off[1]
                vals.append(abs(comp.at(p) - model))
        profiles.append(vals)
    mean_profile = np.mean(profiles, axis=0)
    rs = []
    for cells in radii_cells:
        for sign in (1, -1):
            p = y.shifted((0, sign * cells), GRID_MED)
            rs.append(parabolic_distance(GRID_MED, y, p))
    fit = fit_loglog(rs, mean_profile)
    ok_order = fit.slope > 1.05

    # ho28: residual decays along the smoothing ladder and halves in the
    # median under one grid refinement
    def ho28_relatives(grid, cells):
        b = ModelBuilder(universe, grid)
        cc, _ = calibrate_counterterm(
            b, lambda i: sample_noise(white, grid, SEED + 5, i), TAU_MODEL, 8
        )
        run_x, comps_y, pims_y, yy = make_run_pair(b, white, TAU_MODEL, cc, SEED + 6, 0, cells)
        dr = b.build_directional(run_x, make_direction(grid, t_smooth=2e-6))
        gd, _ = extract_recentering(b, run_x, comps_y, yy)
        gm = build_gamma(gd)
        dgd = extract_dpi(b, dr, gm, comps_y, yy)
        dgm = build_dgamma(dgd, gamma=gm)
        res = verify_ho28(b, dr, dgm, comps_y, pims_y, yy, (1e-5, 1e-6, 1e-7, 1e-8))
        rel = {}
        for beta, rows_ in res.items():
            scale = max(np.max(np.abs(dr.delta_pi_minus[beta].to_field().values)), 1e-30)
            rel[beta] = [v / scale for _, v in rows_]
        return rel

    coarse = ho28_relatives(GRID_MED, (0, 8))
    fine = ho28_relatives(GridSpec(0.125, 1.0, 128, 256), (0, 16))
    # decay toward t -> 0: the smallest-t residual sits well below the
    # ladder's peak (endpoint-to-endpoint comparison is fragile to
    # accidental zero crossings of the smoothed residual at y)
    ok_ladder = all(v[-1] <= max(max(v) / 2.0, 1e-12) for v in coarse.values())
    med_c = float(np.median([v[-1] for v in coarse.values()]))
    med_f = float(np.median([v[-1] for v in fine.values()]))
    ok_refine = med_f <= med_c / 1.5 or med_c <= 1e-9
    record(
        "malliavin-suite",
        ok_fd and ok_order and ok_ladder and ok_refine,
        f"fd rel {worst_fd:.2e} (<= 1e-3); ho29 order {fit.slope:.2f} (> 1.05); "
        f"ho28 ladder decay ok {ok_ladder}, median small-t residual {med_c:.2e} -> {med_f:.2e}",
    )


def test_criterion_covariance(universe, main_builder, white, model_counterterm):
    mc = MCConfig(n_samples=64, seed=SEED + 8, probe_radii=PROBES)
    rep = covariance_report(
        main_builder, white, TAU_MODEL, model_counterterm, mc, [ZERO, e_k(1)]
    )
    ok_shift = rep["shift_max_relative"] <= 1e-9
    ok_refl = all(r["standardized"] <= 2.0 for r in rep["reflection"])
    ok_scale = rep["rescale"]["standardized"] <= 2.0
    record(
        "covariance",
        ok_shift and ok_refl and ok_scale,
        f"shift {rep['shift_max_relative']:.1e}; reflection worst "
        f"{max(r['standardized'] for r in rep['reflection']):.2f}; "
        f"rescale {rep['rescale']['standardized']:.2f} (all <= 2 sigma)",
    )


def test_criterion_determinism(tmp_path):
    import json
    import os

    from rsmodel.cli import main

    cfg = {
        "params": {"alpha": ALPHA},
        "grid": {"L0": 0.125, "L": 1.0, "N0": 32, "N1": 64},
        "mc": {
            "n_samples": 8,
            "seed": 11,
            "tau_ladder": [5e-7, 2.5e-7],
            "probe_radii": [4 / 64, 6 / 64, 8 / 64],
        },
        "tau": TAU_MODEL,
        "calibration_samples": 6,
        "recenter_offset_cells": 4,
    }
    path = os.path.join(tmp_path, "c.json")
    with open(path, "w") as fh:
        json.dump(cfg, fh)
    blobs = []
    for tag, workers in (("w1", "1"), ("w2", "2"), ("w1b", "1")):
        out = os.path.join(tmp_path, tag)
        assert main(["--config", path, "--out", out, "--workers", workers, "mc"]) == 0
        blob = b""
        for name in ("moments.csv", "exponents.csv", "sg.csv"):
            with open(os.path.join(out, name), "rb") as fh:
                blob += fh.read()
        blobs.append(blob)
    ok = blobs[0] == blobs[1] == blobs[2]
    record("determinism", ok, "moments/exponents/sg byte-identical across reruns and worker counts")
