"""Executable checks of the defining properties.

Each check returns a CheckResult with a `hard` flag: algebraic identities
and determinism contracts are hard (any failure is a defect); statistical
and discretization-limited criteria are soft and reported with their
margins.  The CLI's verify command runs the battery; the acceptance test
suite reuses the same functions at the documented tolerances.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .ensembles import EnsembleSpec, mollify, sample_noise
from .fields import (
    GridField,
    GridPoint,
    GridSpec,
    heat_apply,
    heat_solve,
    laplacian,
    moment_bound_probe,
    partial_derivative,
    psi_kernel,
    semigroup_convolve,
    sobolev_norm,
)
from .gamma import (
    DerivativeGammaData,
    GammaData,
    build_dgamma,
    build_gamma,
    check_triangular,
    exponential_gamma,
    identity_gamma,
)
from .indices import (
    ModelParams,
    MultiIndex,
    OrderingParams,
    ZERO,
    coefficient_weight,
    e_k,
    e_n,
    enumerate_populated,
    format_index,
    homogeneity,
    is_populated,
    noise_homogeneity,
    ordinal,
)
from .model import ModelBuilder, ModelRun, calibrate_counterterm, rebased_components
from .recenter import extract_recentering, verify_recenter
from .series import Series, Universe

__all__ = [
    "CheckResult",
    "random_series",
    "synthetic_gamma_data",
    "brute_force_populated",
    "check_ring_laws",
    "check_leibniz",
    "check_projections",
    "check_additivity",
    "check_enumeration",
    "check_gamma_algebra",
    "check_kernels",
    "shifted_noise",
    "make_run_pair",
    "check_model_basics",
    "check_recentering_refinement",
]

TOL_ALGEBRA = 1e-10
TOL_SEMIGROUP = 1e-12
TOL_SCALING = 1e-8
TOL_ROUNDTRIP = 1e-10


@dataclass
class CheckResult:
    name: str
    passed: bool
    hard: bool
    detail: str

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] {self.name}: {self.detail}"


# --- randomized algebra inputs -------------------------------------------------


def random_series(universe: Universe, rng: np.random.Generator, density: float = 0.6) -> Series:
    coeffs = {}
    for b in universe.populated:
        if rng.random() < density:
            coeffs[b] = float(rng.standard_normal())
    return Series(universe, coeffs)


def synthetic_gamma_data(universe: Universe, rng: np.random.Generator) -> GammaData:
    """Random generator data honoring the support restrictions."""
    from .fields import parabolic_distance  # noqa: F401  (kept for symmetry)

    base = {}
    for b in universe.populated:
        if universe.is_purely_poly(b):
            continue
        base[b] = float(rng.standard_normal())
    pi_n = {}
    keys = sorted({n for b in universe.indices for n, _ in b.poly_items()})
    from .indices import parabolic_degree

    for n in keys:
        entries = {}
        for b in universe.populated:
            if parabolic_degree(n) < universe.hom(b) and rng.random() < 0.7:
                entries[b] = float(rng.standard_normal())
        if entries:
            pi_n[n] = Series(universe, entries)
    return GammaData(universe, pi_n, Series(universe, base))


# --- index algebra ---------------------------------------------------------------


def brute_force_populated(params: ModelParams, op: OrderingParams) -> list:
    """Independent enumeration oracle: exhaustive scan over bounded
    supports (keys k <= 8, |n| <= 4, exponent sum <= 8), filtered by the
    populated predicate, the cutoff, and the weight budget."""
    import itertools

    from .indices import Poly, parabolic_degree

    coeff_keys = list(range(9))
    poly_keys = []
    for n0 in range(3):
        for sp in itertools.product(range(5), repeat=params.d):
            n = (n0,) + sp
            if any(n) and parabolic_degree(n) <= 4:
                poly_keys.append(n)
    found = []

    def rec(beta: MultiIndex, remaining_keys: list, budget_left: int):
        if is_populated(beta) and homogeneity(beta, params) < params.homogeneity_cutoff:
            if coefficient_weight(beta) <= params.weight_budget:
                found.append(beta)
        if not remaining_keys or budget_left == 0:
            return
        key, *rest = remaining_keys
        rec(beta, rest, budget_left)
        cand = beta
        for e in range(1, budget_left + 1):
            cand = cand + key
            if homogeneity(cand, params) >= params.homogeneity_cutoff + 5:
                break
            if coefficient_weight(cand) > params.weight_budget:
                break
            rec(cand, rest, budget_left - e)

    generators = [e_k(k) for k in coeff_keys] + [e_n(n) for n in poly_keys]
    rec(ZERO, generators, 8)
    uniq = sorted(set(found), key=lambda b: (ordinal(b, op), b.exponents))
    return uniq


def check_enumeration(params: ModelParams, op: OrderingParams) -> CheckResult:
    fast = enumerate_populated(params, op)
    slow = brute_force_populated(params, op)
    ok = fast == slow
    return CheckResult(
        "enumeration-oracle",
        ok,
        hard=True,
        detail=f"closure size {len(fast)}, brute force size {len(slow)}",
    )


def check_additivity(params: ModelParams, op: OrderingParams, rng) -> CheckResult:
    uni = Universe(params, op)
    pop = list(uni.populated)
    worst = 0.0
    for _ in range(200):
        a = pop[rng.integers(len(pop))]
        b = pop[rng.integers(len(pop))]
        s = a + b
        worst = max(
            worst,
            abs(
                homogeneity(s, params)
                - (homogeneity(a, params) + homogeneity(b, params) - params.alpha)
            ),
            abs(noise_homogeneity(s) - noise_homogeneity(a) - noise_homogeneity(b)),
            abs(ordinal(s, op) - ordinal(a, op) - ordinal(b, op)),
        )
    lower = min(homogeneity(b, params) for b in pop)
    ok = worst <= TOL_ALGEBRA and lower >= min(params.alpha, 1.0) - TOL_ALGEBRA
    return CheckResult(
        "additivity-and-lower-bound", ok, hard=True, detail=f"max defect {worst:.2e}"
    )


# --- series algebra ---------------------------------------------------------------


def _series_close(a: Series, b: Series, tol: float) -> float:
    keys = set(a.coeffs) | set(b.coeffs)
    worst = 0.0
    for k in keys:
        va, vb = a.coeffs.get(k, 0.0), b.coeffs.get(k, 0.0)
        scale = max(abs(va), abs(vb), 1.0)
        worst = max(worst, abs(va - vb) / scale)
    return worst


def check_ring_laws(universe: Universe, rng) -> CheckResult:
    worst = 0.0
    for _ in range(10):
        s1 = random_series(universe, rng)
        s2 = random_series(universe, rng)
        s3 = random_series(universe, rng)
        worst = max(worst, _series_close(s1 * s2, s2 * s1, 0))
        worst = max(worst, _series_close((s1 * s2) * s3, s1 * (s2 * s3), 0))
        worst = max(
            worst, _series_close(s1 * (s2 + s3), s1 * s2 + s1 * s3, 0)
        )
        worst = max(worst, _series_close(Series.one(universe) * s1, s1, 0))
    ok = worst <= TOL_ALGEBRA
    return CheckResult("series-ring-laws", ok, hard=True, detail=f"max defect {worst:.2e}")


def check_leibniz(universe: Universe, rng) -> CheckResult:
    """Both derivations obey the product rule; asserted on the declared
    universe (the transient layer keeps the identity exact there)."""
    worst = 0.0
    keys = sorted({n for b in universe.indices for n, _ in b.poly_items()})
    for _ in range(10):
        s1 = random_series(universe, rng)
        s2 = random_series(universe, rng)
        lhs = (s1 * s2).derive_D0().project_universe()
        rhs = (s1.derive_D0() * s2 + s1 * s2.derive_D0()).project_universe()
        worst = max(worst, _series_close(lhs, rhs, 0))
        for n in keys[:2]:
            lhs = (s1 * s2).derive_Dn(n).project_universe()
            rhs = (s1.derive_Dn(n) * s2 + s1 * s2.derive_Dn(n)).project_universe()
            worst = max(worst, _series_close(lhs, rhs, 0))
    ok = worst <= TOL_ALGEBRA
    return CheckResult("derivation-leibniz", ok, hard=True, detail=f"max defect {worst:.2e}")


def check_projections(universe: Universe, rng) -> CheckResult:
    worst = 0.0
    for _ in range(10):
        s = random_series(universe, rng)
        worst = max(worst, _series_close(s.project_P().project_P(), s.project_P(), 0))
        worst = max(worst, _series_close(s.project_Q().project_Q(), s.project_Q(), 0))
        worst = max(
            worst,
            _series_close(s.project_P().project_Q(), s.project_Q().project_P(), 0),
        )
    ok = worst <= TOL_ALGEBRA
    return CheckResult("projection-laws", ok, hard=True, detail=f"max defect {worst:.2e}")


# --- structure group ---------------------------------------------------------------


def check_gamma_algebra(universe: Universe, rng) -> CheckResult:
    gd = synthetic_gamma_data(universe, rng)
    gd.validate()
    g = build_gamma(gd)
    problems = check_triangular(g)
    # multiplicativity on random monomial pairs whose product stays populated
    worst = 0.0
    pop = list(universe.populated)
    for _ in range(40):
        a = pop[rng.integers(len(pop))]
        b = pop[rng.integers(len(pop))]
        ab = a + b
        if ab not in universe.position:
            continue
        lhs = Series(universe, {beta: g.entry(beta, ab) for beta in universe.populated})
        ga = Series(universe, {beta: g.entry(beta, a) for beta in universe.populated})
        gb = Series(universe, {beta: g.entry(beta, b) for beta in universe.populated})
        worst = max(worst, _series_close(lhs, (ga * gb).project_universe(), 0))
    # independent oracle: normal-ordered exponential formula
    g2 = exponential_gamma(gd)
    expworst = 0.0
    for beta in universe.populated:
        for gcol in universe.populated:
            va, vb = g.entry(beta, gcol), g2.entry(beta, gcol)
            expworst = max(expworst, abs(va - vb) / max(abs(va), abs(vb), 1.0))
    # purely polynomial rows touch only purely polynomial columns
    tbar_ok = all(
        universe.is_purely_poly(gcol)
        for beta in universe.populated
        if universe.is_purely_poly(beta)
        for gcol, v in g.rows.get(beta, {}).items()
        if v != 0.0
    )
    # twisted Leibniz for the derivative companion on random data
    dpi = {}
    zero_n = (0,) * (universe.params.d + 1)
    for n in [zero_n] + [
        tuple(1 if a == ax else 0 for a in range(universe.params.d + 1))
        for ax in range(1, universe.params.d + 1)
    ]:
        entries = {}
        for b in universe.populated:
            if universe.hom(b) < 2.0 and not universe.is_purely_poly(b):
                if rng.random() < 0.7:
                    entries[b] = float(rng.standard_normal())
        dpi[n] = Series(universe, entries)
    dg = build_dgamma(DerivativeGammaData(universe, dpi, gd), gamma=g)
    twworst = 0.0
    for _ in range(20):
        a = pop[rng.integers(len(pop))]
        b = pop[rng.integers(len(pop))]
        ab = a + b
        if ab not in universe.position:
            continue
        lhs = Series(universe, {beta: dg.entry(beta, ab) for beta in universe.populated})
        ga = Series(universe, {beta: g.entry(beta, a) for beta in universe.populated})
        gb = Series(universe, {beta: g.entry(beta, b) for beta in universe.populated})
        da = Series(universe, {beta: dg.entry(beta, a) for beta in universe.populated})
        db = Series(universe, {beta: dg.entry(beta, b) for beta in universe.populated})
        twworst = max(
            twworst, _series_close(lhs, (da * gb + ga * db).project_universe(), 0)
        )
    dgamma_tilde = all(
        not universe.is_purely_poly(beta)
        for beta in dg.rows
        for v in dg.rows[beta].values()
        if v != 0.0
    )
    ok = (
        not problems
        and worst <= TOL_ALGEBRA
        and expworst <= TOL_ALGEBRA
        and tbar_ok
        and twworst <= TOL_ALGEBRA
        and dgamma_tilde
    )
    detail = (
        f"mult defect {worst:.2e}, exp-formula defect {expworst:.2e}, "
        f"twisted-Leibniz defect {twworst:.2e}, {len(problems)} triangularity violations"
    )
    return CheckResult("gamma-algebra", ok, hard=True, detail=detail)


# --- kernels -----------------------------------------------------------------------


def check_kernels(grid: GridSpec, rng) -> CheckResult:
    f = GridField(rng.standard_normal(grid.shape), grid)
    # semigroup property
    a = semigroup_convolve(semigroup_convolve(f, 0.01), 0.02)
    b = semigroup_convolve(f, 0.03)
    semi = float(np.max(np.abs(a.values - b.values)) / max(b.max_abs(), 1e-30))
    # scaling identity
    t = 0.0004
    lam = t**0.25
    grid2 = grid.rescale(1.0 / lam)
    psi_t = psi_kernel(grid, t)
    psi_1 = psi_kernel(grid2, 1.0)
    scaled = psi_1.values * lam ** -(grid.d + 2)
    scal = float(np.max(np.abs(psi_t.values - scaled)) / max(np.max(np.abs(scaled)), 1e-30))
    # heat round trip
    g = heat_apply(heat_solve(f))
    target = f.values - f.mean()
    rt = float(np.max(np.abs(g.values - target)) / max(np.max(np.abs(target)), 1e-30))
    # moment bound sweep: six octaves of t inside the torus scaling regime
    x = grid.center()
    y = x.shifted((0,) + (grid.N1 // 8,) * grid.d, grid)
    t_top = (grid.L / 4.0) ** 4
    ratios = []
    mass_ratios = []
    for j in range(7):
        tt = t_top * 2.0 ** (-j)
        zero_n = (0,) * (grid.d + 1)
        mass_ratios.append(moment_bound_probe(grid, tt, x, y, 0.0, zero_n))
        for n, theta in (((0, 1), 0.45), ((1, 0), -1.0)):
            ratios.append(moment_bound_probe(grid, tt, x, y, theta, n))
    bounded = max(ratios) < 50.0 and all(1.0 <= r < 10.0 for r in mass_ratios)
    ok = semi <= TOL_SEMIGROUP and scal <= TOL_SCALING and rt <= TOL_ROUNDTRIP and bounded
    detail = (
        f"semigroup {semi:.2e}, scaling {scal:.2e}, roundtrip {rt:.2e}, "
        f"moment-ratio max {max(ratios):.2f}, mass range "
        f"[{min(mass_ratios):.2f}, {max(mass_ratios):.2f}]"
    )
    return CheckResult("kernel-suite", ok, hard=True, detail=detail)


# --- model-level helpers -------------------------------------------------------------


def shifted_noise(xi: GridField, cells: tuple) -> GridField:
    return GridField(
        np.roll(xi.values, [-c for c in cells], tuple(range(xi.spec.d + 1))), xi.spec
    )


def make_run_pair(
    builder: ModelBuilder,
    espec: EnsembleSpec,
    tau: float,
    counterterm: Series,
    seed: int,
    sample_id: int,
    offset_cells: tuple,
):
    """A run at the base point plus the rebased view at base + offset,
    sharing one noise sample."""
    xi = sample_noise(espec, builder.grid, seed, sample_id)
    run_x = builder.build(xi, tau, counterterm, {"seed": seed, "sample": sample_id})
    y = builder.base.shifted(offset_cells, builder.grid)
    run_sh = builder.build(shifted_noise(xi, offset_cells), tau, counterterm)
    comps_y, pims_y = rebased_components(builder, run_sh, offset_cells, y)
    return run_x, comps_y, pims_y, y


def check_model_basics(
    builder: ModelBuilder,
    espec: EnsembleSpec,
    tau: float,
    counterterm: Series,
    seed: int = 0,
) -> list:
    """Anchoring, vanishing at the base point, and zero truncation loss
    for one sample."""
    uni = builder.universe
    xi = sample_noise(espec, builder.grid, seed, 0)
    loss_before = uni.dropped_loss
    run = builder.build(xi, tau, counterterm)
    results = []
    anchored = heat_apply(run.components[ZERO].value_field())
    target = run.xi_tau.values - run.xi_tau.mean()
    resid = float(np.max(np.abs(anchored.values - target)) / max(np.max(np.abs(target)), 1e-30))
    results.append(
        CheckResult("anchoring", resid <= 1e-9, hard=True, detail=f"relative {resid:.2e}")
    )
    worst = 0.0
    for b, comp in run.components.items():
        if uni.is_purely_poly(b):
            continue
        scale = max(comp.value_field().max_abs(), 1e-30)
        worst = max(worst, abs(comp.at(builder.base)) / scale)
    results.append(
        CheckResult(
            "vanishing-at-base", worst <= 1e-6, hard=True, detail=f"max relative {worst:.2e}"
        )
    )
    results.append(
        CheckResult(
            "zero-truncation-loss",
            uni.dropped_loss == loss_before,
            hard=True,
            detail=f"loss counter delta {uni.dropped_loss - loss_before}",
        )
    )
    return results


def check_recentering_refinement(
    params: ModelParams,
    ordering: OrderingParams,
    grid: GridSpec,
    espec: EnsembleSpec,
    tau: float,
    seed: int,
    offset_cells_coarse: tuple,
    calibration_samples: int = 8,
    factor: float = 1.5,
) -> CheckResult:
    """Recentering residuals must shrink by >= factor under one grid
    doubling, for every singular index."""
    uni = Universe(params, ordering)

    def residuals(g: GridSpec, cells: tuple) -> dict:
        builder = ModelBuilder(uni, g)
        sample = lambda i: sample_noise(espec, g, seed + 1, i)
        c, _ = calibrate_counterterm(builder, sample, tau, calibration_samples)
        run_x, comps_y, pims_y, y = make_run_pair(
            builder, espec, tau, c, seed, 0, cells
        )
        gd, _ = extract_recentering(builder, run_x, comps_y, y)
        g_mat = build_gamma(gd)
        rep = verify_recenter(builder, run_x, comps_y, y, g_mat)
        return {
            r["beta"]: r["relative"]
            for r in rep.rows
            if uni.hom(_parse(r["beta"])) < 2.0
        }

    coarse = residuals(grid, offset_cells_coarse)
    fine = residuals(grid.refine(2), tuple(2 * c for c in offset_cells_coarse))
    worst_ratio = float("inf")
    for b, rc in coarse.items():
        rf = fine[b]
        if rc <= 1e-12:
            continue
        worst_ratio = min(worst_ratio, rc / max(rf, 1e-300))
    ok = worst_ratio >= factor
    return CheckResult(
        "recentering-refinement",
        ok,
        hard=False,
        detail=f"min improvement factor {worst_ratio:.2f} (need >= {factor})",
    )


def _parse(text: str) -> MultiIndex:
    from .indices import parse_index

    return parse_index(text)
