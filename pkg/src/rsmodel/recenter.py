"""Extraction of re-expansion data from model runs and the verification
of the recentering identities.

The shift series pi^(n) between two base points are read off recursively
in the recursion order: at each index the residual of the partial
recentering identity is, up to the declared order of vanishing, a
polynomial at the second base point whose coefficients are the new
unknowns.  Residuals are assembled in the semi-periodic representation
(rebasing the monomial bookkeeping exactly), so derivative reads never
cross the periodic seam.
"""

from __future__ import annotations

import itertools
import math

import numpy as np

from .fields import (
    GridField,
    GridPoint,
    GridSpec,
    derivative_keys_below,
    displacement,
    parabolic_distance,
    semigroup_convolve,
)
from .gamma import DerivativeGammaData, GammaData, GammaMatrix, build_dgamma, build_gamma
from .indices import MultiIndex, ZERO, format_index, parabolic_degree
from .model import Component, ModelBuilder, ModelRun, DirectionalDerivativeRun, SemiField
from .series import Series, Universe

__all__ = [
    "RecenterReport",
    "extract_recentering",
    "extract_dpi",
    "verify_recenter",
    "verify_recenter_minus",
    "verify_ho28",
    "modelledness_profile",
    "minimal_offset",
]


def minimal_offset(spec: GridSpec, x: GridPoint, y: GridPoint) -> tuple:
    """Coordinate offset y - x with minimal periodic images."""
    st = spec.steps
    periods = (spec.L0,) + (spec.L,) * spec.d
    out = []
    for axis in range(spec.d + 1):
        delta = (y.idx[axis] - x.idx[axis]) * st[axis]
        delta -= periods[axis] * round(delta / periods[axis])
        out.append(delta)
    return tuple(out)


class RecenterReport:
    """Per-index residual records of a verification pass."""

    def __init__(self):
        self.rows: list = []

    def add(self, beta: MultiIndex, **kv) -> None:
        self.rows.append({"beta": format_index(beta), **kv})

    def by_beta(self) -> dict:
        return {r["beta"]: r for r in self.rows}

    def max_relative(self, key: str = "relative") -> float:
        return max((r[key] for r in self.rows if key in r), default=0.0)


def _binom_tuple(m: tuple, n: tuple) -> int:
    return math.prod(math.comb(a, b) for a, b in zip(m, n))


def _power(offset: tuple, n: tuple) -> float:
    return math.prod(d**o for d, o in zip(offset, n))


def _n_fact(n: tuple) -> int:
    return math.prod(math.factorial(v) for v in n)


def _sub_tuples(m: tuple):
    return itertools.product(*(range(v + 1) for v in m))


def _poly_pi_entries(universe: Universe, offset: tuple) -> dict:
    """pi^(n) on the purely polynomial rows: the binomial recentering
    coefficients binom(m, n) (y-x)^(m-n), exact."""
    out: dict = {}
    for beta in universe.populated:
        if not universe.is_purely_poly(beta):
            continue
        m = beta.poly_items()[0][0]
        for n in _sub_tuples(m):
            if n == m or not any(n):
                continue
            val = _binom_tuple(m, n) * _power(offset, tuple(a - b for a, b in zip(m, n)))
            if val != 0.0:
                out.setdefault(n, {})[beta] = val
    return out


def _residual_semi(
    builder: ModelBuilder,
    run_x: ModelRun,
    comps_y: dict,
    y: GridPoint,
    beta: MultiIndex,
    gamma: GammaMatrix,
    skip_poly_columns: bool,
) -> SemiField:
    """Pi_x,beta - Pi_x,beta(y) - (Gamma Pi_y)_beta, rebased to y."""
    uni = builder.universe
    resid = run_x.components[beta].semi.rebase(y)
    zero_m = (0,) * (builder.grid.d + 1)
    resid.add_slot(zero_m, np.full(builder.grid.shape, -run_x.components[beta].at(y)))
    for g, v in gamma.rows.get(beta, {}).items():
        if skip_poly_columns and uni.is_purely_poly(g):
            continue
        resid.add(comps_y[g].semi, -v)
    return resid


def _fit_probe_nodes(builder: ModelBuilder, y: GridPoint) -> list:
    spec = builder.grid
    out = []
    for cells in (1, 2, 3):
        for axis in range(spec.d + 1):
            for sign in (+1, -1):
                step = [0] * (spec.d + 1)
                step[axis] = sign * cells
                p = y.shifted(tuple(step), spec)
                if parabolic_distance(spec, builder.base, p) <= builder.window_radius:
                    out.append(p)
    return out


def extract_recentering(
    builder: ModelBuilder,
    run_x: ModelRun,
    comps_y: dict,
    y: GridPoint,
    fit_tolerance: float = np.inf,
    max_ordinal: float | None = None,
) -> tuple:
    """Read off the shift series pi^(n) between run_x's base and y.

    comps_y is the y-based component view (from `rebased_components`).
    Returns (GammaData, fit report rows).  Raises if a residual fails to
    vanish to the expected order within fit_tolerance (discretization
    trouble or an inadequate separation |y - x|).
    """
    uni = builder.universe
    x = run_x.base
    offset = minimal_offset(builder.grid, x, y)
    base_values = run_x.value_series(y)
    pi_entries = _poly_pi_entries(uni, offset)
    report = []

    def partial_gamma() -> GammaMatrix:
        gd = GammaData(
            uni,
            {n: Series(uni, dict(d)) for n, d in pi_entries.items()},
            base_values,
        )
        return build_gamma(gd)

    from .indices import ordinal as _ordinal

    probe = _fit_probe_nodes(builder, y)
    for beta in uni.populated:
        if uni.is_purely_poly(beta):
            continue
        if max_ordinal is not None and _ordinal(beta, uni.ordering) > max_ordinal:
            break
        hom = uni.hom(beta)
        needed = [n for n in derivative_keys_below(hom, uni.params.d) if any(n)]
        gamma = partial_gamma()
        resid = _residual_semi(builder, run_x, comps_y, y, beta, gamma, True)
        for n in needed:
            val = resid.derivative_at(n, y) / _n_fact(n)
            if val != 0.0:
                pi_entries.setdefault(n, {})[beta] = val
        # quality of the local polynomial description near y
        scale = max(
            abs(run_x.components[beta].at(y)),
            max((abs(resid.at(p)) for p in probe), default=0.0),
            1e-30,
        )
        worst = 0.0
        for p in probe:
            model = sum(
                pi_entries.get(n, {}).get(beta, 0.0)
                * _power(minimal_offset(builder.grid, y, p), n)
                for n in needed
            )
            dist = parabolic_distance(builder.grid, y, p)
            worst = max(worst, abs(resid.at(p) - model) / (scale * dist ** min(hom, 2.0)))
        report.append({"beta": format_index(beta), "fit_residue": worst})
        if worst > fit_tolerance:
            raise RuntimeError(
                f"recentering fit residue {worst:.3g} at {format_index(beta)} "
                "exceeds the threshold; refine the grid or shrink |y-x|"
            )
    gd = GammaData(
        uni, {n: Series(uni, dict(d)) for n, d in pi_entries.items()}, base_values
    )
    gd.validate()
    return gd, report


# --- verification passes -----------------------------------------------------


def verify_recenter(
    builder: ModelBuilder,
    run_x: ModelRun,
    comps_y: dict,
    y: GridPoint,
    gamma: GammaMatrix,
) -> RecenterReport:
    """Window norms of Pi_x - Gamma*_{xy} Pi_y - Pi_x(y), per index."""
    uni = builder.universe
    mask = builder.window_mask()
    report = RecenterReport()
    for beta in uni.populated:
        if uni.is_purely_poly(beta):
            continue
        resid = _residual_semi(builder, run_x, comps_y, y, beta, gamma, False)
        r = resid.to_field().values
        scale = max(
            float(np.max(np.abs(run_x.components[beta].value_field().values[mask]))),
            1e-30,
        )
        sup = float(np.max(np.abs(r[mask])))
        rms = float(np.sqrt(np.mean(r[mask] ** 2)))
        report.add(beta, sup=sup, rms=rms, scale=scale, relative=sup / scale)
    return report


def _id_minus_p_series(uni: Universe, comps_y: dict, lap: bool = False) -> Series:
    """(id - P) Pi_y: the purely polynomial sector as exact field values."""
    coeffs = {}
    for beta in uni.populated:
        if not uni.is_purely_poly(beta):
            continue
        comp = comps_y[beta]
        f = comp.lap_field() if lap else comp.value_field()
        coeffs[beta] = f.values
    return Series(uni, coeffs)


def verify_recenter_minus(
    builder: ModelBuilder,
    run_x: ModelRun,
    comps_y: dict,
    pims_y: dict,
    gamma: GammaMatrix,
    y: GridPoint,
    t_smooth: float,
) -> RecenterReport:
    """Residual of the forcing recentering identity after kernel smoothing.

    For indices of homogeneity < 2 the polynomial correction term is
    empty, so the first difference itself must vanish; above 2 the
    difference is matched against the explicit correction and fitted by a
    polynomial of parabolic degree <= |beta| - 2.
    """
    uni = builder.universe
    grid = builder.grid
    mask = builder.window_mask()
    base_values = run_x.value_series(y)

    a_series = gamma.apply(_id_minus_p_series(uni, comps_y)) + base_values
    b_series = gamma.apply(_id_minus_p_series(uni, comps_y, lap=True))
    correction = Series.zero(uni)
    for k in uni.coeff_k_range():
        zk = Series.monomial(uni, MultiIndex(((("k", k), 1),)))
        correction = correction + zk * a_series.power(k) * b_series
    correction = correction.project_P()

    report = RecenterReport()
    for beta in uni.populated:
        if uni.is_purely_poly(beta):
            continue
        lhs = run_x.pi_minus[beta].rebase(y)
        for g, v in gamma.rows.get(beta, {}).items():
            if g in pims_y:
                lhs.add(pims_y[g], -v)
        resid = lhs.to_field().values
        corr = correction.coeffs.get(beta)
        if corr is not None:
            resid = resid - (corr if isinstance(corr, np.ndarray) else float(corr))
        smooth = semigroup_convolve(GridField(resid, grid), t_smooth).values
        scale = max(
            float(
                np.max(
                    np.abs(
                        semigroup_convolve(
                            run_x.pi_minus[beta].to_field(), t_smooth
                        ).values[mask]
                    )
                )
            ),
            1e-30,
        )
        sup = float(np.max(np.abs(smooth[mask])))
        row = {
            "sup": sup,
            "scale": scale,
            "relative": sup / scale,
            "hom": uni.hom(beta),
        }
        if uni.hom(beta) > 2.0:
            row["poly_fit_relative"] = (
                _poly_fit_residual(
                    builder, GridField(lhs.to_field().values, grid),
                    uni.hom(beta) - 2.0, t_smooth,
                )
                / scale
            )
        report.add(beta, **row)
    return report


def _poly_fit_residual(
    builder: ModelBuilder, f: GridField, degree: float, t_smooth: float
) -> float:
    """Sup-norm residual of a least-squares polynomial fit (parabolic
    degree <= degree) to the smoothed field inside the window."""
    smooth = semigroup_convolve(f, t_smooth)
    mask = builder.window_mask()
    disp = displacement(builder.grid, builder.base.idx)
    keys = derivative_keys_below(degree + 1e-9, builder.grid.d)
    if not keys:
        keys = [(0,) * (builder.grid.d + 1)]
    cols = []
    for n in keys:
        col = np.ones(builder.grid.shape)
        for axis, o in enumerate(n):
            if o:
                col = col * disp[axis] ** o
        cols.append(col[mask])
    a = np.stack(cols, axis=-1)
    b = smooth.values[mask]
    coef, *_ = np.linalg.lstsq(a, b, rcond=None)
    return float(np.max(np.abs(b - a @ coef)))


def extract_dpi(
    builder: ModelBuilder,
    drun: DirectionalDerivativeRun,
    gamma: GammaMatrix,
    comps_y: dict,
    y: GridPoint,
) -> DerivativeGammaData:
    """Shift data of the Malliavin companion at (x, y).

    dpi^(0) is the Q-projected derivative evaluation at y.  For |n| = 1,
    recursively in the ordering: the partial residual of the modelledness
    statement is linear in (. - y)^n with the unknown as coefficient, so a
    first spatial derivative at y reads it off.
    """
    uni = builder.universe
    d = uni.params.d
    zero_n = (0,) * (d + 1)
    spatial_ns = [
        tuple(1 if a == axis else 0 for a in range(d + 1)) for axis in range(1, d + 1)
    ]
    dpi0 = {}
    for beta, comp in drun.components.items():
        v = comp.at(y)
        if v != 0.0:
            dpi0[beta] = v
    dpi: dict = {zero_n: dpi0}
    for n in spatial_ns:
        dpi[n] = {}

    def partial_dgamma() -> GammaMatrix:
        dg = DerivativeGammaData(
            uni,
            {n: Series(uni, dict(dd)) for n, dd in dpi.items()},
            GammaData(uni, {}, Series.zero(uni)),
        )
        return build_dgamma(dg, gamma=gamma)

    for beta in uni.populated:
        if uni.is_purely_poly(beta) or uni.hom(beta) >= 2.0:
            continue
        dg = partial_dgamma()
        resid = drun.components[beta].semi.rebase(y)
        for g, v in dg.rows.get(beta, {}).items():
            if uni.hom(g) >= 2.0:
                continue  # Q projection
            resid.add(comps_y[g].semi, -v)
        for n in spatial_ns:
            val = resid.derivative_at(n, y)
            if val != 0.0:
                dpi[n][beta] = val
    out = DerivativeGammaData(
        uni,
        {n: Series(uni, dict(dd)) for n, dd in dpi.items()},
        GammaData(uni, {}, Series.zero(uni)),
    )
    out.validate()
    return out


def modelledness_profile(
    builder: ModelBuilder,
    drun: DirectionalDerivativeRun,
    dgamma: GammaMatrix,
    comps_y: dict,
    y: GridPoint,
    radii_cells: tuple = (1, 2, 3, 4, 6, 8),
) -> dict:
    """|delta Pi_x - delta Pi_x(y) - dGamma* Q Pi_y| at nodes near y, per
    index: the raw material for the local vanishing-order fit."""
    uni = builder.universe
    spec = builder.grid
    out: dict = {}
    zero_m = (0,) * (spec.d + 1)
    for beta in drun.components:
        resid = drun.components[beta].semi.rebase(y)
        resid.add_slot(zero_m, np.full(spec.shape, -drun.components[beta].at(y)))
        for g, v in dgamma.rows.get(beta, {}).items():
            if uni.hom(g) >= 2.0:
                continue
            resid.add(comps_y[g].semi, -v)
        samples = []
        for cells in radii_cells:
            for axis in range(1, spec.d + 1):
                for sign in (+1, -1):
                    step = [0] * (spec.d + 1)
                    step[axis] = sign * cells
                    p = y.shifted(tuple(step), spec)
                    dist = parabolic_distance(spec, y, p)
                    samples.append((dist, abs(resid.at(p))))
        out[beta] = samples
    return out


def verify_ho28(
    builder: ModelBuilder,
    drun: DirectionalDerivativeRun,
    dgamma: GammaMatrix,
    comps_y: dict,
    pims_y: dict,
    y: GridPoint,
    t_ladder: tuple,
    against_mollified: bool = True,
) -> dict:
    """Kernel-smoothed residual of the derivative-forcing identity at y
    over a ladder of smoothing times, per index.

    With against_mollified the noise-direction term is the mollified
    direction, for which the identity holds exactly in the continuum (the
    mollified construction is a model for the mollified noise); the
    residual is then pure discretization error.  Without it the residual
    additionally carries the mollification gap of the direction itself.
    """
    uni = builder.universe
    run_x = drun.parent
    spec = builder.grid

    # S = delta Pi_x - dGamma* Q Pi_y, slot-exact Laplacians
    s_lap: dict = {}
    for beta in drun.components:
        h = drun.components[beta].semi.rebase(y)
        for g, v in dgamma.rows.get(beta, {}).items():
            if uni.hom(g) >= 2.0:
                continue
            h.add(comps_y[g].semi, -v)
        s_lap[beta] = h.lap().to_field().values

    base_values = run_x.value_series(y)
    out: dict = {}
    for beta in drun.components:
        lhs = drun.delta_pi_minus[beta].rebase(y)
        for g, v in dgamma.rows.get(beta, {}).items():
            if g in pims_y and uni.hom(g) < 2.0:
                lhs.add(pims_y[g], -v)
        resid = lhs.to_field().values
        for k, _ in beta.coeff_items():
            for tup in uni.decompositions(beta, k):
                last = tup[-1]
                if last not in s_lap:
                    continue
                scalar = 1.0
                for g in tup[:-1]:
                    scalar *= base_values.get(g, 0.0)
                if scalar:
                    resid = resid - scalar * s_lap[last]
        if beta == ZERO:
            target = drun.direction_tau if against_mollified else drun.direction
            resid = resid - target.values
        rows = []
        for t in t_ladder:
            sm = semigroup_convolve(GridField(resid, spec), t)
            rows.append((float(t), abs(sm.at(y))))
        out[beta] = rows
    return out
