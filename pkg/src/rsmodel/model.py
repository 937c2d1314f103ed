"""Construction of the centered model for one mollified noise sample.

The hierarchy is solved index by index in the recursion order: the
right-hand side of a component collects the nonlinearity products over
all decompositions, the noise at the root index, and the counterterm
ladder; the component is the heat solution of that forcing with its
Taylor polynomial at the base point removed, so it vanishes there to the
order of its homogeneity.

Components live in a polynomial-coefficient periodic representation,

    u(z) = sum_m (z - x)^m H_m(z),   H_m periodic,

with the monomial bookkeeping symbolic and every spectral operation
acting on the periodic coefficient fields only.  Products are slot-wise
exact, the Laplacian expands by the product rule with exact monomial
derivatives, and the heat inverse is a descending cascade over monomial
degrees (commutator terms feed lower degrees).  Taylor-recentered,
polynomially growing components therefore never meet a Fourier
transform: there is no seam ringing and no window bias, and residual
diagnostics are pure discretization error.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .ensembles import mollify
from .fields import (
    GridField,
    GridPoint,
    GridSpec,
    derivative_keys_below,
    displacement,
    heat_solve,
    laplacian,
    partial_derivative,
)
from .indices import (
    MultiIndex,
    ZERO,
    format_index,
    noise_homogeneity,
    ordinal,
    parabolic_degree,
)
from .series import Series, Universe

__all__ = [
    "SemiField",
    "Component",
    "ModelRun",
    "DirectionalDerivativeRun",
    "ModelBuilder",
    "bphz_counterterm",
    "calibrate_counterterm",
    "rebased_components",
]


def _monomial_degree(m: tuple) -> int:
    return 2 * m[0] + sum(m[1:])


class SemiField:
    """sum_m (z - base)^m H_m(z) with periodic slot fields H_m.

    Displacements use minimal periodic images, so evaluation is faithful
    on the half-period neighborhood of the base point; the slot fields
    themselves are globally periodic and safe under spectral operators.
    """

    __slots__ = ("spec", "base", "slots")

    def __init__(self, spec: GridSpec, base: GridPoint, slots: dict | None = None):
        self.spec = spec
        self.base = base
        self.slots = slots if slots is not None else {}

    @classmethod
    def from_field(cls, f: GridField, base: GridPoint) -> "SemiField":
        zero_m = (0,) * (f.spec.d + 1)
        return cls(f.spec, base, {zero_m: np.array(f.values)})

    @classmethod
    def from_poly(cls, spec: GridSpec, base: GridPoint, coeffs: dict) -> "SemiField":
        slots = {
            m: np.full(spec.shape, float(c)) for m, c in coeffs.items() if c != 0.0
        }
        return cls(spec, base, slots)

    def copy(self) -> "SemiField":
        return SemiField(self.spec, self.base, {m: h.copy() for m, h in self.slots.items()})

    def add_slot(self, m: tuple, arr, coeff: float = 1.0) -> None:
        term = coeff * arr if coeff != 1.0 else arr
        if m in self.slots:
            self.slots[m] = self.slots[m] + term
        else:
            self.slots[m] = np.array(term, dtype=np.float64) * np.ones(self.spec.shape) if np.isscalar(term) else np.array(term)

    def add(self, other: "SemiField", coeff: float = 1.0) -> None:
        if other.base != self.base:
            raise ValueError("semi-fields must share the base point; rebase first")
        for m, h in other.slots.items():
            self.add_slot(m, h, coeff)

    def scaled(self, c: float) -> "SemiField":
        return SemiField(self.spec, self.base, {m: c * h for m, h in self.slots.items()})

    def mul(self, other: "SemiField") -> "SemiField":
        if other.base != self.base:
            raise ValueError("semi-fields must share the base point")
        out = SemiField(self.spec, self.base)
        for m1, h1 in self.slots.items():
            for m2, h2 in other.slots.items():
                m = tuple(a + b for a, b in zip(m1, m2))
                out.add_slot(m, h1 * h2)
        return out

    def lap(self) -> "SemiField":
        """Spatial Laplacian: product rule with exact monomial derivatives."""
        out = SemiField(self.spec, self.base)
        d = self.spec.d
        for m, h in self.slots.items():
            hf = GridField(h, self.spec)
            out.add_slot(m, laplacian(hf).values)
            for axis in range(1, d + 1):
                if m[axis] >= 1:
                    lower = tuple(v - (1 if a == axis else 0) for a, v in enumerate(m))
                    dn = tuple(1 if a == axis else 0 for a in range(d + 1))
                    out.add_slot(lower, partial_derivative(hf, dn).values, 2.0 * m[axis])
                if m[axis] >= 2:
                    lower2 = tuple(v - (2 if a == axis else 0) for a, v in enumerate(m))
                    out.add_slot(lower2, h, float(m[axis] * (m[axis] - 1)))
        return out

    def _monomials(self) -> dict:
        disp = displacement(self.spec, self.base.idx)
        out = {}
        for m in self.slots:
            q = np.ones(self.spec.shape)
            for axis, order in enumerate(m):
                if order:
                    q = q * disp[axis] ** order
            out[m] = q
        return out

    def to_field(self) -> GridField:
        qs = self._monomials()
        total = np.zeros(self.spec.shape)
        for m, h in self.slots.items():
            total = total + qs[m] * h
        return GridField(total, self.spec)

    def at(self, p: GridPoint) -> float:
        offset = _offset(self.spec, self.base.idx, p.idx)
        total = 0.0
        for m, h in self.slots.items():
            q = math.prod(d**o for d, o in zip(offset, m))
            if q:
                total += q * float(h[p.idx])
        return total

    def derivative_at(self, n: tuple, p: GridPoint) -> float:
        """d^n at a node: exact on monomials, spectral on the periodic
        slot fields, combined by the Leibniz rule."""
        offset = _offset(self.spec, self.base.idx, p.idx)
        total = 0.0
        for m, h in self.slots.items():
            hf = None
            for j in itertools.product(*(range(min(a, b) + 1) for a, b in zip(n, m))):
                qc = 1.0
                for axis in range(len(n)):
                    qc *= math.comb(n[axis], j[axis]) * math.perm(m[axis], j[axis])
                    qc *= offset[axis] ** (m[axis] - j[axis])
                if qc == 0.0:
                    continue
                rest = tuple(a - b for a, b in zip(n, j))
                if any(rest):
                    if hf is None:
                        hf = GridField(h, self.spec)
                    val = partial_derivative(hf, rest).at(p)
                else:
                    val = float(h[p.idx])
                total += qc * val
        return total

    def taylor_coefficients(self, order: float) -> dict:
        return {
            n: self.derivative_at(n, self.base) / _n_fact(n)
            for n in derivative_keys_below(order, self.spec.d)
        }

    def rebase(self, new_base: GridPoint) -> "SemiField":
        """Exact re-expansion of the monomials around another base point:
        (z-x)^m = sum_j binom(m, j) (y-x)^(m-j) (z-y)^j."""
        offset = _offset(self.spec, new_base.idx, self.base.idx)  # x - y
        out = SemiField(self.spec, new_base)
        for m, h in self.slots.items():
            for j in itertools.product(*(range(v + 1) for v in m)):
                coef = 1.0
                for axis in range(len(m)):
                    coef *= math.comb(m[axis], j[axis])
                    coef *= (-offset[axis]) ** (m[axis] - j[axis])
                if coef:
                    out.add_slot(tuple(j), h, coef)
        return out

    def roll(self, cells: tuple, new_base: GridPoint) -> "SemiField":
        """Cyclic translation: roll every slot field, move the base."""
        axes = tuple(range(self.spec.d + 1))
        return SemiField(
            self.spec,
            new_base,
            {m: np.roll(h, cells, axes) for m, h in self.slots.items()},
        )

    def mean(self) -> float:
        """Torus average of the assembled field (the renormalization
        surrogate for the large-time expectation at the base point)."""
        return self.to_field().mean()

    def max_abs(self) -> float:
        return self.to_field().max_abs()


def _offset(spec: GridSpec, base_idx: tuple, p_idx: tuple) -> tuple:
    st = spec.steps
    periods = (spec.L0,) + (spec.L,) * spec.d
    out = []
    for axis in range(spec.d + 1):
        delta = (p_idx[axis] - base_idx[axis]) * st[axis]
        delta -= periods[axis] * round(delta / periods[axis])
        out.append(delta)
    return tuple(out)


def _n_fact(n: tuple) -> int:
    return math.prod(math.factorial(v) for v in n)


def heat_solve_semi(src: SemiField) -> SemiField:
    """Inverse of (d_0 - Laplace) on polynomial-coefficient periodic
    sources, by descending induction on the monomial degree.

    For u = sum_l q_l u_l the operator produces commutator terms feeding
    strictly lower degrees, so each slot solves
        (d_0 - Laplace) u_l = G_l - C_l({u_m}, deg m > deg l),
    with the zero mode of every slot pinned to 0 (re-anchored later by
    Taylor subtraction).
    """
    spec = src.spec
    d = spec.d
    keys = set()
    for m in src.slots:
        for j in itertools.product(*(range(v + 1) for v in m)):
            keys.add(tuple(j))
    order = sorted(keys, key=lambda m: (-_monomial_degree(m), m))
    out = SemiField(spec, src.base)
    grads: dict = {}
    for l in order:
        g = src.slots.get(l)
        g = np.zeros(spec.shape) if g is None else np.array(g)
        up0 = tuple(v + (1 if a == 0 else 0) for a, v in enumerate(l))
        if up0 in out.slots:
            g = g - (l[0] + 1) * out.slots[up0]
        for axis in range(1, d + 1):
            up1 = tuple(v + (1 if a == axis else 0) for a, v in enumerate(l))
            if up1 in out.slots:
                key = (up1, axis)
                if key not in grads:
                    dn = tuple(1 if a == axis else 0 for a in range(d + 1))
                    grads[key] = partial_derivative(
                        GridField(out.slots[up1], spec), dn
                    ).values
                g = g + 2.0 * (l[axis] + 1) * grads[key]
            up2 = tuple(v + (2 if a == axis else 0) for a, v in enumerate(l))
            if up2 in out.slots:
                g = g + float((l[axis] + 2) * (l[axis] + 1)) * out.slots[up2]
        out.slots[l] = heat_solve(GridField(g, spec)).values
    return out


@dataclass
class Component:
    """One model component: a semi-periodic field vanishing at the base
    point to the order of its homogeneity (purely polynomial indices are
    the exact monomials)."""

    beta: MultiIndex
    semi: SemiField
    _lap: SemiField | None = None
    _value: GridField | None = None

    @property
    def base(self) -> GridPoint:
        return self.semi.base

    def lap_semi(self) -> SemiField:
        if self._lap is None:
            self._lap = self.semi.lap()
        return self._lap

    def value_field(self) -> GridField:
        if self._value is None:
            self._value = self.semi.to_field()
        return self._value

    def lap_field(self) -> GridField:
        return self.lap_semi().to_field()

    def at(self, p: GridPoint) -> float:
        return self.semi.at(p)

    def derivative_at(self, n: tuple, p: GridPoint) -> float:
        return self.semi.derivative_at(n, p)


@dataclass
class ModelRun:
    """All components of one sample, their forcings, the frozen
    counterterm, and provenance."""

    universe: Universe
    grid: GridSpec
    base: GridPoint
    tau: float
    counterterm: Series
    components: dict  # beta -> Component
    pi_minus: dict  # beta -> SemiField (forcing, counterterm applied)
    xi: GridField
    xi_tau: GridField
    provenance: dict = field(default_factory=dict)

    def component(self, beta: MultiIndex) -> Component:
        return self.components[beta]

    def value_series(self, at: GridPoint) -> Series:
        """Pi_x(y) as a scalar series over the populated universe."""
        out = {}
        for b, c in self.components.items():
            v = c.at(at)
            if v != 0.0:
                out[b] = v
        return Series(self.universe, out)


@dataclass
class DirectionalDerivativeRun:
    """Directional Malliavin derivative of a run along a smooth direction,
    for the singular indices (homogeneity < 2)."""

    parent: ModelRun
    direction: GridField
    direction_tau: GridField
    components: dict  # beta -> Component
    delta_pi_minus: dict  # beta -> SemiField


def bphz_counterterm(samples: list) -> tuple:
    """Mean and standard error of per-sample space-time averages of the
    pre-counterterm forcing; the renormalization constant estimator."""
    if len(samples) < 2:
        raise ValueError("counterterm estimation needs at least 2 samples")
    arr = np.asarray(samples, dtype=np.float64)
    mean = _tree_sum(arr) / len(arr)
    var = _tree_sum((arr - mean) ** 2) / (len(arr) - 1)
    return float(mean), float(math.sqrt(var / len(arr)))


def _tree_sum(arr: np.ndarray) -> float:
    """Pairwise summation with a fixed association, independent of any
    chunking of the work that produced the entries."""
    n = len(arr)
    if n == 1:
        return float(arr[0])
    half = (n + 1) // 2
    return _tree_sum(arr[:half]) + _tree_sum(arr[half:])


class ModelBuilder:
    """Sample-independent machinery: recursion plans, Taylor orders, and
    the assembly/integration pipeline."""

    def __init__(
        self,
        universe: Universe,
        grid: GridSpec,
        base: GridPoint | None = None,
        window_radius: float | None = None,
    ):
        if universe.params.d != grid.d:
            raise ValueError("universe and grid disagree on the spatial dimension")
        self.universe = universe
        self.grid = grid
        self.base = base if base is not None else grid.center()
        self.window_radius = window_radius if window_radius else grid.L / 4.0
        if not (0 < self.window_radius <= 0.5 * grid.L):
            raise ValueError("need 0 < window radius <= L/2")
        self._plan()

    def _plan(self) -> None:
        uni = self.universe
        self.targets = [b for b in uni.populated if not uni.is_purely_poly(b)]
        self.taylor_order: dict = {}
        self.product_plan: dict = {}
        max_deg = min(self.grid.N0, self.grid.N1) // 4
        for beta in self.targets:
            hom = uni.hom(beta)
            if hom > max_deg:
                raise ValueError(
                    f"homogeneity {hom} of {format_index(beta)} needs Taylor "
                    "derivatives beyond this grid's resolution"
                )
            self.taylor_order[beta] = hom
            plan = []
            for k, _ in beta.coeff_items():
                for tup in uni.decompositions(beta, k):
                    plan.append((k, tup))
            self.product_plan[beta] = plan

    # -- per-sample construction ----------------------------------------------
    def build(
        self,
        xi: GridField,
        tau: float,
        counterterm: Series,
        provenance: dict | None = None,
        limit_ordinal: float | None = None,
    ) -> ModelRun:
        """Construct every populated component (optionally only those with
        ordinal strictly below `limit_ordinal`)."""
        uni = self.universe
        if counterterm.universe is not uni:
            raise ValueError("counterterm built over a different universe")
        if not counterterm.is_counterterm_shaped():
            raise ValueError("counterterm has polynomial keys")
        xi_tau = mollify(xi, tau)
        run = ModelRun(
            universe=uni,
            grid=self.grid,
            base=self.base,
            tau=tau,
            counterterm=counterterm,
            components={},
            pi_minus={},
            xi=xi,
            xi_tau=xi_tau,
            provenance=dict(provenance or {}),
        )
        loss_before = uni.dropped_loss
        ladders = self._counterterm_ladders(counterterm)
        for beta in uni.populated:
            if limit_ordinal is not None and ordinal(beta, uni.ordering) >= limit_ordinal:
                break
            if uni.is_purely_poly(beta):
                n = beta.poly_items()[0][0]
                semi = SemiField.from_poly(self.grid, self.base, {n: 1.0})
                run.components[beta] = Component(beta, semi)
                continue
            rhs = self.assemble_rhs(run, beta, ladders)
            c_beta = float(counterterm.get(beta, 0.0))
            if c_beta:
                zero_m = (0,) * (self.grid.d + 1)
                rhs.add_slot(zero_m, np.full(self.grid.shape, -c_beta))
            run.pi_minus[beta] = rhs
            run.components[beta] = Component(beta, self._integrate(beta, rhs))
        if uni.dropped_loss != loss_before:
            raise RuntimeError("truncation loss during model recursion")
        return run

    def _counterterm_ladders(self, counterterm: Series) -> list:
        """[(l, (D0)^l c)] for l >= 1 until the shifted series empties."""
        out = []
        term = counterterm.derive_D0()
        l = 1
        while term.coeffs:
            out.append((l, term))
            term = term.derive_D0()
            l += 1
        return out

    def assemble_rhs(
        self, run: ModelRun, beta: MultiIndex, ladders: list | None = None
    ) -> SemiField:
        """Pre-counterterm forcing: the beta-component of the hierarchy's
        right-hand side without the constant c_beta, slot-exact."""
        uni = self.universe
        if ladders is None:
            ladders = self._counterterm_ladders(run.counterterm)
        acc = SemiField(self.grid, self.base)
        for k, tup in self.product_plan[beta]:
            for g in tup:
                if g not in run.components:
                    raise RuntimeError(
                        f"recursion order violated: {format_index(beta)} needs "
                        f"{format_index(g)} which is not built yet"
                    )
            term = run.components[tup[-1]].lap_semi()
            for g in tup[:-1]:
                term = term.mul(run.components[g].semi)
            acc.add(term)
        if beta == ZERO:
            zero_m = (0,) * (self.grid.d + 1)
            acc.add_slot(zero_m, run.xi_tau.values)
        for l, dl in ladders:
            inv = 1.0 / math.factorial(l)
            for delta, cval in dl.coeffs.items():
                if not beta.contains(delta):
                    continue
                for tup in uni.sum_decomps(beta - delta, l):
                    term = None
                    for g in tup:
                        s = run.components[g].semi
                        term = s if term is None else term.mul(s)
                    if term is None:
                        zero_m = (0,) * (self.grid.d + 1)
                        acc.add_slot(zero_m, np.full(self.grid.shape, -cval * inv))
                    else:
                        acc.add(term, -cval * inv)
        return acc

    def _integrate(self, beta: MultiIndex, rhs: SemiField) -> SemiField:
        """Heat-solve the forcing and remove the Taylor polynomial of
        parabolic degree < |beta| at the base point, so the component
        vanishes there to exactly that order."""
        semi = heat_solve_semi(rhs)
        coeffs = semi.taylor_coefficients(self.taylor_order[beta])
        for n, c in coeffs.items():
            if c != 0.0:
                semi.add_slot(n, np.full(self.grid.shape, -c))
        return semi

    # -- directional Malliavin derivative -------------------------------------
    def build_directional(
        self, run: ModelRun, direction: GridField
    ) -> DirectionalDerivativeRun:
        """Linearized hierarchy along a smooth direction, for the singular
        indices.  The counterterm is deterministic, so its derivative
        vanishes and it enters only through the product rule on the
        shift ladder."""
        uni = self.universe
        direction_tau = mollify(direction, run.tau)
        drun = DirectionalDerivativeRun(
            parent=run,
            direction=direction,
            direction_tau=direction_tau,
            components={},
            delta_pi_minus={},
        )
        ladders = self._counterterm_ladders(run.counterterm)
        for beta in uni.populated:
            if uni.is_purely_poly(beta) or uni.hom(beta) >= 2.0:
                continue
            if beta not in run.components:
                continue  # ordinal-limited parent run
            rhs = self._assemble_delta_rhs(run, drun, beta, ladders)
            drun.delta_pi_minus[beta] = rhs
            drun.components[beta] = Component(beta, self._integrate(beta, rhs))
        return drun

    def _assemble_delta_rhs(
        self,
        run: ModelRun,
        drun: DirectionalDerivativeRun,
        beta: MultiIndex,
        ladders: list,
    ) -> SemiField:
        uni = self.universe
        acc = SemiField(self.grid, self.base)
        for k, tup in self.product_plan[beta]:
            for pos in range(len(tup)):
                g = tup[pos]
                dcomp = drun.components.get(g)
                if dcomp is None:
                    continue  # deterministic or non-singular factor
                term = dcomp.lap_semi() if pos == len(tup) - 1 else dcomp.semi
                for j, other in enumerate(tup):
                    if j == pos:
                        continue
                    s = (
                        run.components[other].lap_semi()
                        if j == len(tup) - 1
                        else run.components[other].semi
                    )
                    term = term.mul(s)
                acc.add(term)
        if beta == ZERO:
            zero_m = (0,) * (self.grid.d + 1)
            acc.add_slot(zero_m, drun.direction_tau.values)
        for l, dl in ladders:
            inv = 1.0 / math.factorial(l)
            for delta, cval in dl.coeffs.items():
                if not beta.contains(delta):
                    continue
                for tup in uni.sum_decomps(beta - delta, l):
                    for pos, g in enumerate(tup):
                        dcomp = drun.components.get(g)
                        if dcomp is None:
                            continue
                        term = dcomp.semi
                        for j, other in enumerate(tup):
                            if j != pos:
                                term = term.mul(run.components[other].semi)
                        acc.add(term, -cval * inv)
        return acc

    # -- diagnostics ------------------------------------------------------------
    def window_mask(self) -> np.ndarray:
        from .fields import _parabolic_radius

        return _parabolic_radius(self.grid, self.base.idx) <= self.window_radius


def calibrate_counterterm(
    builder: ModelBuilder,
    sample_fn,
    tau: float,
    n_samples: int,
    symmetric_zeros: bool = True,
    max_ordinal: float | None = None,
) -> tuple:
    """Fix the renormalization constants level by level in the recursion
    order and freeze them.

    sample_fn(i) must return the i-th noise field.  For each counterterm
    candidate (coefficient-only populated index), the constant is the
    sample mean of the space-time average of the pre-counterterm forcing
    at that index; the model below the candidate's level is rebuilt with
    all previously frozen constants.  Indices whose forcing is odd in the
    noise carry no expectation: [beta] = 0 components are linear (any
    centered ensemble), and for sign-symmetric ensembles every odd noise
    count 1 + [beta] integrates to zero as well.

    Returns (counterterm series, report rows), one row per candidate with
    (index, value, stderr, n).
    """
    uni = builder.universe
    if n_samples < 2:
        raise ValueError("counterterm calibration needs at least 2 samples")
    candidates = [
        b
        for b in uni.populated
        if not b.poly_items() and noise_homogeneity(b) >= 1 and not b.is_zero()
        and (max_ordinal is None or ordinal(b, uni.ordering) <= max_ordinal)
    ]
    c = Series.zero(uni)
    report = []
    levels: dict = {}
    for b in candidates:
        levels.setdefault(round(ordinal(b, uni.ordering), 12), []).append(b)
    for level in sorted(levels):
        group = levels[level]
        estimated = [
            b for b in group if not (symmetric_zeros and (1 + noise_homogeneity(b)) % 2 == 1)
        ]
        for b in group:
            if b not in estimated:
                report.append((format_index(b), 0.0, 0.0, 0))
        if not estimated:
            continue
        averages = {b: [] for b in estimated}
        for i in range(n_samples):
            run = builder.build(sample_fn(i), tau, c, limit_ordinal=level)
            ladders = builder._counterterm_ladders(c)
            for b in estimated:
                rhs = builder.assemble_rhs(run, b, ladders)
                averages[b].append(rhs.mean())
        for b in estimated:
            val, err = bphz_counterterm(averages[b])
            c = c + Series.monomial(uni, b, val)
            report.append((format_index(b), val, err, n_samples))
    report.sort(key=lambda r: r[0])
    return c, report


def rebased_components(
    builder: ModelBuilder, run_shifted: ModelRun, z_cells: tuple, y: GridPoint
) -> tuple:
    """View of the model based at y = x + z, obtained from a run built on
    the cyclically shifted noise sample (exact on the torus).

    run_shifted must have been built from xi(. + z), i.e. the noise array
    rolled by -z_cells.  Returns (components at y, forcings at y)."""
    comps = {}
    pims = {}
    for beta, comp in run_shifted.components.items():
        comps[beta] = Component(beta, comp.semi.roll(z_cells, y))
    for beta, pim in run_shifted.pi_minus.items():
        pims[beta] = pim.roll(z_cells, y)
    return comps, pims
