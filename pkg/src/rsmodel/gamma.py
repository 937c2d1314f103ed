"""The re-expansion maps between base points and their Malliavin companion.

Gamma* is the algebra endomorphism determined by its action on the
coordinates: z_n picks up a shift series pi^(n), z_k mixes into higher
coefficient coordinates weighted by powers of the base-point evaluation
of the model.  The matrix is built from these generator images extended
multiplicatively, read off column by column; an independent oracle via
the normal-ordered exponential formula lives in `exponential_gamma` and
is compared against the generator route in the test suite.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

from .indices import (
    MultiIndex,
    ZERO,
    Coeff,
    Poly,
    e_k,
    e_n,
    format_index,
    is_populated,
    ordinal,
    parabolic_degree,
)
from .series import Series, Universe

__all__ = [
    "GammaData",
    "DerivativeGammaData",
    "GammaMatrix",
    "build_gamma",
    "exponential_gamma",
    "build_dgamma",
    "identity_gamma",
]


@dataclass
class GammaData:
    """Generator data for Gamma*: the shift series pi^(n) (n != 0) and the
    base-point evaluations Pi_x(y) as a scalar series."""

    universe: Universe
    pi_n: dict  # n-tuple -> Series (real coefficients, in T*)
    base_values: Series  # Pi_x(y), real coefficients

    def validate(self) -> None:
        uni = self.universe
        for n, s in self.pi_n.items():
            if not s.in_T():
                raise ValueError(f"pi^({n}) has non-populated support")
            deg = parabolic_degree(n)
            for b in s.coeffs:
                if deg >= uni.hom(b):
                    raise ValueError(
                        f"restriction violated: pi^({n})_{format_index(b)} nonzero "
                        f"but |n|={deg} >= |beta|={uni.hom(b)}"
                    )

    def to_json_obj(self) -> dict:
        return {
            "pi_n": {
                ",".join(map(str, n)): s.to_json_obj() for n, s in sorted(self.pi_n.items())
            },
            "base_values": self.base_values.to_json_obj(),
        }


@dataclass
class DerivativeGammaData:
    """Generator data for the Malliavin companion dGamma*: dpi^(0) is the
    Q-projected derivative evaluation, dpi^(n) for |n| = 1 the extracted
    first-order shifts; both supported on homogeneity < 2, none purely
    polynomial."""

    universe: Universe
    dpi_n: dict  # n-tuple (including the zero tuple) -> Series
    gamma_data: GammaData

    def validate(self) -> None:
        for n, s in self.dpi_n.items():
            if parabolic_degree(n) > 1:
                raise ValueError(f"dpi keys are restricted to |n| <= 1, got {n}")
            for b in s.coeffs:
                if self.universe.hom(b) >= 2.0 or self.universe.is_purely_poly(b):
                    raise ValueError(
                        f"dpi^({n}) support must be Q T~*: bad index {format_index(b)}"
                    )


class GammaMatrix:
    """Sparse matrix entries (beta, gamma) -> value over the universe's
    populated indices, stored row-major."""

    def __init__(self, universe: Universe, rows: dict | None = None):
        self.universe = universe
        self.rows = rows if rows is not None else {}

    def entry(self, beta: MultiIndex, gamma: MultiIndex) -> float:
        return self.rows.get(beta, {}).get(gamma, 0.0)

    def set_entry(self, beta: MultiIndex, gamma: MultiIndex, value) -> None:
        if value != 0.0:
            self.rows.setdefault(beta, {})[gamma] = value

    def items(self):
        for beta in sorted(self.rows, key=lambda b: b.exponents):
            row = self.rows[beta]
            for gamma in sorted(row, key=lambda g: g.exponents):
                yield beta, gamma, row[gamma]

    def apply(self, s: Series) -> Series:
        """(g . s)_beta = sum_gamma g_beta^gamma s_gamma."""
        out: dict = {}
        for beta, row in self.rows.items():
            acc = None
            for gamma, g in row.items():
                v = s.coeffs.get(gamma)
                if v is None:
                    continue
                term = g * v
                acc = term if acc is None else acc + term
            if acc is not None:
                out[beta] = acc
        return Series(self.universe, out)

    def compose(self, other: "GammaMatrix") -> "GammaMatrix":
        """Matrix product (self . other), i.e. apply `other` first."""
        out = GammaMatrix(self.universe)
        for beta, row in self.rows.items():
            target: dict = {}
            for delta, a in row.items():
                orow = other.rows.get(delta)
                if not orow:
                    continue
                for gamma, b in orow.items():
                    target[gamma] = target.get(gamma, 0.0) + a * b
            cleaned = {g: v for g, v in target.items() if v != 0.0}
            if cleaned:
                out.rows[beta] = cleaned
        return out

    def minus_identity_entries(self):
        for beta, gamma, v in self.items():
            if beta == gamma:
                v = v - 1.0
            if v != 0.0:
                yield beta, gamma, v

    def to_csv_rows(self):
        for beta, gamma, v in self.items():
            yield format_index(beta), format_index(gamma), v


def identity_gamma(universe: Universe) -> GammaMatrix:
    g = GammaMatrix(universe)
    for b in universe.populated:
        g.rows[b] = {b: 1.0}
    return g


def _generator_images(gd: GammaData) -> dict:
    """Images Gamma* z_key as truncated series, one per generator key."""
    uni = gd.universe
    images: dict = {}
    base = gd.base_values
    budget = uni.params.weight_budget
    # Gamma* z_k = sum_l binom(k+l, k) z_{k+l} * base^l; any contribution
    # carries the key z_{k+l} of weight k+l, so l ranges over <= budget - k.
    for k in uni.coeff_k_range():
        total = Series.zero(uni)
        power = Series.one(uni)
        for l in range(budget - k + 1):
            shifted = {}
            for b, v in power.coeffs.items():
                target = b + e_k(k + l)
                if target in uni:
                    shifted[target] = shifted.get(target, 0.0) + math.comb(k + l, k) * v
            total = total + Series(uni, shifted)
            power = power * base
        images[Coeff(k)] = total
    for beta in uni.indices:
        for n, _ in beta.poly_items():
            key = Poly(n)
            if key in images:
                continue
            pin = gd.pi_n.get(n, Series.zero(uni))
            images[key] = Series.monomial(uni, e_n(n)) + pin
    return images


def build_gamma(gd: GammaData) -> GammaMatrix:
    """Matrix of Gamma* from generator images, extended multiplicatively.

    Raises if the construction drops a product that the universe should
    have held (that would mean the truncation is inconsistent).
    """
    uni = gd.universe
    loss_before = uni.dropped_loss
    images = _generator_images(gd)
    out = GammaMatrix(uni)
    for gamma in uni.populated:
        col = Series.one(uni)
        for key, e in gamma.items():
            img = images[key]
            for _ in range(e):
                col = col * img
        for beta, v in col.coeffs.items():
            if v != 0.0 and beta in uni.position:
                out.rows.setdefault(beta, {})[gamma] = v
    if uni.dropped_loss != loss_before:
        raise RuntimeError(
            "truncation loss while building Gamma*: universe is inadequate"
        )
    return out


def exponential_gamma(gd: GammaData) -> GammaMatrix:
    """Independent oracle: the normal-ordered exponential formula.

    Gamma* = sum_j (1/j!) sum_{n_1..n_j} pi^(n_1) ... pi^(n_j)
             D^(n_1) ... D^(n_j),
    with n = 0 admitted, pi^(0) the base values and D^(0) the shift
    derivation.  All derivations commute, the ordered sum over tuples
    together with 1/j! counts each multiset once.  Quadratic cost in the
    universe size per column; intended for small cutoffs only.
    """
    uni = gd.universe
    keys = [(0,) * (uni.params.d + 1)] + sorted(
        {n for b in uni.indices for n, _ in b.poly_items()}
    )
    pis = {}
    for n in keys:
        if any(n):
            pis[n] = gd.pi_n.get(n, Series.zero(uni))
        else:
            pis[n] = gd.base_values

    def apply_D(n: tuple, s: Series) -> Series:
        return s.derive_D0() if not any(n) else s.derive_Dn(n)

    out = GammaMatrix(uni)
    for gamma in uni.populated:
        col = Series.monomial(uni, gamma)
        # level j = 0
        total = col
        frontier = {(): col}
        j = 0
        while frontier:
            j += 1
            nxt: dict = {}
            for tup, s in frontier.items():
                for n in keys:
                    ds = apply_D(n, s)
                    if ds.coeffs:
                        nxt[tup + (n,)] = ds
            if not nxt:
                break
            level = Series.zero(uni)
            contributed = False
            for tup, s in nxt.items():
                pref = Series.one(uni)
                for n in tup:
                    pref = pref * pis[n]
                term = pref * s
                if term.coeffs:
                    level = level + term
                    contributed = True
            if contributed:
                total = total + level.scale(1.0 / math.factorial(j))
            frontier = nxt
            if j > 6 * (uni.params.weight_budget + 2):
                raise RuntimeError("exponential formula failed to terminate")
        for beta, v in total.coeffs.items():
            if v != 0.0 and beta in uni.position:
                out.rows.setdefault(beta, {})[gamma] = v
    return out


def build_dgamma(dg: DerivativeGammaData, gamma: GammaMatrix | None = None) -> GammaMatrix:
    """Matrix of dGamma* = sum_{|n|<=1} dpi^(n) Gamma* D^(n), restricted to
    the universe."""
    uni = dg.universe
    if gamma is None:
        gamma = build_gamma(dg.gamma_data)
    out = GammaMatrix(uni)
    for col_idx in uni.populated:
        acc: dict = {}
        col = Series.monomial(uni, col_idx)
        for n, dpi in dg.dpi_n.items():
            if not dpi.coeffs:
                continue
            d_col = col.derive_D0() if not any(n) else col.derive_Dn(n)
            if not d_col.coeffs:
                continue
            g_d = gamma.apply(d_col)
            term = dpi * g_d
            for beta, v in term.coeffs.items():
                acc[beta] = acc.get(beta, 0.0) + v
        for beta, v in acc.items():
            if v != 0.0 and beta in uni.position:
                out.rows.setdefault(beta, {})[col_idx] = v
    return out


def check_triangular(g: GammaMatrix, strict_prec: bool = True) -> list[str]:
    """Violations of the two triangularity statements, as messages."""
    uni = g.universe
    op = uni.ordering
    bad = []
    for beta, gamma, v in g.minus_identity_entries():
        if abs(v) <= 0.0:
            continue
        if uni.hom(gamma) >= uni.hom(beta):
            bad.append(
                f"hom-triangularity: ({format_index(beta)},{format_index(gamma)}) = {v}"
            )
        if strict_prec and ordinal(gamma, op) >= ordinal(beta, op):
            bad.append(
                f"prec-triangularity: ({format_index(beta)},{format_index(gamma)}) = {v}"
            )
    return bad
