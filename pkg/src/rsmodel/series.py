"""Truncated formal power series in the coordinates z_k, z_n.

Coefficients are generic: plain floats for evaluation data (recentering
shifts, counterterms) and numpy arrays for whole space-time fields.  All
arithmetic is truncated to a fixed Universe; products that would land
outside it are dropped and tallied, split into benign drops (above the
cutoff or outside the weight budget) and losses (indices the universe
should have contained).  By construction of the universe the loss tally
stays at zero; the model builder asserts this.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .indices import (
    MultiIndex,
    ModelParams,
    OrderingParams,
    ZERO,
    Coeff,
    coefficient_weight,
    e_k,
    enumerate_populated,
    enumerate_region,
    format_index,
    homogeneity,
    is_populated,
    is_purely_polynomial,
    noise_homogeneity,
    ordinal,
    product_decompositions,
    sum_decompositions,
)

__all__ = ["Universe", "Series", "shift_counterterm"]


class Universe:
    """The enumerated truncated index set plus cached combinatorics.

    Holds the populated indices (the model's index set, in recursion
    order) and the transient non-populated indices that truncated
    products pass through.  Decomposition tables and derivation tables
    are cached here because every series operation shares them.
    """

    def __init__(self, params: ModelParams, ordering: OrderingParams | None = None,
                 hard_limit: int = 200_000):
        self.params = params
        self.ordering = ordering or OrderingParams()
        region = enumerate_region(params, hard_limit=hard_limit)
        self.indices = frozenset(region)
        # The declared universe: populated indices strictly below the
        # cutoff.  Remaining region members are transient scratch that
        # keeps truncated products and derivations exact on the universe.
        self.populated = tuple(
            sorted(
                (
                    b
                    for b in region
                    if is_populated(b)
                    and homogeneity(b, params) < params.homogeneity_cutoff
                ),
                key=lambda b: (ordinal(b, self.ordering), b.exponents),
            )
        )
        self.position = {b: i for i, b in enumerate(self.populated)}
        self._hom = {b: homogeneity(b, params) for b in region}
        self._pp = {b: is_purely_polynomial(b) for b in region}
        self._decomp_cache: dict = {}
        self._sumdecomp_cache: dict = {}
        self.dropped_out_of_range = 0
        self.dropped_loss = 0

    def __contains__(self, beta: MultiIndex) -> bool:
        return beta in self.indices

    def __len__(self) -> int:
        return len(self.indices)

    def hom(self, beta: MultiIndex) -> float:
        h = self._hom.get(beta)
        if h is None:
            h = homogeneity(beta, self.params)
        return h

    def is_purely_poly(self, beta: MultiIndex) -> bool:
        return self._pp.get(beta, is_purely_polynomial(beta))

    def populated_below(self, beta: MultiIndex) -> list[MultiIndex]:
        """Populated indices strictly below beta in the ordering."""
        o = ordinal(beta, self.ordering)
        return [b for b in self.populated if ordinal(b, self.ordering) < o]

    def record_drop(self, target: MultiIndex) -> None:
        inside = (
            self.hom(target) < self.params.homogeneity_cutoff
            and coefficient_weight(target) <= self.params.weight_budget
        )
        if inside:
            self.dropped_loss += 1
        else:
            self.dropped_out_of_range += 1

    def decompositions(self, beta: MultiIndex, k: int) -> list[tuple]:
        key = (beta, k)
        out = self._decomp_cache.get(key)
        if out is None:
            out = product_decompositions(beta, k, self.populated)
            self._decomp_cache[key] = out
        return out

    def sum_decomps(self, beta: MultiIndex, parts: int) -> list[tuple]:
        key = (beta, parts)
        out = self._sumdecomp_cache.get(key)
        if out is None:
            out = sum_decompositions(beta, parts, self.populated)
            self._sumdecomp_cache[key] = out
        return out

    def coeff_k_range(self) -> list[int]:
        """Values of k for which z_k can divide some universe member."""
        ks = set()
        for b in self.indices:
            for k, e in b.coeff_items():
                ks.add(k)
        return sorted(ks)


def _is_exact_zero(value) -> bool:
    return np.isscalar(value) and value == 0


@dataclass
class Series:
    """Sparse truncated series: map MultiIndex -> coefficient.

    Immutable by convention; every operation returns a fresh Series.
    """

    universe: Universe
    coeffs: dict = field(default_factory=dict)

    def __post_init__(self):
        clean = {}
        for b, v in self.coeffs.items():
            if b not in self.universe:
                raise ValueError(f"index {format_index(b)} outside the universe")
            if not _is_exact_zero(v):
                clean[b] = v
        self.coeffs = clean

    # -- constructors --------------------------------------------------
    @classmethod
    def zero(cls, universe: Universe) -> "Series":
        return cls(universe, {})

    @classmethod
    def one(cls, universe: Universe) -> "Series":
        return cls(universe, {ZERO: 1.0})

    @classmethod
    def monomial(cls, universe: Universe, beta: MultiIndex, value=1.0) -> "Series":
        return cls(universe, {beta: value})

    # -- ring operations -------------------------------------------------
    def __add__(self, other: "Series") -> "Series":
        if other.universe is not self.universe:
            raise ValueError("operands must share one universe")
        out = dict(self.coeffs)
        for b, v in other.coeffs.items():
            if b in out:
                out[b] = out[b] + v
            else:
                out[b] = v
        return Series(self.universe, out)

    def __sub__(self, other: "Series") -> "Series":
        return self + other.scale(-1.0)

    def scale(self, factor) -> "Series":
        if _is_exact_zero(factor):
            return Series.zero(self.universe)
        return Series(self.universe, {b: factor * v for b, v in self.coeffs.items()})

    def __mul__(self, other: "Series") -> "Series":
        if other.universe is not self.universe:
            raise ValueError("operands must share one universe")
        uni = self.universe
        out: dict = {}
        for b1, v1 in self.coeffs.items():
            for b2, v2 in other.coeffs.items():
                target = b1 + b2
                if target in uni:
                    prod = v1 * v2
                    if target in out:
                        out[target] = out[target] + prod
                    else:
                        out[target] = prod
                else:
                    uni.record_drop(target)
        return Series(uni, out)

    def power(self, l: int) -> "Series":
        if l < 0:
            raise ValueError("negative powers are not defined")
        out = Series.one(self.universe)
        for _ in range(l):
            out = out * self
        return out

    # -- projections ------------------------------------------------------
    def project_P(self) -> "Series":
        """Kill purely polynomial and non-populated coefficients (the
        projection onto the non-polynomial populated sector)."""
        uni = self.universe
        return Series(
            uni,
            {
                b: v
                for b, v in self.coeffs.items()
                if is_populated(b) and not uni.is_purely_poly(b)
            },
        )

    def project_poly(self) -> "Series":
        """Complement of project_P inside the populated sector."""
        uni = self.universe
        return Series(
            uni, {b: v for b, v in self.coeffs.items() if uni.is_purely_poly(b)}
        )

    def project_populated(self) -> "Series":
        return Series(
            self.universe,
            {b: v for b, v in self.coeffs.items() if is_populated(b)},
        )

    def project_Q(self) -> "Series":
        """Keep only indices of homogeneity < 2."""
        uni = self.universe
        return Series(uni, {b: v for b, v in self.coeffs.items() if uni.hom(b) < 2.0})

    def project_universe(self) -> "Series":
        """Restrict to the declared universe (populated, strictly below
        the cutoff), dropping transient scratch indices."""
        pos = self.universe.position
        return Series(self.universe, {b: v for b, v in self.coeffs.items() if b in pos})

    # -- derivations -------------------------------------------------------
    def derive_D0(self) -> "Series":
        """sum_k (k+1) z_{k+1} d/dz_k, the shift derivation on the
        coefficient coordinates."""
        uni = self.universe
        out: dict = {}
        for b, v in self.coeffs.items():
            for k, e in b.coeff_items():
                target = (b - e_k(k)) + e_k(k + 1)
                if target in uni:
                    term = ((k + 1) * e) * v
                    if target in out:
                        out[target] = out[target] + term
                    else:
                        out[target] = term
                else:
                    uni.record_drop(target)
        return Series(uni, out)

    def derive_Dn(self, n: tuple) -> "Series":
        """Partial derivative with respect to z_n, n != 0."""
        from .indices import Poly, e_n

        if not any(n):
            raise ValueError("derive_Dn needs n != 0")
        uni = self.universe
        en = e_n(n)
        out: dict = {}
        for b, v in self.coeffs.items():
            e = b.get(Poly(n))
            if e:
                out[b - en] = e * v
        return Series(uni, out)

    # -- queries -----------------------------------------------------------
    def get(self, beta: MultiIndex, default=0.0):
        return self.coeffs.get(beta, default)

    def support(self):
        return sorted(self.coeffs, key=lambda b: b.exponents)

    def in_T(self) -> bool:
        return all(is_populated(b) for b in self.coeffs)

    def in_T_tilde(self) -> bool:
        return self.in_T() and not any(
            self.universe.is_purely_poly(b) for b in self.coeffs
        )

    def is_counterterm_shaped(self) -> bool:
        """Support restricted to R[[z_k]]: no polynomial keys anywhere."""
        return all(not b.poly_items() for b in self.coeffs)

    def max_abs(self) -> float:
        vals = [float(np.max(np.abs(v))) for v in self.coeffs.values()]
        return max(vals, default=0.0)

    def to_json_obj(self) -> list:
        out = []
        for b in self.support():
            v = self.coeffs[b]
            out.append({"index": format_index(b), "value": float(v)})
        return out

    @classmethod
    def from_json_obj(cls, universe: Universe, obj: list) -> "Series":
        from .indices import parse_index

        return cls(universe, {parse_index(d["index"]): float(d["value"]) for d in obj})


def shift_counterterm(c: Series, v: float) -> Series:
    """Expansion of a |-> c[a(. + v)]: sum_l v^l (D0)^l c / l!.

    Exact on the truncated universe; the sum terminates because each D0
    application raises the homogeneity by alpha.
    """
    if not c.is_counterterm_shaped():
        raise ValueError("counterterms live in R[[z_k]]")
    out = Series.zero(c.universe)
    term = c
    l = 0
    while term.coeffs:
        out = out + term.scale(v**l / math.factorial(l))
        term = term.derive_D0()
        l += 1
    return out
