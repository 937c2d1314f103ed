"""Multi-indices over the coordinates z_k (k >= 0) and z_n (n != 0).

A multi-index assigns a positive integer exponent to finitely many
coordinates.  Coordinates come in two families: "coefficient" keys
tagging the k-th Taylor coefficient of the nonlinearity, and
"polynomial" keys tagging a space-time direction n = (n0, ..., nd),
n != 0.  Multi-indices are the index set of every truncated power
series in this package and double as dictionary keys, so they are
immutable, hashable and kept in a canonical sparse form (no zero
exponents, keys sorted).
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field

__all__ = [
    "Coeff",
    "Poly",
    "MultiIndex",
    "ModelParams",
    "OrderingParams",
    "ResourceLimitError",
    "ZERO",
    "e_k",
    "e_n",
    "parabolic_degree",
    "homogeneity",
    "noise_homogeneity",
    "is_populated",
    "is_purely_polynomial",
    "ordinal",
    "coefficient_weight",
    "enumerate_region",
    "enumerate_populated",
    "sum_decompositions",
    "product_decompositions",
    "format_index",
    "parse_index",
]

# A key is ("k", k) for a coefficient coordinate or ("n", n_tuple) for a
# polynomial coordinate.  Plain tuples keep comparison and hashing cheap.
Key = tuple


def Coeff(k: int) -> Key:
    if k < 0:
        raise ValueError(f"coefficient key needs k >= 0, got {k}")
    return ("k", int(k))


def Poly(n: tuple) -> Key:
    n = tuple(int(v) for v in n)
    if any(v < 0 for v in n):
        raise ValueError(f"polynomial key needs nonnegative entries, got {n}")
    if not any(n):
        raise ValueError("polynomial key n = 0 is not a coordinate")
    return ("n", n)


def parabolic_degree(n: tuple) -> int:
    """Parabolic degree |n| = 2*n0 + n1 + ... + nd (time counts twice)."""
    return 2 * n[0] + sum(n[1:])


class ResourceLimitError(RuntimeError):
    """Enumeration exceeded its configured hard size limit."""


@dataclass(frozen=True)
class MultiIndex:
    """Finitely supported map key -> positive exponent, in canonical form."""

    exponents: tuple = ()

    def __post_init__(self):
        canon = tuple(sorted((k, int(e)) for k, e in self.exponents if e))
        if any(e < 0 for _, e in canon):
            raise ValueError(f"negative exponent in {canon}")
        object.__setattr__(self, "exponents", canon)

    @staticmethod
    def from_dict(d: dict) -> "MultiIndex":
        return MultiIndex(tuple(d.items()))

    def get(self, key: Key) -> int:
        for k, e in self.exponents:
            if k == key:
                return e
        return 0

    def items(self):
        return self.exponents

    def coeff_items(self):
        return tuple((k[1], e) for k, e in self.exponents if k[0] == "k")

    def poly_items(self):
        return tuple((k[1], e) for k, e in self.exponents if k[0] == "n")

    def __add__(self, other: "MultiIndex") -> "MultiIndex":
        d = dict(self.exponents)
        for k, e in other.exponents:
            d[k] = d.get(k, 0) + e
        return MultiIndex(tuple(d.items()))

    def __sub__(self, other: "MultiIndex") -> "MultiIndex":
        """Componentwise difference; raises if not >= 0."""
        d = dict(self.exponents)
        for k, e in other.exponents:
            r = d.get(k, 0) - e
            if r < 0:
                raise ValueError(f"{other} is not a sub-index of {self}")
            if r:
                d[k] = r
            else:
                del d[k]
        return MultiIndex(tuple(d.items()))

    def contains(self, other: "MultiIndex") -> bool:
        d = dict(self.exponents)
        return all(d.get(k, 0) >= e for k, e in other.exponents)

    def is_zero(self) -> bool:
        return not self.exponents

    def total_exponent(self) -> int:
        return sum(e for _, e in self.exponents)

    def __str__(self) -> str:
        return format_index(self)

    def __repr__(self) -> str:
        return f"MultiIndex({format_index(self)!r})"


ZERO = MultiIndex()


def e_k(k: int) -> MultiIndex:
    return MultiIndex(((Coeff(k), 1),))


def e_n(n: tuple) -> MultiIndex:
    return MultiIndex(((Poly(n), 1),))


@dataclass(frozen=True)
class ModelParams:
    """Parameters fixing the equation and the truncation of the index set.

    alpha is the small-scale exponent of the noise ensemble, restricted to
    the open interval (max(0, 1 - D/4), 1) with D = d + 2.  The homogeneity
    cutoff bounds |beta| of every index kept in the truncated universe.

    The homogeneity is blind to the exponent at k = 0 (adding a z_0 factor
    leaves |beta| unchanged), so a homogeneity ball alone is infinite.
    coeff_weight_budget caps the weight V(beta) = beta(0) + sum_k k*beta(k);
    the default floor((cutoff - alpha)/alpha) equals the largest noise
    homogeneity [beta] reachable below the cutoff.  This budget is the
    finitization knob of the whole artifact.
    """

    alpha: float
    d: int = 1
    homogeneity_cutoff: float = 2.0
    coeff_weight_budget: int | None = None

    def __post_init__(self):
        if self.d < 1:
            raise ValueError(f"spatial dimension must be >= 1, got {self.d}")
        lo = max(0.0, 1.0 - self.D / 4.0)
        if not (lo < self.alpha < 1.0):
            raise ValueError(
                f"alpha = {self.alpha} outside the admissible interval ({lo}, 1) for d = {self.d}"
            )
        if self.homogeneity_cutoff < self.alpha:
            raise ValueError("homogeneity_cutoff must be >= alpha")
        for k in range(1, 9):
            frac = abs(k * self.alpha - round(k * self.alpha))
            if frac < 1e-3:
                warnings.warn(
                    f"{k}*alpha = {k * self.alpha} is within 1e-3 of an integer; "
                    "integer resonances degrade Taylor-order bookkeeping",
                    stacklevel=2,
                )
                break

    @property
    def D(self) -> int:
        return self.d + 2

    @property
    def weight_budget(self) -> int:
        if self.coeff_weight_budget is not None:
            return self.coeff_weight_budget
        return int(math.floor((self.homogeneity_cutoff - self.alpha) / self.alpha))


@dataclass(frozen=True)
class OrderingParams:
    """The two ordinal weights, constrained by 1 > lambda1 > lambda2 > 0."""

    lambda1: float = 0.75
    lambda2: float = 0.5

    def __post_init__(self):
        if not (1.0 > self.lambda1 > self.lambda2 > 0.0):
            raise ValueError(
                f"need 1 > lambda1 > lambda2 > 0, got ({self.lambda1}, {self.lambda2})"
            )


def homogeneity(beta: MultiIndex, params: ModelParams) -> float:
    """|beta| = alpha*(1 + sum k*beta(k) - sum beta(n)) + sum |n|*beta(n)."""
    ks = 0
    npop = 0
    ndeg = 0
    for key, e in beta.exponents:
        if key[0] == "k":
            ks += key[1] * e
        else:
            npop += e
            ndeg += parabolic_degree(key[1]) * e
    return params.alpha * (1 + ks - npop) + ndeg


def noise_homogeneity(beta: MultiIndex) -> int:
    """[beta] = sum k*beta(k) - sum beta(n); counts extra noise instances."""
    val = 0
    for key, e in beta.exponents:
        if key[0] == "k":
            val += key[1] * e
        else:
            val -= e
    return val


def is_purely_polynomial(beta: MultiIndex) -> bool:
    return (
        len(beta.exponents) == 1
        and beta.exponents[0][0][0] == "n"
        and beta.exponents[0][1] == 1
    )


def is_populated(beta: MultiIndex) -> bool:
    return noise_homogeneity(beta) >= 0 or is_purely_polynomial(beta)


def ordinal(beta: MultiIndex, op: OrderingParams) -> float:
    """|beta|_< = [beta] + lambda1 * sum |n| beta(n) + lambda2 * beta(0)."""
    val = float(noise_homogeneity(beta))
    for key, e in beta.exponents:
        if key[0] == "n":
            val += op.lambda1 * parabolic_degree(key[1]) * e
        elif key[1] == 0:
            val += op.lambda2 * e
    return val


def coefficient_weight(beta: MultiIndex) -> int:
    """V(beta) = beta(0) + sum_{k>=1} k*beta(k); additive, >= 0, and the
    quantity the truncation budget caps."""
    return sum(max(key[1], 1) * e for key, e in beta.exponents if key[0] == "k")


def reduced_homogeneity(beta: MultiIndex, params: ModelParams) -> float:
    """Homogeneity after removing the heaviest polynomial key, if any.

    The transient region of the truncated algebra keeps an index as long
    as this stays below the cutoff: the partial derivative with respect
    to a polynomial coordinate lowers the homogeneity, so products one
    removable polynomial step above the cutoff still feed back into the
    declared universe and must be retained for the derivations to be
    exact there.
    """
    hom = homogeneity(beta, params)
    degs = [parabolic_degree(key[1]) for key, _ in beta.exponents if key[0] == "n"]
    if degs:
        hom -= max(degs) - params.alpha
    return hom


def _poly_keys_below(params: ModelParams, max_degree: float) -> list:
    """All n != 0 with parabolic degree <= max_degree, lexicographic."""
    out = []
    deg_cap = int(math.floor(max_degree))
    for n0 in range(deg_cap // 2 + 1):
        rem = deg_cap - 2 * n0
        for spatial in itertools.product(range(rem + 1), repeat=params.d):
            n = (n0,) + spatial
            if any(n) and parabolic_degree(n) <= max_degree:
                out.append(n)
    return sorted(out)


def enumerate_region(params: ModelParams, hard_limit: int = 200_000) -> list[MultiIndex]:
    """Every multi-index with reduced homogeneity below the cutoff and
    V(beta) <= budget.

    This region is closed under removing keys, so a breadth-first closure
    under adding single generator keys reaches all of it.  It contains the
    declared universe (populated, |beta| < cutoff) plus the transient
    indices that truncated products and derivations pass through.
    """
    cutoff = params.homogeneity_cutoff
    budget = params.weight_budget
    gen_keys = [Coeff(k) for k in range(budget + 1)]
    gen_keys += [Poly(n) for n in _poly_keys_below(params, cutoff)]
    generators = [MultiIndex(((key, 1),)) for key in gen_keys]

    seen = {ZERO}
    frontier = [ZERO]
    while frontier:
        nxt = []
        for beta in frontier:
            for g in generators:
                cand = beta + g
                if cand in seen:
                    continue
                if coefficient_weight(cand) > budget:
                    continue
                if reduced_homogeneity(cand, params) >= cutoff:
                    continue
                seen.add(cand)
                nxt.append(cand)
                if len(seen) > hard_limit:
                    raise ResourceLimitError(
                        f"index region exceeds hard limit {hard_limit} "
                        f"(cutoff={cutoff}, budget={budget})"
                    )
        frontier = nxt
    return sorted(seen, key=lambda b: b.exponents)


def enumerate_populated(
    params: ModelParams,
    op: OrderingParams,
    hard_limit: int = 200_000,
) -> list[MultiIndex]:
    """Populated multi-indices below the cutoff, sorted by (ordinal, keys).

    The sort order is the recursion order of the model builder: strictly
    nondecreasing ordinal with a lexicographic tiebreak on the canonical
    key list.
    """
    region = enumerate_region(params, hard_limit=hard_limit)
    pop = [
        b
        for b in region
        if is_populated(b) and homogeneity(b, params) < params.homogeneity_cutoff
    ]
    pop.sort(key=lambda b: (ordinal(b, op), b.exponents))
    return pop


def sum_decompositions(
    beta: MultiIndex, parts: int, universe_indices
) -> list[tuple]:
    """Ordered tuples (beta_1, ..., beta_parts) of populated indices from
    `universe_indices` summing to beta."""
    pool = [g for g in universe_indices if is_populated(g) and beta.contains(g)]
    out = []

    def rec(remaining: MultiIndex, slots: int, acc: list):
        if slots == 0:
            if remaining.is_zero():
                out.append(tuple(acc))
            return
        if slots == 1:
            if remaining in pool_set:
                out.append(tuple(acc + [remaining]))
            return
        for g in pool:
            if remaining.contains(g):
                acc.append(g)
                rec(remaining - g, slots - 1, acc)
                acc.pop()

    pool_set = set(pool)
    rec(beta, parts, [])
    return out


def product_decompositions(
    beta: MultiIndex, k: int, universe_indices
) -> list[tuple]:
    """Ordered (k+1)-tuples of populated indices with e_k + sum = beta.

    These are the contributions of the k-th nonlinearity term to the
    beta-component of the hierarchy; every returned factor is strictly
    below beta in the ordering.
    """
    ek = e_k(k)
    if not beta.contains(ek):
        return []
    return sum_decompositions(beta - ek, k + 1, universe_indices)


# --- text form -------------------------------------------------------------
#
# Canonical token list, e.g. "k1^2*n(0,1)".  Factors sorted by key, "^e"
# omitted for exponent one, "0" for the empty index.  Used in every CSV
# and JSON output.


def format_index(beta: MultiIndex) -> str:
    if beta.is_zero():
        return "0"
    parts = []
    for key, e in beta.exponents:
        if key[0] == "k":
            tok = f"k{key[1]}"
        else:
            tok = "n(" + ",".join(str(v) for v in key[1]) + ")"
        if e > 1:
            tok += f"^{e}"
        parts.append(tok)
    return "*".join(parts)


def parse_index(text: str) -> MultiIndex:
    text = text.strip()
    if text == "0":
        return ZERO
    items = {}
    for tok in text.split("*"):
        if "^" in tok:
            head, _, etxt = tok.partition("^")
            e = int(etxt)
        else:
            head, e = tok, 1
        if head.startswith("k"):
            key = Coeff(int(head[1:]))
        elif head.startswith("n(") and head.endswith(")"):
            key = Poly(tuple(int(v) for v in head[2:-1].split(",")))
        else:
            raise ValueError(f"cannot parse index token {tok!r}")
        items[key] = items.get(key, 0) + e
    return MultiIndex.from_dict(items)
