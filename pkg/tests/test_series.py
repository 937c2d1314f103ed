import numpy as np
import pytest

from rsmodel.indices import (
    ModelParams,
    OrderingParams,
    ZERO,
    e_k,
    e_n,
    homogeneity,
    is_populated,
)
from rsmodel.series import Series, Universe, shift_counterterm
from rsmodel.verify import random_series

TOL = 1e-10


def close(a: Series, b: Series, tol=TOL, strict_only=False):
    if strict_only:
        a, b = a.project_universe(), b.project_universe()
    keys = set(a.coeffs) | set(b.coeffs)
    for k in keys:
        va, vb = a.coeffs.get(k, 0.0), b.coeffs.get(k, 0.0)
        assert abs(va - vb) <= tol * max(abs(va), abs(vb), 1.0), k
    return True


def test_unit_law(universe, rng):
    s = random_series(universe, rng)
    assert close(Series.one(universe) * s, s, 0.0)


def test_nonpopulated_product_projects_to_zero(universe):
    a = Series.monomial(universe, e_n((0, 1)))
    b = Series.monomial(universe, e_n((1, 0)))
    prod = a * b
    assert prod.coeffs  # the transient index is retained
    assert not prod.project_populated().coeffs


def test_ring_laws_random(universe, rng):
    for _ in range(20):
        s1 = random_series(universe, rng)
        s2 = random_series(universe, rng)
        s3 = random_series(universe, rng)
        assert close(s1 * s2, s2 * s1)
        assert close((s1 * s2) * s3, s1 * (s2 * s3))
        assert close(s1 * (s2 + s3), s1 * s2 + s1 * s3)


def test_field_coefficients_ring(universe, small_grid, rng):
    def random_field_series(density=0.5):
        coeffs = {}
        for b in universe.populated:
            if rng.random() < density:
                coeffs[b] = rng.standard_normal(small_grid.shape)
        return Series(universe, coeffs)

    s1, s2 = random_field_series(), random_field_series()
    lhs = (s1 * s2).coeffs
    rhs = (s2 * s1).coeffs
    assert set(lhs) == set(rhs)
    for k in lhs:
        assert np.allclose(lhs[k], rhs[k], rtol=1e-12, atol=0.0)


def test_projections(universe, rng):
    s = random_series(universe, rng)
    assert close(s.project_P().project_P(), s.project_P(), 0.0)
    assert close(s.project_Q().project_Q(), s.project_Q(), 0.0)
    assert close(s.project_P().project_Q(), s.project_Q().project_P(), 0.0)
    assert close(Series.one(universe).project_P(), Series.one(universe), 0.0)
    assert not Series.monomial(universe, e_n((0, 1))).project_P().coeffs
    assert not Series.monomial(universe, e_n((0, 2))).project_Q().coeffs
    assert s.project_P().in_T_tilde()


def test_derivations_examples(universe):
    z0 = Series.monomial(universe, e_k(0))
    assert close(z0.derive_D0(), Series.monomial(universe, e_k(1)), 0.0)
    z1 = Series.monomial(universe, e_k(1))
    assert close(z1.derive_D0(), Series.monomial(universe, e_k(2), 2.0), 0.0)
    zn = Series.monomial(universe, e_n((0, 1)))
    assert close(zn.derive_Dn((0, 1)), Series.one(universe), 0.0)
    zn2 = Series.monomial(universe, e_n((0, 1)) + e_n((0, 1)))
    assert close(zn2.derive_Dn((0, 1)), Series.monomial(universe, e_n((0, 1)), 2.0), 0.0)
    assert not z1.derive_Dn((0, 1)).coeffs


def test_leibniz_on_universe(universe, rng):
    for _ in range(20):
        s1 = random_series(universe, rng)
        s2 = random_series(universe, rng)
        assert close(
            (s1 * s2).derive_D0(),
            s1.derive_D0() * s2 + s1 * s2.derive_D0(),
            strict_only=True,
        )
        assert close(
            (s1 * s2).derive_Dn((0, 1)),
            s1.derive_Dn((0, 1)) * s2 + s1 * s2.derive_Dn((0, 1)),
            strict_only=True,
        )


def test_truncation_consistency_against_larger_universe(ordering, rng):
    small = Universe(ModelParams(alpha=0.45, homogeneity_cutoff=1.5), ordering)
    large = Universe(ModelParams(alpha=0.45, homogeneity_cutoff=2.45), ordering)

    def lift(s: Series) -> Series:
        return Series(large, dict(s.coeffs))

    for _ in range(10):
        s1 = random_series(small, rng)
        s2 = random_series(small, rng)
        truncated = s1 * s2
        full = lift(s1) * lift(s2)
        for b, v in truncated.coeffs.items():
            assert abs(v - full.coeffs.get(b, 0.0)) <= TOL * max(abs(v), 1.0)


def test_truncation_drop_classification(universe):
    before_loss = universe.dropped_loss
    before_range = universe.dropped_out_of_range
    big = Series.monomial(universe, e_k(2))
    (big * big) * big  # pushes far outside the region
    assert universe.dropped_loss == before_loss
    assert universe.dropped_out_of_range > before_range


def test_counterterm_shape(universe):
    c = Series(universe, {e_k(1): 2.0, ZERO: 0.5})
    assert c.is_counterterm_shaped()
    bad = Series(universe, {e_n((0, 1)): 1.0})
    assert not bad.is_counterterm_shaped()
    with pytest.raises(ValueError):
        shift_counterterm(bad, 1.0)


def test_shift_counterterm_zero_shift(universe):
    c = Series(universe, {e_k(1): 2.0, e_k(2): -1.0})
    assert close(shift_counterterm(c, 0.0), c, 0.0)


def test_shift_counterterm_first_order(universe):
    c = Series.monomial(universe, e_k(1))
    shifted = shift_counterterm(c, 0.5)
    # z_1 + v * D0 z_1 + ... = z_1 + 2 v z_2 + higher shifts
    assert shifted.get(e_k(1)) == pytest.approx(1.0)
    assert shifted.get(e_k(2)) == pytest.approx(1.0)  # 2 * 0.5


def test_shift_counterterm_matches_functional_evaluation(universe):
    # oracle: c = z_2 evaluates a |-> a''(0)/2; for a(u) = u^3 shifted by v,
    # a(u+v) has second Taylor coefficient 3v, linear in v.
    c = Series.monomial(universe, e_k(2))
    for v in (0.0, 0.3, -1.1):
        shifted = shift_counterterm(c, v)

        def evaluate(series):
            # a(u) = u^3 has z_k[a] = 1 for k = 3 and 0 otherwise, so a
            # monomial evaluates to 1 iff its support lies in {k = 3}
            total = 0.0
            for b, val in series.coeffs.items():
                if b.poly_items():
                    continue
                if all(k == 3 for k, _ in b.coeff_items()):
                    total += val
            return total

        # direct symbolic evaluation: z_2[a(. + v)] = 3v for a(u) = u^3
        assert evaluate(shifted) == pytest.approx(3.0 * v, abs=1e-12)


def test_series_json_roundtrip(universe, rng):
    s = random_series(universe, rng)
    back = Series.from_json_obj(universe, s.to_json_obj())
    assert close(s, back, 0.0)


def test_series_rejects_foreign_index(universe):
    far = e_k(2) + e_k(2) + e_k(2)
    assert far not in universe
    with pytest.raises(ValueError):
        Series(universe, {far: 1.0})
