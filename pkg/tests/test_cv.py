import cmath
import math
from functools import lru_cache

import pytest

from wallcross import cv
from wallcross.algebra import AUTOMORPHISM, AlgebraError, AlgebraMap, TruncSeries, compose
from wallcross.integrals import h_integral
from wallcross.lattice import A2, CentralCharge
from wallcross.stability import Spectrum
from wallcross.trees import DecoratedTree

g1, g2 = (1, 0), (0, 1)
Z = CentralCharge([cmath.rect(1, 1.9), cmath.rect(1.2, 1.0)])
THREE = Spectrum({g1: 1, g2: 1, (1, 1): 1})
TWO = Spectrum({g1: 1, g2: 1})
DATA = cv.BPSData(A2, THREE, Z)
T0 = 0.3 * cmath.exp(-0.4j)


@lru_cache(maxsize=None)
def laurent(N, lam=2.0):
    return cv.laurent_extract(DATA, lam, N)


def test_order_zero_flat_section_is_identity():
    Y = cv.flat_section(DATA, T0, 2.0, 0)
    assert Y.as_map() == AlgebraMap.identity(A2, 0, exact=False)


def test_order_one_images_from_single_vertices():
    lam = 2.0
    Y = cv.flat_section(DATA, T0, lam, 1)
    dt = DATA.dt(1)
    for i, g in enumerate(A2.generators()):
        expected = TruncSeries.monomial(A2, 1, g, exact=False)
        for b, v in dt.items():
            p = A2.pairing(g, b)
            if p:
                h = h_integral(DecoratedTree(b), -T0, Z, lam)
                xb = TruncSeries.x(A2, 1, b, float(v) * p * h, exact=False)
                expected = expected + TruncSeries.monomial(A2, 1, g, exact=False) * xb
        assert Y.images[i].distance(expected) <= 1e-10


def test_flat_section_images_are_units():
    Y = cv.flat_section(DATA, T0, 2.0, 3)
    for g, img in zip(A2.generators(), Y.images):
        low = [(a, c) for (a, m), c in img.terms.items() if sum(m) == 0]
        assert low == [(g, 1)]


def test_adic_inverse():
    ident = AlgebraMap.identity(A2, 4)
    assert cv.invert_adic(ident) == ident
    one = TruncSeries.one(A2, 4)
    f = AlgebraMap(AUTOMORPHISM, [TruncSeries.monomial(A2, 4, g1) * (one + TruncSeries.x(A2, 4, g2)),
                                  TruncSeries.monomial(A2, 4, g2)])
    assert compose(cv.invert_adic(f), f) == ident == compose(f, cv.invert_adic(f))


def test_adic_inverse_of_flat_section():
    Y = cv.flat_section(DATA, T0, 2.0, 5)
    Yinv = cv.invert_adic(Y)
    ident = AlgebraMap.identity(A2, 5, exact=False)
    assert compose(Yinv, Y.as_map()).distance(ident) <= 1e-12
    assert compose(Y.as_map(), Yinv).distance(ident) <= 1e-12


def test_lagrange_selects_corrected_signs():
    Y = cv.flat_section(DATA, T0, 2.0, 3)
    res = cv.invert_lagrange(Y)
    assert res.convention == cv.CORRECTED
    assert res.discrepancy <= 1e-10
    assert res.discrepancies[cv.PRINTED] > 1e-4
    with pytest.raises(AlgebraError):
        cv.invert_lagrange(Y, convention=cv.PRINTED)


def test_lagrange_leading_term():
    Y = cv.flat_section(DATA, T0, 2.0, 2)
    inv = cv.invert_lagrange(Y).inverse
    for g, img in zip(A2.generators(), inv.images):
        assert img.terms[(g, (0, 0))] == pytest.approx(1.0)


def test_connection_at_order_zero():
    lam = 2.0
    A = cv.connection_form(DATA, T0, lam, 0)
    for g, img in zip(A2.generators(), A.images):
        zg = Z(g)
        assert img.terms == pytest.approx({(g, (0, 0)): -zg / T0 ** 2 + lam ** 2 * zg.conjugate()})


def test_connection_is_a_derivation():
    A = cv.connection_form(DATA, T0, 2.0, 3)
    x1 = TruncSeries.monomial(A2, 3, g1, exact=False)
    x2 = TruncSeries.monomial(A2, 3, g2, exact=False)
    lhs = A.apply(x1 * x2)
    rhs = A.apply(x1) * x2 + x1 * A.apply(x2)
    assert lhs.distance(rhs) <= 1e-12 * rhs.max_abs()


@pytest.mark.parametrize("t", [T0, 0.05 * cmath.exp(2.5j), 0.8 * cmath.exp(-2.0j)])
def test_flatness(t):
    # the step follows the scale of exp(Z/t), which varies on |t|^2
    assert cv.flatness_defect(DATA, t, 2.0, 3, delta=1e-4 * abs(t) ** 2) <= 1e-6


def test_laurent_validations():
    ld = laurent(3)
    assert ld.m2_error <= 1e-8
    assert ld.residual <= 1e-6


def test_laurent_order_zero():
    lam = 2.0
    ld = cv.laurent_extract(DATA, lam, 0)
    assert max(img.max_abs() for img in ld.Q.images) <= 1e-12
    for g, img in zip(A2.generators(), ld.coeff_0.images):
        assert img.terms[(g, (0, 0))] == pytest.approx(lam ** 2 * Z(g).conjugate(), rel=1e-10)


def test_residue_matches_tree_route():
    Qt = cv.q_from_trees(DATA, 2.0, 3)
    assert laurent(3).Q.distance(Qt) <= 1e-10


def test_laurent_rejects_coarse_circle():
    with pytest.raises(ValueError):
        cv.laurent_extract(DATA, 2.0, 2, M=16)


def test_connection_is_single_valued_across_cuts():
    ld = laurent(3)
    for a in (g1, g2, (1, 1)):
        assert cv.cut_crossing(DATA, cmath.phase(Z(a)), 0.3, 2.0, 3, laurent=ld) <= 1e-8


def test_isomonodromy_small_order():
    rep = cv.isomonodromy_check(A2, THREE, TWO, [cmath.rect(1, 1.4), cmath.rect(1.2, 1.4)], 1e-2, 1.0, 2, M=32)
    assert rep.omega_jumps
    assert rep.max_difference <= 1e-3


def test_straddle_orders_the_sides():
    zl, zr = cv.straddle([cmath.rect(1, 1.4), cmath.rect(1.2, 1.4)], 0.02)
    assert zl.arg(g1) > zl.arg(g2)
    assert zr.arg(g1) < zr.arg(g2)


def test_richardson_is_exact_on_its_model():
    base = AlgebraMap.diagonal(A2, 1, [1.0 + 2j, -0.5j])
    pert = AlgebraMap.diagonal(A2, 1, [0.3, 0.7 - 1j])
    lams = [1.0, 0.5, 0.25, 0.125, 0.0625]

    def value(lam, coeffs):
        return cv._combine([base, pert], [1.0, sum(c * f for c, f in zip(coeffs, funcs(lam)))])

    def funcs(lam):
        return [lam ** 2 * math.log(lam), lam ** 2, lam ** 4 * math.log(lam), lam ** 4]

    vals = [value(lam, [2.0, -1.0, 0.5, 3.0]) for lam in lams]
    assert cv.richardson(lams, vals, "lambda2log").distance(base) <= 1e-10
    vals2 = [cv._combine([base, pert], [1.0, lam ** 2]) for lam in lams]
    assert cv.richardson(lams, vals2, "lambda2").distance(base) <= 1e-12
    with pytest.raises(ValueError):
        cv.richardson(lams, vals, "cubic")


def test_observed_order():
    lams = [1.0, 0.5, 0.25]
    assert cv.observed_order(lams, [4.0, 1.0, 0.25]) == pytest.approx([2.0, 2.0])


def test_f_from_ad_round_trip():
    f = TruncSeries(A2, 3, {(g1, (1, 0)): 0.3j, (g2, (0, 1)): -0.1, ((1, 1), (1, 1)): 0.25 + 1j,
                           ((-1, 0), (1, 0)): 0.3j}, exact=False)
    V = AlgebraMap.ad(f)
    got, worst = cv.f_from_ad(V)
    assert got.distance(f) <= 1e-15
    assert worst <= 1e-15


def test_joyce_limit_leading_order():
    jr = cv.joyce_limit(DATA, [1.0, 0.5, 0.25, 0.125, 1 / 16, 1 / 32], 1, M=32)
    expected = 1 / (2j * math.pi)
    for a in (g1, g2, (-1, 0), (0, -1)):
        key = (a, tuple(abs(x) for x in a))
        assert jr.f.terms[key] == pytest.approx(expected, abs=1e-3)
    assert jr.monotone


# an exact solution of the PDE at order 2: f12 = -c1 c2 log(Z2/Z1)

C1, C2 = 0.4 - 0.1j, -0.2 + 0.3j


def exact_f(Zc):
    f12 = -C1 * C2 * cmath.log(Zc(g2) / Zc(g1))
    return TruncSeries(A2, 2, {(g1, (1, 0)): C1, (g2, (0, 1)): C2, ((1, 1), (1, 1)): f12}, exact=False)


def test_pde_residual_on_exact_solution():
    r = cv.joyce_pde_residual(exact_f, Z, 1e-3)
    assert r["relative"] <= 1e-6
    assert r["cauchy_riemann"] <= 1e-6


def test_pde_residual_detects_wrong_solution():
    wrong = lambda Zc: exact_f(Zc).scale(1.5)
    assert cv.joyce_pde_residual(wrong, Z, 1e-3)["relative"] > 1e-2


def test_frobenius_residuals_shrink_with_step():
    coarse = cv.frobenius_residuals(exact_f, Z, 2e-2)
    fine = cv.frobenius_residuals(exact_f, Z, 1e-2)
    for key in ("flatness", "parallel"):
        if coarse[key] > 1e-13:
            assert fine[key] / coarse[key] == pytest.approx(0.25, abs=0.02)
    assert fine["euler"] <= 1e-12
