import cmath
import math

import numpy as np
import pytest
from scipy import integrate

from wallcross.integrals import (GraphIntegrator, NearRayError, NonConvergenceError, QuadSpec, dh_dz, estimate_check,
                                 g_integral, h_integral, h_z_coefficient, pv_split, tilted_h_integral)
from wallcross.lattice import CentralCharge
from wallcross.trees import DecoratedTree, enumerate_trees

g1, g2 = (1, 0), (0, 1)
Z = CentralCharge([cmath.rect(1, 1.9), cmath.rect(1.2, 1.0)])
Zi = CentralCharge([1j, cmath.rect(1.0, 0.6)])
Q = QuadSpec()


def ray_quad(f, theta, r0):
    """(1/2 pi i) int_0^inf f(e^{i theta} r) dr / r, by adaptive quadrature in r."""
    def part(fn):
        lo = integrate.quad(lambda r: fn(f(cmath.exp(1j * theta) * r)) / r, 0, r0, epsabs=1e-14, epsrel=1e-12,
                            limit=200)[0]
        hi = integrate.quad(lambda r: fn(f(cmath.exp(1j * theta) * r)) / r, r0, np.inf, epsabs=1e-14,
                            epsrel=1e-12, limit=200)[0]
        return lo + hi
    return (part(lambda v: v.real) + 1j * part(lambda v: v.imag)) / (2j * math.pi)


def h_oracle(a, z, Zc, lam, inner=None):
    za = Zc(a)

    def f(w):
        v = z / (w - z) * cmath.exp(-za / w - lam * lam * za.conjugate() * w)
        return v * inner(w) if inner else v
    return ray_quad(f, cmath.phase(za), 1 / lam)


def test_empty_tree_conventions():
    assert h_integral(None, 0.3j, Z, 2.0) == 1
    assert g_integral(None, 0.3j, Z, 5.0) == 1
    assert dh_dz(None, 0.3j, Z, 2.0) == 0


def test_single_vertex_matches_quadrature_oracle():
    z = 0.1 * cmath.exp(-1j * math.pi / 4)
    ours = h_integral(DecoratedTree(g1), z, Zi, 2.0)
    assert abs(ours - h_oracle(g1, z, Zi, 2.0)) <= 1e-9 * max(abs(ours), 1e-3)


def test_chain_matches_nested_oracle():
    z = 0.4 * cmath.exp(-0.3j)
    lam = 1.0
    tree = DecoratedTree(g1, [DecoratedTree(g2)])
    ours = h_integral(tree, z, Z, lam)
    oracle = h_oracle(g1, z, Z, lam, inner=lambda w: h_oracle(g2, w, Z, lam))
    assert abs(ours - oracle) <= 1e-8 * abs(oracle)


def test_value_vanishes_linearly_at_origin():
    t = DecoratedTree(g1, [DecoratedTree(g2)])
    d = cmath.exp(-0.5j)
    v1, v2 = (abs(h_integral(t, r * d, Z, 2.0)) for r in (1e-3, 5e-4))
    assert v2 < v1
    assert v1 / v2 == pytest.approx(2.0, rel=1e-2)


def test_z_coefficients_single_vertex_oracle():
    lam = 2.0
    za = Zi(g1)
    ours = h_z_coefficient(DecoratedTree(g1), 1, Zi, lam)
    oracle = ray_quad(lambda w: cmath.exp(-za / w - lam * lam * za.conjugate() * w) / w, cmath.phase(za), 1 / lam)
    assert abs(ours - oracle) <= 1e-9 * abs(oracle)


@pytest.mark.parametrize("key", [(g1, ()), (g2, ((g1, ()),)), (g1, ((g2, ()), (g2, ())))])
def test_taylor_series_reproduces_value(key):
    lam = 2.0
    t = DecoratedTree.from_key(key)
    z = 0.01 / lam * cmath.exp(-0.4j)
    series = sum(h_z_coefficient(t, k, Z, lam) * z ** k for k in range(1, 13))
    direct = h_integral(t, z, Z, lam)
    assert abs(series - direct) <= 10 * Q.tol * abs(direct)


def test_taylor_coefficients_decay():
    lam = 2.0
    rho = 0.01 / lam
    t = DecoratedTree(g1, [DecoratedTree(g2)])
    hs = [abs(h_z_coefficient(t, k, Z, lam)) for k in range(1, 8)]
    assert all(hs[k + 1] * rho <= hs[k] for k in range(len(hs) - 1))


def test_derivative_matches_finite_difference():
    t = DecoratedTree(g1, [DecoratedTree(g2)])
    z, step = 0.3 * cmath.exp(-0.4j), 1e-5
    fd = (h_integral(t, z + step, Z, 2.0) - h_integral(t, z - step, Z, 2.0)) / (2 * step)
    d = dh_dz(t, z, Z, 2.0)
    assert abs(fd - d) <= 1e-6 * abs(d)


def test_derivative_at_origin_is_first_coefficient():
    t = DecoratedTree(g1, [DecoratedTree(g2)])
    h1 = h_z_coefficient(t, 1, Z, 2.0)
    d = dh_dz(t, 1e-7 * cmath.exp(-0.4j), Z, 2.0)
    assert abs(d - h1) <= 1e-5 * abs(h1)


def test_g_single_vertex_oracle():
    R, zeta = 5.0, cmath.exp(-1j * math.pi / 4)
    za = 1j

    def f(w):
        return (w + zeta) / (w - zeta) * cmath.exp(-R * za / w - R * za.conjugate() * w)
    oracle = ray_quad(f, math.pi / 2, 1.0)
    ours = g_integral(DecoratedTree(g1), zeta, Zi, R)
    assert abs(ours - oracle) <= 1e-9 * abs(oracle)


def test_g_large_zeta_limit():
    R = 2.0
    za = Zi(g1)
    far = g_integral(DecoratedTree(g1), 1e7 * cmath.exp(-0.5j), Zi, R)
    oracle = -ray_quad(lambda w: cmath.exp(-R * za / w - R * za.conjugate() * w), cmath.phase(za), 1.0)
    assert abs(far - oracle) <= 1e-6 * abs(oracle)


def test_refinement_is_stable():
    t = DecoratedTree(g1, [DecoratedTree(g2), DecoratedTree(g2)])
    z = 0.2 * cmath.exp(-0.7j)
    coarse = GraphIntegrator(Z, 2.0, h=0.05).value(t, z)
    fine = GraphIntegrator(Z, 2.0, h=0.025).value(t, z)
    assert abs(coarse - fine) <= Q.tol * abs(fine)


@pytest.mark.parametrize("tilt", [0.05, -0.05])
def test_tilting_the_outer_ray(tilt):
    t = DecoratedTree(g2, [DecoratedTree(g1)])
    z = 0.2 * cmath.exp(-0.7j)
    plain = h_integral(t, z, Z, 2.0)
    assert abs(tilted_h_integral(t, z, Z, 2.0, tilt) - plain) <= 10 * Q.tol * abs(plain)


@pytest.mark.parametrize("c", [0.5, 3.0])
def test_scale_covariance(c):
    t = DecoratedTree(g1, [DecoratedTree(g2)])
    lam = 1.5
    for k in (1, 2, 3):
        lhs = h_z_coefficient(t, k, Z.scaled(c), lam)
        rhs = c ** (-k) * h_z_coefficient(t, k, Z, c * lam)
        assert abs(lhs - rhs) <= 1e-9 * abs(rhs)
    z = 0.3 * cmath.exp(-0.4j)
    assert abs(h_integral(t, z, Z.scaled(c), lam) - h_integral(t, z / c, Z, c * lam)) <= 1e-9


def test_point_on_ray_is_rejected():
    with pytest.raises(NearRayError):
        h_integral(DecoratedTree(g1), 0.5 * Z(g1) / abs(Z(g1)), Z, 2.0)


def test_non_convergence_is_reported():
    with pytest.raises(NonConvergenceError):
        h_integral(DecoratedTree(g1, [DecoratedTree(g2)]), 0.3, Z, 2.0, QuadSpec(tol=1e-30, max_refine=1))


def test_plemelj_split_matches_one_sided_limits():
    # boundary values from either side equal the child integral on a ray rotated past the point
    Zc = CentralCharge([1j, 2j])
    split = pv_split(g1, DecoratedTree(g2), Zc, 1.0)
    assert np.allclose(split.above - split.below, split.jump)
    keep = np.abs(split.points) < 10
    x = split.points[keep]
    for side, tilt in (("above", -0.2), ("below", 0.2)):
        w, g = GraphIntegrator(Zc, 1.0, tilts={g2: tilt}).integrand(DecoratedTree(g2))
        rotated = np.array([np.sum(p / (w - p) * g) for p in x])
        assert np.max(np.abs(rotated - getattr(split, side)[keep])) <= 1e-8


def test_single_vertex_estimate_rate():
    trees = [DecoratedTree(a) for a in (g1, g2, (-1, 0), (0, -1))]
    rep = estimate_check(trees, Z, np.linspace(5, 20, 8), 0.01 * cmath.exp(-0.12j))
    assert 1.8 < rep.fit_C2 < 2.1


def test_estimate_outside_hypothesis_flags_without_failing():
    trees = list(enumerate_trees([g1, g2], 3))
    rep = estimate_check(trees, Z, [0.02, 0.05, 0.2, 5.0, 10.0], 0.5 * cmath.exp(-0.12j), calibrate=[5.0, 10.0],
                         safety=1.01)
    assert {v[1] for v in rep.violations} == {0.05, 0.2}
    assert rep.min_margin < 0
