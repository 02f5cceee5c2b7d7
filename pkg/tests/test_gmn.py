import cmath

import pytest

from wallcross import gmn, model
from wallcross.integrals import NearRayError, g_integral
from wallcross.lattice import A2
from wallcross.stability import dt_table
from wallcross.trees import DecoratedTree

g1, g2 = (1, 0), (0, 1)


@pytest.fixture(scope="module")
def a2():
    m = model.load_model("a2")
    _, Z, spectrum = m.z(None)
    return Z, spectrum, complex(*m.param("zeta"))


def series(a2, R, cap, zeta=None):
    Z, spectrum, z0 = a2
    return gmn.coord_series(A2, dt_table(spectrum, cap), Z, R, zeta or z0, cap)


def test_first_shell_is_single_vertices(a2):
    Z, spectrum, zeta = a2
    cs = series(a2, 5.0, 1)
    assert set(cs.table) == {g1, g2, (-1, 0), (0, -1)}
    for a, vec in cs.table.items():
        g = g_integral(DecoratedTree(a), zeta, Z, 5.0)
        assert vec == pytest.approx(tuple(x * g for x in a), rel=1e-9, abs=1e-300)


def test_tail_ratio_small_at_large_radius(a2):
    cs = series(a2, 5.0, 5)
    assert cs.converging
    assert max(cs.tail_ratios.values()) < 1e-3


def test_empty_spectrum_gives_nothing(a2):
    Z, _, zeta = a2
    cs = gmn.coord_series(A2, {}, Z, 5.0, zeta, 4)
    assert cs.table == {} and cs.trees == 0
    dr = gmn.darboux_pair(g1, [0.0, 0.0], cs, A2)
    assert dr.bound == 0.0 and dr.partial_sums == [0j] * 4


def test_darboux_partial_sums_and_bound(a2):
    cs = series(a2, 5.0, 4)
    dr = gmn.darboux_pair(g1, [0.0, 0.0], cs, A2)
    direct = sum(gmn.pair_vector(A2, g1, v) for v in cs.table.values())
    assert dr.partial_sums[-1] == pytest.approx(direct, rel=1e-12)
    assert abs(dr.partial_sums[-1] - dr.partial_sums[-2]) < 1e-6 * abs(dr.partial_sums[0])
    assert dr.bound < float("inf")
    assert dr.argmax_degree == 1


def test_phases_enter_by_charge(a2):
    cs = series(a2, 5.0, 2)
    theta = [0.3, -1.1]
    dr = gmn.darboux_pair(g2, theta, cs, A2)
    direct = sum(gmn.pair_vector(A2, g2, v) * cmath.exp(1j * (a[0] * theta[0] + a[1] * theta[1]))
                 for a, v in cs.table.items())
    assert dr.partial_sums[-1] == pytest.approx(direct, rel=1e-12)


def test_coefficients_shrink_when_radius_doubles(a2):
    small, big = series(a2, 5.0, 4), series(a2, 10.0, 4)
    for a in small.table:
        assert sum(map(abs, big.c(a))) < sum(map(abs, small.c(a)))
    for d in small.tail_ratios:
        assert big.tail_ratios[d] < small.tail_ratios[d]


def test_reflection_symmetry(a2):
    # c_{-a}(zeta) = -c_a(-zeta): negating zeta and the charge swaps the kernel sign
    _, _, zeta = a2
    cs, flipped = series(a2, 5.0, 3, zeta), series(a2, 5.0, 3, -zeta)
    scale = max(max(map(abs, v)) for v in cs.table.values())
    for a in cs.table:
        neg = tuple(-x for x in a)
        assert max(abs(x + y) for x, y in zip(cs.c(neg), flipped.c(a))) <= 1e-10 * scale


def test_small_radius_diverges(a2):
    cs = series(a2, 0.3, 5)
    assert not cs.converging
    assert cs.last_ratio > 1


def test_refinement_check(a2):
    Z, spectrum, zeta = a2
    cs = gmn.coord_series(A2, dt_table(spectrum, 2), Z, 5.0, zeta, 2, verify=True)
    assert cs.quad_change < 1e-8


def test_invalid_inputs(a2):
    Z, spectrum, zeta = a2
    dt = dt_table(spectrum, 2)
    with pytest.raises(ValueError):
        gmn.coord_series(A2, dt, Z, 0.0, zeta, 2)
    with pytest.raises(ValueError):
        gmn.coord_series(A2, dt, Z, 5.0, 0j, 2)
    on_ray = Z(g1) / abs(Z(g1))
    with pytest.raises(NearRayError):
        gmn.coord_series(A2, dt, Z, 5.0, on_ray, 2)


def test_c_alpha_reads_the_table(a2):
    Z, spectrum, zeta = a2
    dt = dt_table(spectrum, 2)
    vec, cs = gmn.c_alpha(g1, zeta, Z, 5.0, dt, 2, A2)
    assert vec == cs.table[g1]
    assert gmn.c_alpha((5, 5), zeta, Z, 5.0, dt, 2, A2)[0] == (0j, 0j)
