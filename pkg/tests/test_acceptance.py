"""Acceptance criteria 1-10; each test prints one PASS/FAIL line (run with -s or -v)."""
import cmath
import math
import random
import time
from fractions import Fraction

import pytest

from wallcross import cli, cv, gmn, model
from wallcross import convergence as conv
from wallcross.lattice import A2
from wallcross.stability import Spectrum, continuity_check, dt_from_omega, dt_table, omega_from_dt


@pytest.fixture(scope="module")
def a2():
    return model.load_model("a2")


def report(capsys, number, ok, detail):
    with capsys.disabled():
        print(f"\ncriterion {number}: {'PASS' if ok else 'FAIL'}  {detail}")
    assert ok, detail


def random_table(rng):
    rank = rng.randint(1, 3)
    table = {}
    for _ in range(rng.randint(1, 6)):
        a = tuple(rng.randint(-3, 3) for _ in range(rank))
        if any(a):
            table[a] = Fraction(rng.randint(-5, 5), rng.randint(1, 6))
    return table


def test_criterion_1_mobius_round_trip(capsys):
    rng = random.Random(1)
    t0 = time.perf_counter()
    bad = 0
    for _ in range(200):
        om = Spectrum(random_table(rng), doubled=False)
        charges = {tuple(k * x for x in a) for a in om.support() for k in range(1, 5)}
        dt = {a: dt_from_omega(om, a) for a in charges}
        bad += sum(omega_from_dt(lambda b: dt.get(b, Fraction(0)), a) != om(a) for a in charges)
    secs = time.perf_counter() - t0
    report(capsys, 1, bad == 0 and secs < 1.0, f"mismatches={bad} over 200 tables, {secs:.2f}s (< 1s)")


def test_criterion_2_pentagon(capsys, a2):
    _, Zl, om_l = a2.z_for_chamber("three")
    _, Zr, om_r = a2.z_for_chamber("two")
    t0 = time.perf_counter()
    res = continuity_check(A2, om_l, Zl, om_r, Zr, N=8, exact=True)
    secs = time.perf_counter() - t0
    zero = all(r.is_zero() for r in res)
    report(capsys, 2, zero and secs < 30, f"exact residual zero={zero} at N=8, {secs:.1f}s (< 30s)")


def test_criterion_3_lagrange_inversion(capsys, a2):
    _, Z, sp = a2.z(None)
    t0 = time.perf_counter()
    Y = cv.flat_section(cv.BPSData(A2, sp, Z), 0.3 * cmath.exp(-0.4j), 2.0, 4, a2.quad())
    res = cv.invert_lagrange(Y)
    secs = time.perf_counter() - t0
    ok = res.discrepancy <= 1e-10 and secs < 60
    report(capsys, 3, ok, f"max coefficient gap {res.discrepancy:.2e} (<= 1e-10), convention={res.convention}, "
                          f"other={max(v for k, v in res.discrepancies.items() if k != res.convention):.2e}, "
                          f"{secs:.1f}s")


def sector_points(Z, charges, count, rng):
    """count points cycling through the sectors between the rays of +-Z(a), kept off the rays."""
    rays = sorted({cmath.phase(s * Z(a)) % (2 * math.pi) for a in charges for s in (1, -1)})
    sectors = [(a, (rays[(i + 1) % len(rays)] - a) % (2 * math.pi)) for i, a in enumerate(rays)]
    pts = []
    for i in range(count):
        start, width = sectors[i % len(sectors)]
        ang = start + width * rng.uniform(0.2, 0.8)
        pts.append((i % len(sectors), cmath.rect(rng.uniform(0.05, 1.0), ang)))
    return pts


def test_criterion_4_flatness(capsys, a2):
    _, Z, sp = a2.z(None)
    data = cv.BPSData(A2, sp, Z)
    rng = random.Random(4)
    t0 = time.perf_counter()
    worst = 0.0
    pts = sector_points(Z, sp.support(), 10, rng)
    for _, t in pts:
        worst = max(worst, cv.flatness_defect(data, t, 2.0, 3, a2.quad(), delta=1e-4 * abs(t) ** 2))
    secs = time.perf_counter() - t0
    nsec = len({s for s, _ in pts})
    report(capsys, 4, worst <= 1e-6 and secs < 300,
           f"worst relative defect {worst:.2e} (<= 1e-6) at 10 points over {nsec} sectors, {secs:.1f}s")


def test_criterion_5_laurent(capsys, a2):
    _, Z, sp = a2.z(None)
    ld = cv.laurent_extract(cv.BPSData(A2, sp, Z), 2.0, 3, a2.quad(), 64)
    ok = ld.m2_error <= 1e-8 and ld.residual <= 1e-6
    report(capsys, 5, ok, f"coeff_-2 + Z = {ld.m2_error:.2e} (<= 1e-8), constancy {ld.residual:.2e} (<= 1e-6)")


LAMS = [1.0, 0.5, 0.25, 0.125] + [2.0 ** -k for k in range(4, 11)]
REPORT_LAMS = [1.0, 0.5, 0.25, 0.125]


def test_criterion_6_joyce_limit(capsys, a2):
    _, Z, sp = a2.z(None)
    data = cv.BPSData(A2, sp, Z)

    def limit(Zc):
        return cv.joyce_limit(data.with_Z(Zc), LAMS, 3, a2.quad(), 32, report_lams=REPORT_LAMS)

    jr = limit(Z)
    conformal = jr.V.distance(limit(Z.scaled(2)).V)
    pde = cv.joyce_pde_residual(lambda Zc: limit(Zc).f, Z, 1e-3)
    ok = jr.monotone and pde["relative"] < 1e-4 and conformal < 1e-5
    dists = ", ".join(f"{d:.2e}" for d in jr.distances[:4])
    report(capsys, 6, ok, f"distances [{dists}] decreasing={jr.monotone}, PDE residual {pde['relative']:.2e} "
                          f"(< 1e-4), conformal {conformal:.2e} (< 1e-5)")


def test_criterion_7_isomonodromy(capsys, a2):
    _, _, om_l = a2.z_for_chamber("three")
    _, _, om_r = a2.z_for_chamber("two")
    wall = [complex(*v) for v in a2.param("wall")["values"]]
    rep = cv.isomonodromy_check(A2, om_l, om_r, wall, 1e-2, 2.0, 3, a2.quad(), 64)
    ok = rep.max_difference <= 1e-3 and rep.omega_jumps
    report(capsys, 7, ok, f"max coefficient change {rep.max_difference:.2e} (<= 1e-3), "
                          f"spectrum jumps={rep.omega_jumps}")


def test_criterion_8_estimate(capsys, a2):
    _, Z, sp = a2.z(None)
    t0 = time.perf_counter()
    rep, grid, _ = cli._estimate(a2, Z, sp, a2.quad())
    secs = time.perf_counter() - t0
    ok = not rep.violations and rep.min_margin > 0 and len(grid) == 20 and secs < 600
    report(capsys, 8, ok, f"C1={rep.C1:.4g} C2={rep.C2:.4g}, min log-margin {rep.min_margin:.3g} over "
                          f"{len(grid)} lambdas in [{grid[0]:g}, {grid[-1]:g}], violations={len(rep.violations)}, "
                          f"trees checked={len({x[0] for x in rep.samples})}, "
                          f"skipped (parallel neighbours, weight zero)={len(rep.skipped)}, {secs:.1f}s")


def test_criterion_9_majorant(capsys, a2):
    _, Z, sp = a2.z(None)
    q = a2.quad()
    om = Spectrum({(1, 0): 1, (0, 1): 2, (1, 1): -1, (1, -1): Fraction(1, 2)})
    w = {a: Fraction(1, 3) for a in om.support()}
    expansion = all(conv.iterate_s(d, om, A2, N=N, weights=w).family[b] == conv.tree_formula(b, d, om, A2, w, N)
                for N in range(1, 5) for d in (1, 2, 3) for b in A2.generators())
    lam = 2.0
    ld = cv.laurent_extract(cv.BPSData(A2, sp, Z), lam, 4, q)
    c1, c2, _ = cli._q_constants(Z, sp, A2, lam, 4, q)
    dom = conv.check_domination(conv.majorant_bound(A2, sp, Z, lam, 4, c1, c2), ld.Q.images, "Q",
                                scale=cli._laurent_scale(ld))
    rep, _, _ = cli._estimate(a2, Z, sp, q)
    cert = conv.majorant_bound(A2, sp, Z, 20.0, 4, rep.C1, rep.C2, radius=math.sqrt(2) * 1.01)
    ok = expansion and dom.ok and cert.certified and cert.max_radius > math.sqrt(2)
    report(capsys, 9, ok, f"iterates equal forest sums={expansion}, Q dominated at N=4={dom.ok} (worst ratio "
                          f"{dom.worst_ratio:.3g}), certified radius at lambda=20: {cert.max_radius:.4g} (> 1.414)")


def test_criterion_10_coordinate_series(capsys, a2):
    _, Z, sp = a2.z(None)
    zeta = complex(*a2.param("zeta"))
    t0 = time.perf_counter()
    dt = dt_table(sp, 5)
    cs = gmn.coord_series(A2, dt, Z, 5.0, zeta, 5, a2.quad())
    dr = gmn.darboux_pair((1, 0), [0.0, 0.0], cs, A2)
    big = gmn.coord_series(A2, dt, Z, 10.0, zeta, 5, a2.quad())
    shrinks = all(sum(map(abs, big.c(a))) < sum(map(abs, cs.c(a))) for a in cs.table if any(cs.c(a)))
    secs = time.perf_counter() - t0
    ok = cs.last_ratio < 1 and math.isfinite(dr.bound) and shrinks and secs < 600
    report(capsys, 10, ok, f"last tail ratio {cs.last_ratio:.3g} (< 1), bound {dr.bound:.3g} at "
                           f"{dr.argmax}, all |c_a| shrink when R doubles={shrinks}, {secs:.1f}s")
