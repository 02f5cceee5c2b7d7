"""Spectra, DT invariants, wall-crossing automorphisms and ray products."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable

from .algebra import AlgebraMap, AUTOMORPHISM, TruncSeries, binomial_power, compose, exp_derivation
from .lattice import (Charge, CentralCharge, Lattice, Sector, SectorBoundaryError, UPPER_HALF_PLANE,
                      clockwise_ray_order, collinear, content, degree, is_zero, neg, scale)


def mobius(k: int) -> int:
    if k < 1:
        raise ValueError("mobius needs a positive integer")
    result = 1
    p = 2
    while p * p <= k:
        if k % p == 0:
            k //= p
            if k % p == 0:
                return 0
            result = -result
        p += 1
    if k > 1:
        result = -result
    return result


def _divisors(a: Charge):
    g = content(a)
    return [k for k in range(1, g + 1) if g % k == 0]


@dataclass
class Spectrum:
    """Rational counting function on charges for one chamber."""
    table: dict
    doubled: bool = True
    label: str = ""

    def __post_init__(self):
        t = {}
        for a, v in dict(self.table).items():
            a = tuple(int(x) for x in a)
            v = Fraction(v)
            if is_zero(a):
                raise ValueError("spectrum assigns a value to the zero charge")
            if v == 0:
                continue
            t[a] = v
        if self.doubled:
            for a, v in list(t.items()):
                b = neg(a)
                if b in t and t[b] != v:
                    raise ValueError(f"doubled spectrum has Omega({a}) != Omega({b})")
                t[b] = v
        self.table = t

    def __call__(self, a: Charge) -> Fraction:
        return self.table.get(tuple(a), Fraction(0))

    def support(self) -> list:
        return sorted(self.table)

    @property
    def rank(self) -> int:
        return len(next(iter(self.table))) if self.table else 0


def dt_from_omega(omega, a: Charge) -> Fraction:
    """DT(a) = sum_{k | a} Omega(a/k) / k^2."""
    a = tuple(a)
    if is_zero(a):
        raise ValueError("DT is undefined at the zero charge")
    total = Fraction(0)
    for k in _divisors(a):
        v = omega(tuple(x // k for x in a))
        if v:
            total += Fraction(v) / (k * k)
    return total


def omega_from_dt(dt, a: Charge) -> Fraction:
    """Omega(a) = sum_{k | a} mobius(k) DT(a/k) / k^2."""
    a = tuple(a)
    if is_zero(a):
        raise ValueError("Omega is undefined at the zero charge")
    total = Fraction(0)
    for k in _divisors(a):
        mu = mobius(k)
        if mu:
            total += mu * Fraction(dt(tuple(x // k for x in a))) / (k * k)
    return total


def charges_of_degree(n: int, d: int):
    """All integer vectors of length n with sum |a_i| = d."""
    if n == 1:
        if d == 0:
            yield (0,)
        else:
            yield (d,)
            yield (-d,)
        return
    for first in range(-d, d + 1):
        for rest in charges_of_degree(n - 1, d - abs(first)):
            yield (first,) + rest


def dt_table(omega: Spectrum, N: int) -> dict:
    """All nonzero DT(a) with deg(a) <= N."""
    out = {}
    for a in omega.support():
        if degree(a) > N:
            continue
        k = 1
        while degree(scale(k, a)) <= N:
            b = scale(k, a)
            if b not in out:
                v = dt_from_omega(omega, b)
                if v:
                    out[b] = v
            k += 1
    return dict(sorted(out.items()))


def wall_op(lattice: Lattice, beta: Charge, omega, N: int, exact: bool = True) -> AlgebraMap:
    """x_a -> x_a (1 - s^{|beta|} x_beta)^{<beta,a> omega}."""
    beta = tuple(beta)
    if is_zero(beta):
        raise ValueError("wall_op needs a nonzero charge")
    omega = Fraction(omega) if exact else complex(omega)
    v = TruncSeries.x(lattice, N, beta, coeff=-1, exact=exact)
    images = []
    for g in lattice.generators():
        e = lattice.pairing(beta, g) * omega
        xg = TruncSeries.monomial(lattice, N, g, exact=exact)
        images.append(xg * binomial_power(v, e) if e != 0 else xg)
    return AlgebraMap(AUTOMORPHISM, images)


def wall_op_from_derivation(lattice: Lattice, beta: Charge, N: int, exact: bool = True) -> AlgebraMap:
    """exp of -sum_k [s^{k|beta|} x_{k beta}, -]/k^2; equals wall_op(beta, 1)."""
    beta = tuple(beta)
    d = TruncSeries.zero(lattice, N, exact)
    k = 1
    while k * degree(beta) <= N:
        d = d + TruncSeries.x(lattice, N, scale(k, beta), coeff=Fraction(-1, k * k), exact=exact)
        k += 1
    return exp_derivation(AlgebraMap.ad(d))


@dataclass
class RayDiagram:
    Z: CentralCharge
    groups: list  # [(angle, [charges])], clockwise from the ccw boundary of the sector
    sector: Sector = UPPER_HALF_PLANE

    def charges(self) -> list:
        return [a for _, cs in self.groups for a in cs]


def ray_diagram(Z: CentralCharge, omega: Spectrum, N: int, sector: Sector = UPPER_HALF_PLANE,
                tol: float = 1e-9) -> RayDiagram:
    """Rays inside the sector carrying charges of degree <= N with nonzero DT."""
    dts = dt_table(omega, N)
    inside = []
    for a in dts:
        t = Z.arg(a)
        d = sector.offset(t)
        if d <= tol or abs(d - sector.width) <= tol:
            raise SectorBoundaryError(f"ray of {a} lies on the sector boundary")
        if d < sector.width:
            inside.append(a)
    return RayDiagram(Z, clockwise_ray_order(inside, Z, sector, tol), sector)


class GenericityError(ValueError):
    pass


def ray_product(lattice: Lattice, diagram: RayDiagram, omega: Spectrum, N: int, exact: bool = True) -> AlgebraMap:
    """Composite of wall operators, the most counterclockwise ray acting first.

    Group elements exp(DT x) multiplied left to right in clockwise order act by
    the inverses of the wall operators, so the invariant composite applies the
    counterclockwise-most operator innermost.
    """
    result = AlgebraMap.identity(lattice, N, exact)
    for _, cs in diagram.groups:
        for a, b in itertools.combinations(cs, 2):
            if not collinear(a, b):
                raise GenericityError(f"non-collinear charges {a} and {b} share a ray")
        for a in cs:
            w = omega(a)
            if w:
                result = compose(wall_op(lattice, a, w, N, exact), result)
    return result


def continuity_check(lattice: Lattice, omega_left: Spectrum, Z_left: CentralCharge,
                     omega_right: Spectrum, Z_right: CentralCharge,
                     sector: Sector = UPPER_HALF_PLANE, N: int = 8, exact: bool = True) -> list:
    """Generator-image differences of the two clockwise ray products."""
    left = ray_product(lattice, ray_diagram(Z_left, omega_left, N, sector), omega_left, N, exact)
    right = ray_product(lattice, ray_diagram(Z_right, omega_right, N, sector), omega_right, N, exact)
    return [a - b for a, b in zip(left.images, right.images)]


def first_nonzero_degree(residuals: Iterable) -> int | None:
    degs = [r.min_sdegree() for r in residuals if not r.is_zero()]
    return min(degs) if degs else None


@dataclass
class GrowthReport:
    partial_sums: list
    increments: list
    converged: bool
    ratios: list = field(default_factory=list)


def growth_report(omega: Callable, Z: CentralCharge, lam: float, D: int) -> GrowthReport:
    """Partial sums of sum |Omega(a)| exp(-|Z(a)| lam) over deg(a) <= d, d = 1..D."""
    n = Z.rank
    sums, incs = [], []
    total = 0.0
    for d in range(1, D + 1):
        inc = 0.0
        for a in charges_of_degree(n, d):
            v = omega(a)
            if v:
                inc += abs(float(v)) * math.exp(-abs(Z(a)) * lam)
        total += inc
        sums.append(total)
        incs.append(inc)
    # ratios between consecutive nonempty shells (supports may skip degrees)
    nz = [v for v in incs if v > 0]
    ratios = [nz[i] / nz[i - 1] for i in range(1, len(nz))]
    last = max((i for i, v in enumerate(incs) if v > 0), default=-1)
    if last < len(incs) - 2:
        converged = True  # two or more empty shells at the end: finite support
    else:
        tail = ratios[-3:]
        converged = bool(tail) and max(tail) < 1.0 - 1e-6
    return GrowthReport(sums, incs, converged, ratios)
