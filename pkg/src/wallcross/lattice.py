"""Charge lattice, central charges and the geometric predicates on rays."""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

Charge = tuple  # tuple of ints, coordinates in the positive basis

TWO_PI = 2.0 * math.pi


def charge(*coords) -> Charge:
    if len(coords) == 1 and not isinstance(coords[0], int):
        coords = tuple(coords[0])
    return tuple(int(c) for c in coords)


def basis(n: int, i: int) -> Charge:
    return tuple(1 if j == i else 0 for j in range(n))


def add(a: Charge, b: Charge) -> Charge:
    return tuple(x + y for x, y in zip(a, b))


def neg(a: Charge) -> Charge:
    return tuple(-x for x in a)


def scale(k: int, a: Charge) -> Charge:
    return tuple(k * x for x in a)


def is_zero(a: Charge) -> bool:
    return not any(a)


def split_parts(a: Charge) -> tuple[Charge, Charge]:
    """Positive and negative parts, a = plus - minus."""
    return tuple(max(x, 0) for x in a), tuple(max(-x, 0) for x in a)


def degree(a: Charge) -> int:
    return sum(abs(x) for x in a)


def sdeg(a: Charge) -> tuple:
    """s-multidegree of the monomial attached to a charge: (|a_1|, ..., |a_n|)."""
    return tuple(abs(x) for x in a)


def content(a: Charge) -> int:
    """gcd of the coordinates (0 for the zero charge)."""
    g = 0
    for x in a:
        g = math.gcd(g, x)
    return g


def primitive(a: Charge) -> Charge:
    g = content(a)
    return tuple(x // g for x in a)


def collinear(a: Charge, b: Charge) -> bool:
    n = len(a)
    for i in range(n):
        for j in range(i + 1, n):
            if a[i] * b[j] - a[j] * b[i] != 0:
                return False
    return True


@dataclass(frozen=True)
class Lattice:
    pairing_matrix: tuple

    def __init__(self, pairing):
        m = tuple(tuple(int(x) for x in row) for row in pairing)
        n = len(m)
        if n < 1:
            raise ValueError("rank must be at least 1")
        for i in range(n):
            if len(m[i]) != n:
                raise ValueError("pairing matrix must be square")
            for j in range(n):
                if m[i][j] != -m[j][i]:
                    raise ValueError("pairing matrix must be skew-symmetric")
        object.__setattr__(self, "pairing_matrix", m)

    @property
    def rank(self) -> int:
        return len(self.pairing_matrix)

    def pairing(self, a: Charge, b: Charge) -> int:
        n = self.rank
        if len(a) != n or len(b) != n:
            raise ValueError(f"charges must have length {n}")
        m = self.pairing_matrix
        return sum(a[i] * m[i][j] * b[j] for i in range(n) if a[i] for j in range(n) if b[j])

    def sign(self, a: Charge) -> int:
        """(-1)^{sum_{i<j} a_i a_j <g_i,g_j>}: x_a = sign(a) * prod x_{g_i}^{a_i}."""
        m = self.pairing_matrix
        n = self.rank
        t = 0
        for i in range(n):
            for j in range(i + 1, n):
                t += a[i] * a[j] * m[i][j]
        return -1 if t % 2 else 1

    def basis(self, i: int) -> Charge:
        return basis(self.rank, i)

    def generators(self) -> list:
        return [basis(self.rank, i) for i in range(self.rank)]


A2 = Lattice([[0, 1], [-1, 0]])


@dataclass(frozen=True)
class CentralCharge:
    values: tuple

    def __init__(self, values):
        object.__setattr__(self, "values", tuple(complex(v) for v in values))

    @property
    def rank(self) -> int:
        return len(self.values)

    def __call__(self, a: Charge) -> complex:
        if len(a) != len(self.values):
            raise ValueError("dimension mismatch")
        return sum((x * v for x, v in zip(a, self.values) if x), 0j)

    def scaled(self, c) -> "CentralCharge":
        return CentralCharge([c * v for v in self.values])

    def is_positive(self) -> bool:
        return all(v.imag > 0 for v in self.values)

    def arg(self, a: Charge) -> float:
        z = self(a)
        if z == 0:
            raise ValueError(f"Z vanishes on {a}")
        return cmath.phase(z)

    def key(self) -> tuple:
        return tuple((v.real, v.imag) for v in self.values)


def _norm(a: Charge, norm: str) -> float:
    if norm in ("l1", "ℓ1", "1"):
        return float(degree(a))
    if norm in ("l2", "ℓ2", "2"):
        return math.sqrt(sum(x * x for x in a))
    raise ValueError(f"unknown norm {norm!r}")


def check_support(Z: CentralCharge, charges: Iterable, norm: str = "l1") -> float:
    """inf |Z(a)|/||a|| over the set; raises on an empty set."""
    best = None
    for a in charges:
        if is_zero(a):
            raise ValueError("zero charge in support set")
        r = abs(Z(a)) / _norm(a, norm)
        best = r if best is None else min(best, r)
    if best is None:
        raise ValueError("empty charge set")
    return best


def angle_gap(t1: float, t2: float) -> float:
    d = (t1 - t2) % TWO_PI
    return min(d, TWO_PI - d)


def is_strongly_generic(Z: CentralCharge, charges: Iterable, tol: float = 1e-9) -> bool:
    cs = list(charges)
    args = [Z.arg(a) for a in cs]
    for i in range(len(cs)):
        for j in range(i + 1, len(cs)):
            if collinear(cs[i], cs[j]):
                continue
            if angle_gap(args[i], args[j]) <= tol:
                return False
    return True


@dataclass(frozen=True)
class Sector:
    """Open convex sector of angles (cw, ccw) with 0 < ccw - cw <= pi."""
    cw: float = 0.0
    ccw: float = math.pi

    def __post_init__(self):
        w = self.ccw - self.cw
        if not 0 < w <= math.pi + 1e-15:
            raise ValueError("sector must be convex with positive width")

    @property
    def width(self) -> float:
        return self.ccw - self.cw

    def offset(self, theta: float) -> float:
        """Clockwise angle from the ccw boundary to theta, in [0, 2pi)."""
        return (self.ccw - theta) % TWO_PI

    def contains(self, theta: float, tol: float = 1e-12) -> bool:
        d = self.offset(theta)
        return tol < d < self.width - tol


UPPER_HALF_PLANE = Sector(0.0, math.pi)


class SectorBoundaryError(ValueError):
    pass


def clockwise_ray_order(charges: Sequence, Z: CentralCharge, sector: Sector = UPPER_HALF_PLANE,
                        tol: float = 1e-9) -> list:
    """Group charges by ray and sort rays clockwise from the ccw boundary of the sector.

    Returns a list of (angle, [charges]).
    """
    items = []
    for a in charges:
        t = Z.arg(a)
        d = sector.offset(t)
        if d <= tol or abs(d - sector.width) <= tol:
            raise SectorBoundaryError(f"ray of {a} lies on the sector boundary")
        if d > sector.width:
            raise SectorBoundaryError(f"ray of {a} lies outside the sector")
        items.append((d, t, a))
    items.sort(key=lambda r: (r[0], r[2]))
    groups = []
    for d, t, a in items:
        if groups and abs(d - groups[-1][0]) <= tol:
            groups[-1][2].append(a)
        else:
            groups.append([d, t, [a]])
    return [(t, cs) for _, t, cs in groups]
