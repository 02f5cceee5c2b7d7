"""Flat sections from tree sums, their inverses, the connection form and its
Laurent coefficients, and the small-scale limit of the deformation operator.

Orientation: the connection variable is t.  The tree sums enter through
H_T(-t) and the full flat section is Y(t) o exp(Z/t + lam^2 conj(Z) t), so that
the connection form reads  A = -Z/t^2 + Q/t + (const).
"""
from __future__ import annotations

import cmath
import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .algebra import (AUTOMORPHISM, DERIVATION, AlgebraError, AlgebraMap, TruncSeries, star_exp)
from .integrals import GraphIntegrator, H_KIND, QuadSpec, base_step, tree_gap, NearRayError
from .polys import TruncPoly
from .lattice import CentralCharge, Lattice, add, angle_gap, split_parts
from .stability import Spectrum, dt_table
from .trees import DecoratedTree, enumerate_trees, weight_coefficient


@dataclass
class BPSData:
    lattice: Lattice
    spectrum: Spectrum
    Z: CentralCharge

    def with_Z(self, Z: CentralCharge) -> "BPSData":
        return BPSData(self.lattice, self.spectrum, Z)

    def dt(self, N: int) -> dict:
        return dt_table(self.spectrum, N)


@dataclass
class TreeTerm:
    tree: DecoratedTree
    coeff: Fraction        # W_T = coeff * root charge
    sign: int              # prod_v x_{a(v)} = sign * x_{sum}
    charge: tuple          # sum of decorations
    sdeg: tuple            # sum of |a(v)| componentwise
    xi: tuple              # exponent of the xi-monomial prod_v xi^{a(v)}
    xi_sign: int           # prod_v of the sign relating x_{a(v)} to its xi-monomial


def _product_sign(lattice: Lattice, charges) -> int:
    t = 0
    for i in range(len(charges)):
        for j in range(i + 1, len(charges)):
            t += lattice.pairing(charges[i], charges[j])
    return -1 if t % 2 else 1


def contributing_trees(lattice: Lattice, dt: dict, N: int) -> list:
    """Connected trees of s-degree <= N with nonzero weight."""
    out = []
    n = lattice.rank
    for t in enumerate_trees(sorted(dt), N):
        c = weight_coefficient(t, dt, lattice)
        if c == 0:
            continue
        verts = t.vertices()
        sd = tuple(sum(abs(v[i]) for v in verts) for i in range(n))
        xi = [0] * (2 * n)
        xs = 1
        for v in verts:
            p, m = split_parts(v)
            for i in range(n):
                xi[i] += p[i]
                xi[n + i] += m[i]
            xs *= lattice.sign(v)
        out.append(TreeTerm(t, c, _product_sign(lattice, verts), t.charge_sum, sd, tuple(xi), xs))
    return out


class TreeSums:
    """H_T(-t) and its t-derivative for all contributing trees at a fixed (Z, lam, N)."""

    def __init__(self, data: BPSData, lam: float, N: int, q: QuadSpec = QuadSpec(), h: float | None = None):
        self.data = data
        self.lam = float(lam)
        self.N = N
        self.q = q
        self.dt = data.dt(N)
        self.terms = contributing_trees(data.lattice, self.dt, N)
        gaps = [tree_gap(tt.tree, data.Z) for tt in self.terms]
        for g, tt in zip(gaps, self.terms):
            if g <= q.eps:
                raise NearRayError(f"adjacent vertices of {tt.tree.key} share a ray")
        self.h = base_step(q, gaps) if h is None else h
        self.integrator = GraphIntegrator(data.Z, self.lam, H_KIND, self.h, q.U, q.tail)

    def ray_angles(self) -> list:
        return sorted({cmath.phase(self.data.Z(tt.tree.label)) for tt in self.terms})

    def min_point_gap(self, t: complex) -> float:
        """Angular distance from -t to the nearest root ray."""
        a = cmath.phase(-t)
        return min((angle_gap(a, th) for th in self.ray_angles()), default=math.pi)

    def pole_strength(self, t: complex, a) -> float:
        """log of the root exponential factor at |w| = |t| relative to its peak."""
        z = abs(self.data.Z(a))
        r = abs(t)
        return -z * (1.0 / r + self.lam ** 2 * r - 2.0 * self.lam)

    def required_step(self, t: complex, cutoff: float = 35.0) -> float:
        """Largest step resolving the Cauchy pole at t for roots whose factor there matters."""
        h = self.h
        a = cmath.phase(-t)
        for root in {tt.tree.label for tt in self.terms}:
            if self.pole_strength(t, root) < -cutoff:
                continue
            g = angle_gap(a, cmath.phase(self.data.Z(root)))
            if g <= self.q.eps:
                raise NearRayError(f"t = {t} lies within {g:.2e} rad of the ray of {root}")
            h = min(h, g / self.q.gap_factor)
        return h

    def at_step(self, h: float) -> "TreeSums":
        if h >= self.h:
            return self
        cache = self.__dict__.setdefault("_finer", {})
        key = round(math.log2(self.h / h) * 4)  # quantize steps so nearby points share integrators
        sub = cache.get(key)
        if sub is None:
            sub = TreeSums(self.data, self.lam, self.N, self.q, self.h / 2 ** (key / 4))
            cache[key] = sub
        return sub

    def values(self, t: complex) -> tuple:
        """(H_T(-t), d/dt H_T(-t)) for every term."""
        x = -complex(t)
        hv = np.array([self.integrator.value(tt.tree, x) for tt in self.terms], dtype=complex)
        dv = np.array([-self.integrator.z_derivative(tt.tree, x) for tt in self.terms], dtype=complex)
        return hv, dv

    def exponents(self, t: complex) -> tuple:
        """Series S_i, dS_i/dt with Y(x_b) = x_b exp(sum_i b_i S_i), and the tree values."""
        lat = self.data.lattice
        n = lat.rank
        hv, dv = self.values(t)
        S = [dict() for _ in range(n)]
        dS = [dict() for _ in range(n)]
        for tt, hval, dval in zip(self.terms, hv, dv):
            root = tt.tree.label
            key = (tt.charge, tt.sdeg)
            for i in range(n):
                p = lat.pairing(lat.basis(i), root)
                if p == 0:
                    continue
                c = float(tt.coeff) * p * tt.sign
                S[i][key] = S[i].get(key, 0) + c * hval
                dS[i][key] = dS[i].get(key, 0) + c * dval
        mk = lambda d: TruncSeries(lat, self.N, d, exact=False)
        return [mk(d) for d in S], [mk(d) for d in dS], hv


def _pair_series(charge, series_list):
    """sum_i b_i S_i for b = charge."""
    out = None
    for b, s in zip(charge, series_list):
        if b:
            term = s.scale(b)
            out = term if out is None else out + term
    return out


@dataclass
class FlatSection:
    order: int
    lam: float
    Z: CentralCharge
    t: complex
    lattice: Lattice
    exponents: list          # S_i
    dexponents: list         # dS_i/dt
    terms: list = field(default_factory=list)
    tree_values: np.ndarray | None = None
    _cache: dict = field(default_factory=dict, repr=False)

    def _exp(self, a) -> TruncSeries:
        e = self._cache.get(a)
        if e is None:
            s = _pair_series(a, self.exponents)
            if s is None:
                e = TruncSeries.one(self.lattice, self.order, exact=False)
            else:
                e = star_exp(s)
            self._cache[a] = e
        return e

    def image_of_charge(self, a) -> TruncSeries:
        x = TruncSeries.monomial(self.lattice, self.order, a, exact=False)
        return x * self._exp(tuple(a))

    def derivative_of_charge(self, a) -> TruncSeries:
        """d/dt of Y(x_a) = Y(x_a) * sum_i a_i dS_i."""
        d = _pair_series(a, self.dexponents)
        if d is None:
            return TruncSeries.zero(self.lattice, self.order, exact=False)
        return self.image_of_charge(a) * d

    @property
    def images(self) -> list:
        return [self.image_of_charge(g) for g in self.lattice.generators()]

    def as_map(self) -> AlgebraMap:
        return AlgebraMap(AUTOMORPHISM, self.images)

    def apply(self, series: TruncSeries) -> TruncSeries:
        return self._linear(series, self.image_of_charge)

    def apply_derivative(self, series: TruncSeries) -> TruncSeries:
        return self._linear(series, self.derivative_of_charge)

    def _linear(self, series, image):
        out = TruncSeries.zero(self.lattice, self.order, exact=False)
        for (a, m), c in series.terms.items():
            img = image(a)
            shifted = {(b, tuple(x + y for x, y in zip(m, mb))): c * cb for (b, mb), cb in img.terms.items()}
            out = out + TruncSeries(self.lattice, self.order, shifted, exact=False)
        return out


def flat_section(data: BPSData, t: complex, lam: float, N: int, q: QuadSpec = QuadSpec(),
                 sums: TreeSums | None = None) -> FlatSection:
    """Y(t) from tree sums of s-degree <= N (no trees at N = 0: identity)."""
    sums = sums or TreeSums(data, lam, N, q)
    if sums.terms:
        sums = sums.at_step(sums.required_step(t))
    S, dS, hv = sums.exponents(t)
    return FlatSection(N, lam, data.Z, complex(t), data.lattice, S, dS, sums.terms, hv)


def invert_adic(Y) -> AlgebraMap:
    """Inverse automorphism order by order in the s-adic filtration."""
    if isinstance(Y, FlatSection):
        Y = Y.as_map()
    return Y.inverse()


# Lagrange-Good inversion -------------------------------------------------

def _det(m):
    """Determinant of a small matrix of TruncPoly by permutation expansion."""
    size = len(m)
    D, k = m[0][0].D, m[0][0].k
    total = TruncPoly({}, D, k)
    for perm in itertools.permutations(range(size)):
        inv = sum(1 for i in range(size) for j in range(i + 1, size) if perm[i] > perm[j])
        term = TruncPoly.const(-1 if inv % 2 else 1, D, k)
        for i in range(size):
            term = term * m[i][perm[i]]
            if not term.terms:
                break
        total = total + term
    return total


PRINTED = "printed"
CORRECTED = "corrected"


def _good_inverse(Y: FlatSection, convention: str) -> list:
    lat = Y.lattice
    n = lat.rank
    k = 2 * n
    D = Y.order + 1
    if Y.tree_values is None:
        raise AlgebraError("flat section carries no tree values")
    # Phi_i = -S_i, Phi_{n+i} = +S_i as polynomials in xi
    S = [dict() for _ in range(n)]
    for tt, hval in zip(Y.terms, Y.tree_values):
        for i in range(n):
            p = lat.pairing(lat.basis(i), tt.tree.label)
            if p:
                c = float(tt.coeff) * p * tt.xi_sign * hval
                S[i][tt.xi] = S[i].get(tt.xi, 0) + c
    Phi = [TruncPoly(S[i], D, k).scale(-1.0) for i in range(n)] + [TruncPoly(S[i], D, k) for i in range(n)]
    sgn = 1.0 if convention == CORRECTED else -1.0
    mat = [[TruncPoly.const(1.0 if p == q else 0.0, D, k) + Phi[p].xd(q).scale(-sgn) for q in range(k)]
           for p in range(k)]
    det = _det(mat)
    exps = [e for d in range(1, D + 1) for e in _exponents(k, d)]
    images = []
    for i in range(n):
        terms = {}
        lead = TruncPoly({tuple(1 if j == i else 0 for j in range(k)): 1.0}, D, k)
        base = lead * det
        for e in exps:
            if e[i] < 1:
                continue
            expo = TruncPoly({}, D, k)
            for j in range(k):
                if e[j]:
                    expo = expo + Phi[j].scale(sgn * e[j])
            c = _coefficient(base, expo.exp(), e)
            if c == 0:
                continue
            # phi(xi^e) = prod x_{g_j}^{e_j} x_{-g_j}^{e_{n+j}}
            charge = tuple(e[j] - e[n + j] for j in range(n))
            sd = [e[j] + e[n + j] for j in range(n)]
            sd[i] -= 1
            if sum(sd) > Y.order:
                continue
            sign = _phi_sign(lat, e)
            key = (charge, tuple(sd))
            terms[key] = terms.get(key, 0) + sign * c
        images.append(TruncSeries(lat, Y.order, terms, exact=False))
    return images


def _exponents(k, d):
    if k == 1:
        yield (d,)
        return
    for first in range(d, -1, -1):
        for rest in _exponents(k - 1, d - first):
            yield (first,) + rest


def _coefficient(a: TruncPoly, b: TruncPoly, e) -> complex:
    total = 0
    for e1, c1 in a.terms.items():
        e2 = tuple(x - y for x, y in zip(e, e1))
        if min(e2) < 0:
            continue
        c2 = b.terms.get(e2)
        if c2 is not None:
            total += c1 * c2
    return total


def _phi_sign(lat: Lattice, e) -> int:
    n = lat.rank
    charges = []
    for j in range(n):
        charges += [lat.basis(j)] * e[j]
        charges += [tuple(-x for x in lat.basis(j))] * e[n + j]
    return _product_sign(lat, charges)


@dataclass
class LagrangeResult:
    inverse: AlgebraMap
    convention: str
    discrepancy: float
    discrepancies: dict


def invert_lagrange(Y: FlatSection, convention: str = "auto", tol: float = 1e-10) -> LagrangeResult:
    """Inverse via Good's multivariate Lagrange formula, checked against invert_adic.

    convention "auto" tries both sign conventions and keeps the one matching the
    adic inverse; a mismatch beyond tol is an error.
    """
    adic = invert_adic(Y)
    scale = max(1.0, max(s.max_abs() for s in adic.images))
    cands = [CORRECTED, PRINTED] if convention == "auto" else [convention]
    disc = {}
    best = None
    for conv in cands:
        imgs = _good_inverse(Y, conv)
        d = max(a.distance(b) for a, b in zip(imgs, adic.images)) / scale
        disc[conv] = d
        if best is None or d < best[2]:
            best = (conv, imgs, d)
    conv, imgs, d = best
    if d > tol:
        raise AlgebraError(f"Lagrange inversion disagrees with the adic inverse ({d:.3e}); "
                           f"sign convention fault")
    return LagrangeResult(AlgebraMap(AUTOMORPHISM, imgs), conv, d, disc)


# connection form ---------------------------------------------------------

def _connection_images(Y: FlatSection, lam: float, Yinv: AlgebraMap) -> list:
    """A(x_{g_i}) = sum over terms c s^m x_a of Y^{-1}(x_{g_i}) of c s^m (dY(x_a) + d(a) Y(x_a))."""
    Z = Y.Z
    t = Y.t
    out = []
    for y in Yinv.images:
        acc = TruncSeries.zero(Y.lattice, Y.order, exact=False)
        for (a, m), c in y.terms.items():
            za = Z(a)
            da = -za / (t * t) + lam * lam * za.conjugate()
            piece = Y.derivative_of_charge(a) + Y.image_of_charge(a).scale(da)
            shifted = {(b, tuple(x + u for x, u in zip(m, mb))): c * cb for (b, mb), cb in piece.terms.items()}
            acc = acc + TruncSeries(Y.lattice, Y.order, shifted, exact=False)
        out.append(acc)
    return out


def connection_form(data: BPSData, t: complex, lam: float, N: int, q: QuadSpec = QuadSpec(),
                    sums: TreeSums | None = None) -> AlgebraMap:
    """The derivation A(t) = d/dt(Yhat) o Yhat^{-1}, Yhat = Y(t) o exp(Z/t + lam^2 conj(Z) t)."""
    Y = flat_section(data, t, lam, N, q, sums)
    return AlgebraMap(DERIVATION, _connection_images(Y, lam, invert_adic(Y)))


@dataclass
class LaurentData:
    coeff_m2: AlgebraMap
    coeff_m1: AlgebraMap     # the deformation operator Q
    coeff_0: AlgebraMap
    residual: float          # max deviation from the three-term Laurent shape, relative
    m2_error: float          # distance of coeff_m2 from -Z
    radius: float
    points: int

    @property
    def Q(self) -> AlgebraMap:
        return self.coeff_m1


class LaurentValidationError(RuntimeError):
    pass


def default_radius(Z: CentralCharge, lam: float, support) -> float:
    zmin = min(abs(Z(a)) for a in support) if support else 1.0
    return min(0.01 / lam, zmin / 40.0)


def laurent_extract(data: BPSData, lam: float, N: int, q: QuadSpec = QuadSpec(), M: int = 64,
                    rho: float | None = None, check: bool = True, m2_tol: float = 1e-8) -> LaurentData:
    """Laurent coefficients of A at t = 0 by the trapezoid rule on a circle."""
    if M < 32:
        raise ValueError("use at least 32 circle points")
    lat = data.lattice
    sums = TreeSums(data, lam, N, q)
    rho = default_radius(data.Z, lam, list(sums.dt)) if rho is None else rho
    offset = 0.5 * 2 * math.pi / M + 0.0123
    samples = []
    for j in range(M):
        t = rho * cmath.exp(1j * (offset + 2 * math.pi * j / M))
        A = connection_form(data, t, lam, N, q, sums) if sums.terms else None
        if A is None:
            Y = flat_section(data, t, lam, N, q, sums)
            A = AlgebraMap(DERIVATION, _connection_images(Y, lam, AlgebraMap.identity(lat, N, exact=False)))
        samples.append((t, A))
    n = lat.rank

    def moment(power):
        imgs = []
        for i in range(n):
            acc = {}
            for t, A in samples:
                f = t ** power / M
                for k, v in A.images[i].terms.items():
                    acc[k] = acc.get(k, 0) + f * v
            imgs.append(TruncSeries(lat, N, acc, exact=False))
        return AlgebraMap(DERIVATION, imgs)

    c_m2, c_m1, c_0 = moment(2), moment(1), moment(0)
    scale = max(1e-300, max(s.max_abs() for s in c_m1.images + c_0.images))
    res = 0.0
    for t, A in samples:
        for i in range(n):
            model = c_m2.images[i].scale(1 / t ** 2) + c_m1.images[i].scale(1 / t) + c_0.images[i]
            res = max(res, A.images[i].distance(model))
    minusZ = AlgebraMap.diagonal(lat, N, [-v for v in data.Z.values])
    m2err = c_m2.distance(minusZ) / max(abs(v) for v in data.Z.values)
    out = LaurentData(c_m2, c_m1, c_0, res / scale, m2err, rho, M)
    if check and m2err > m2_tol:
        raise LaurentValidationError(f"coefficient of t^-2 differs from -Z by {m2err:.3e}")
    return out


def q_from_trees(data: BPSData, lam: float, N: int, q: QuadSpec = QuadSpec(),
                 sums: TreeSums | None = None) -> AlgebraMap:
    """Q = [Z, Y_1] with Y(t) = id + t Y_1 + O(t^2), read off the z^1 coefficients of H_T.

    Independent of the contour route: H_T(-t) = -h_{T,1} t + O(t^2).
    """
    sums = sums or TreeSums(data, lam, N, q)
    lat = data.lattice
    imgs = []
    for g in lat.generators():
        terms = {}
        for tt in sums.terms:
            a = tt.tree.label
            p = lat.pairing(g, a)
            if p == 0:
                continue
            h1 = sums.integrator.z_coefficient(tt.tree, 1)
            b = add(g, tt.charge)
            c = -float(tt.coeff) * p * tt.sign * h1 * (-1 if lat.pairing(g, tt.charge) % 2 else 1) * data.Z(tt.charge)
            key = (b, tt.sdeg)
            terms[key] = terms.get(key, 0) + c
        imgs.append(TruncSeries(lat, N, terms, exact=False))
    return AlgebraMap(DERIVATION, imgs)


def full_image(Y: FlatSection, a) -> TruncSeries:
    """Yhat(t)(x_a) = exp(Z(a)/t + lam^2 conj(Z(a)) t) Y(t)(x_a)."""
    za = Y.Z(a)
    return Y.image_of_charge(a).scale(cmath.exp(za / Y.t + Y.lam ** 2 * za.conjugate() * Y.t))


def flatness_defect(data: BPSData, t: complex, lam: float, N: int, q: QuadSpec = QuadSpec(),
                    delta: float = 1e-5) -> float:
    """Relative gap between the central difference of Yhat(x_{g_i}) and A(Yhat(x_{g_i}))."""
    sums = TreeSums(data, lam, N, q)
    Y = flat_section(data, t, lam, N, q, sums)
    A = AlgebraMap(DERIVATION, _connection_images(Y, lam, invert_adic(Y)))
    Yp = flat_section(data, t + delta, lam, N, q, sums)
    Ym = flat_section(data, t - delta, lam, N, q, sums)
    worst = 0.0
    for g in data.lattice.generators():
        fd = (full_image(Yp, g) - full_image(Ym, g)).scale(1 / (2 * delta))
        exact = A.apply(full_image(Y, g))
        worst = max(worst, fd.distance(exact) / max(exact.max_abs(), 1e-300))
    return worst


def cut_crossing(data: BPSData, angle: float, r: float, lam: float, N: int, q: QuadSpec = QuadSpec(),
                 offset: float = 1e-2, laurent: LaurentData | None = None) -> float:
    """Deviation of A from its Laurent form just either side of a cut.

    angle is the ray angle seen by -t; A is evaluated at t = -r e^{i(angle +- offset)}.
    Single-valuedness means both sides follow the same three-term Laurent form.
    """
    ld = laurent or laurent_extract(data, lam, N, q)
    sums = TreeSums(data, lam, N, q)
    worst = 0.0
    for sgn in (1, -1):
        t = -r * cmath.exp(1j * (angle + sgn * offset))
        A = connection_form(data, t, lam, N, q, sums)
        for i, img in enumerate(A.images):
            model = ld.coeff_m2.images[i].scale(1 / t ** 2) + ld.coeff_m1.images[i].scale(1 / t) + ld.coeff_0.images[i]
            worst = max(worst, img.distance(model) / max(img.max_abs(), 1e-300))
    return worst


def straddle(lattice_values, delta: float) -> tuple:
    """Central charges at angular distance delta/2 either side of the wall arg Z_1 = arg Z_2.

    lattice_values = (Z_1, Z_2) on the wall.  Returns (Z with arg Z_1 > arg Z_2,
    Z with arg Z_1 < arg Z_2).
    """
    z1, z2 = (complex(v) for v in lattice_values)
    h = cmath.exp(0.5j * delta)
    return CentralCharge([z1 * h, z2 / h]), CentralCharge([z1 / h, z2 * h])


@dataclass
class IsomonodromyReport:
    Q_left: AlgebraMap
    Q_right: AlgebraMap
    max_difference: float
    omega_jumps: bool


def isomonodromy_check(lattice: Lattice, omega_left: Spectrum, omega_right: Spectrum, Z_wall,
                       delta: float, lam: float, N: int, q: QuadSpec = QuadSpec(), M: int = 64) -> IsomonodromyReport:
    """Q on both sides of a wall: each s-coefficient should move by O(delta)."""
    Zl, Zr = straddle(Z_wall, delta)
    Ql = laurent_extract(BPSData(lattice, omega_left, Zl), lam, N, q, M).Q
    Qr = laurent_extract(BPSData(lattice, omega_right, Zr), lam, N, q, M).Q
    jumps = dt_table(omega_left, N) != dt_table(omega_right, N)
    return IsomonodromyReport(Ql, Qr, Ql.distance(Qr), jumps)


# the small-scale limit ---------------------------------------------------

def map_distance(a: AlgebraMap, b: AlgebraMap) -> float:
    return a.distance(b)


def _combine(maps: list, weights: list) -> AlgebraMap:
    n = len(maps[0].images)
    imgs = []
    for i in range(n):
        acc = maps[0].images[i].scale(weights[0])
        for m, w in zip(maps[1:], weights[1:]):
            acc = acc + m.images[i].scale(w)
        imgs.append(acc)
    return AlgebraMap(maps[0].kind, imgs)


def richardson(lams: list, values: list, model: str = "lambda2") -> AlgebraMap:
    """Extrapolate to lam = 0 with error basis lam^2 (or lam^2 log lam, lam^2, lam^4 log lam, lam^4)."""
    lams = [float(x) for x in lams]
    if model == "lambda2":
        basis = [lambda x: x ** 2]
    elif model == "lambda2log":
        basis = [lambda x: x ** 2 * math.log(x), lambda x: x ** 2,
                 lambda x: x ** 4 * math.log(x), lambda x: x ** 4]
    else:
        raise ValueError(f"unknown model {model!r}")
    k = min(len(basis), len(lams) - 1)
    use = sorted(range(len(lams)), key=lambda j: lams[j])[:k + 1]
    mat = np.array([[1.0] + [f(lams[j]) for f in basis[:k]] for j in use])
    # weights w with sum_j w_j (1, f(lam_j)) = (1, 0, ...): exact on the model
    rhs = np.zeros(k + 1)
    rhs[0] = 1.0
    w = np.linalg.solve(mat.T, rhs)
    return _combine([values[j] for j in use], list(w))


def observed_order(lams: list, diffs: list) -> list:
    """log2 ratios of successive distances to the limit."""
    out = []
    for j in range(1, len(diffs)):
        if diffs[j] > 0 and diffs[j - 1] > 0:
            out.append(math.log(diffs[j - 1] / diffs[j]) / math.log(lams[j - 1] / lams[j]))
    return out


def f_from_ad(V: AlgebraMap) -> tuple:
    """Recover f with V = ad f from the generator images.

    Returns (f, worst cross-check discrepancy between generators).
    """
    lat = V.lattice
    gens = sorted(lat.generators())
    f = {}
    seen = {}
    worst = 0.0
    for g in gens:
        i = lat.generators().index(g)
        for (b, m), c in V.images[i].terms.items():
            a = tuple(x - y for x, y in zip(b, g))
            p = lat.pairing(a, g)
            if p == 0:
                continue
            val = c / ((-p) if p % 2 else p)
            key = (a, m)
            if key in seen:
                worst = max(worst, abs(seen[key] - val))
            else:
                seen[key] = val
                f[key] = val
    # charges seen only through one generator must vanish in the other images
    for (a, m), val in f.items():
        for g in gens:
            p = lat.pairing(a, g)
            if p == 0:
                continue
            i = lat.generators().index(g)
            c = V.images[i].terms.get((add(a, g), m), 0)
            worst = max(worst, abs(c / ((-p) if p % 2 else p) - val))
    return TruncSeries(lat, V.order, f, exact=False), worst


@dataclass
class JoyceReport:
    V: AlgebraMap
    f: TruncSeries
    lams: list
    Qs: list
    distances: list
    monotone: bool
    orders: list
    f_consistency: float
    model: str
    laurent: list = field(default_factory=list)


def joyce_limit(data: BPSData, lams, N: int, q: QuadSpec = QuadSpec(), M: int = 64,
                model: str = "lambda2log", report_lams=None, route: str = "laurent") -> JoyceReport:
    """Q at each lam, extrapolated to lam -> 0, and f with V = ad f.

    route "laurent" extracts Q by the contour; "trees" uses q_from_trees.
    """
    lams = sorted((float(x) for x in lams), reverse=True)
    if route == "laurent":
        lds = [laurent_extract(data, lam, N, q, M) for lam in lams]
        Qs = [ld.Q for ld in lds]
    elif route == "trees":
        lds = []
        Qs = [q_from_trees(data, lam, N, q) for lam in lams]
    else:
        raise ValueError(f"unknown route {route!r}")
    V = richardson(lams, Qs, model)
    dists = [map_distance(Q, V) for Q in Qs]
    check = report_lams if report_lams is not None else lams
    idx = [lams.index(float(x)) for x in sorted(check, reverse=True)]
    sub = [dists[j] for j in idx]
    monotone = all(sub[j + 1] < sub[j] for j in range(len(sub) - 1))
    f, cons = f_from_ad(V)
    return JoyceReport(V, f, lams, Qs, dists, monotone, observed_order([lams[j] for j in idx], sub),
                       cons, model, lds)


# PDE and Frobenius-type residuals ----------------------------------------

def _log_derivative(f: TruncSeries, Z: CentralCharge, i: int) -> TruncSeries:
    """sum_a (a_i / Z(a)) f^a x_a."""
    terms = {}
    for (a, m), c in f.terms.items():
        if a[i]:
            terms[(a, m)] = c * a[i] / Z(a)
    return TruncSeries(f.lattice, f.order, terms, exact=False)


def joyce_pde_residual(f_of_Z, Z: CentralCharge, step: float = 1e-3) -> dict:
    """max over directions i of |d_i f - [f, L_i f]|, with d_i a central difference in Z_i.

    f_of_Z maps a CentralCharge to the TruncSeries f.  Also reports the
    Cauchy-Riemann defect of the finite differences (holomorphy).
    """
    n = Z.rank
    f0 = f_of_Z(Z)
    res, cr, scale = 0.0, 0.0, max(f0.max_abs(), 1e-300)
    for i in range(n):
        e = [0] * n
        e[i] = 1

        def shifted(d):
            return f_of_Z(CentralCharge([v + d * ei for v, ei in zip(Z.values, e)]))

        dre = (shifted(step) - shifted(-step)).scale(1 / (2 * step))
        dim = (shifted(1j * step) - shifted(-1j * step)).scale(1 / (2j * step))
        rhs = f0.bracket(_log_derivative(f0, Z, i))
        res = max(res, dre.distance(rhs))
        cr = max(cr, dre.distance(dim))
    return {"residual": res, "relative": res / scale, "cauchy_riemann": cr, "scale": scale}


def frobenius_residuals(f_of_Z, Z: CentralCharge, step: float = 1e-3) -> dict:
    """Residuals of the Frobenius-type conditions for V = ad f on a finite-difference Z-grid.

    flatness: d_i(L_j f) - d_j(L_i f) + [L_i f, L_j f]
    parallel V: d_i f + [L_i f, f]
    Euler/Higgs: the identity d(U) + [w, U] - [C, V] + C = 0 with U = Z, C = -dZ
    skewness: g(V x_a, x_b) + g(x_a, V x_b) from the computed coefficients
    """
    n = Z.rank
    f0 = f_of_Z(Z)
    lat = f0.lattice

    def at(i, d):
        vals = list(Z.values)
        vals[i] += d
        return CentralCharge(vals)

    L = [_log_derivative(f0, Z, i) for i in range(n)]
    dL = {}
    df = []
    for i in range(n):
        fp, fm = f_of_Z(at(i, step)), f_of_Z(at(i, -step))
        df.append((fp - fm).scale(1 / (2 * step)))
        for j in range(n):
            dL[(i, j)] = (_log_derivative(fp, at(i, step), j) - _log_derivative(fm, at(i, -step), j)).scale(1 / (2 * step))
    flat = 0.0
    for i in range(n):
        for j in range(i + 1, n):
            flat = max(flat, (dL[(i, j)] - dL[(j, i)] + L[i].bracket(L[j])).max_abs())
    par = max((df[i] + L[i].bracket(f0)).max_abs() for i in range(n))
    # Euler identity on generators, per direction i: dZ_i + [ad L_i f, Z] - [C_i, ad f] + C_i
    euler = 0.0
    for i in range(n):
        for k in range(n):
            x = TruncSeries.monomial(lat, f0.order, lat.basis(k), exact=False)
            dz = x.scale(1.0 if i == k else 0.0)
            # [ad a, Z](x) = a-bracket of Z(x) minus Z of the bracket
            zx = x.scale(Z(lat.basis(k)))
            comm = L[i].bracket(zx) - _apply_Z(Z, L[i].bracket(x))
            ci = lambda s: _apply_dZ(s, i).scale(-1.0)
            cv = ci(f0.bracket(x)) - f0.bracket(ci(x))
            total = dz + comm - cv + ci(x)
            euler = max(euler, total.max_abs())
    skew = 0.0
    fterms = f0.terms
    for (a, m), c in fterms.items():
        c2 = fterms.get((tuple(-x for x in a), m), 0)
        skew = max(skew, abs(c - c2))
    return {"flatness": flat, "parallel": par, "euler": euler, "skewness": skew}


def _apply_Z(Z: CentralCharge, s: TruncSeries) -> TruncSeries:
    return TruncSeries(s.lattice, s.order, {k: v * Z(k[0]) for k, v in s.terms.items()}, exact=False)


def _apply_dZ(s: TruncSeries, i: int) -> TruncSeries:
    """Component i of dZ as a derivation: x_a -> a_i x_a."""
    return TruncSeries(s.lattice, s.order, {k: v * k[0][i] for k, v in s.terms.items()}, exact=False)
