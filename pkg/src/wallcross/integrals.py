"""Nested Cauchy-kernel ray integrals attached to decorated trees.

Every vertex v integrates over the ray through Z(a(v)).  Writing
w = e^{i theta} r0 e^u with r0 the saddle radius turns the exponential factor into
exp(-2 m cosh u), and the trapezoid rule in u converges geometrically.  Child
integrals are evaluated on the parent's nodes through a Cauchy matrix, so a whole
tree costs one matrix-vector product per edge.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import numpy as np

from .lattice import CentralCharge, angle_gap
from .trees import DecoratedTree

TWO_PI_I = 2j * math.pi


class NearRayError(ValueError):
    pass


class NonConvergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class QuadSpec:
    h: float = 0.05           # base step of the u-grid
    U: float = 6.0            # minimal half-width of the u-grid
    tol: float = 1e-10        # relative change accepted by the refinement loop
    eps: float = 1e-3         # closest admissible angle between an evaluation point and a ray
    max_refine: int = 6
    tail: float = 46.0        # nodes whose exponent is below -tail (relative) are dropped
    gap_factor: float = 5.0   # step is capped by (angular gap to the nearest pole) / gap_factor

    def __post_init__(self):
        if self.h <= 0 or self.U <= 0 or self.tol <= 0 or self.eps < 0:
            raise ValueError("invalid quadrature parameters")


H_KIND = "H"
G_KIND = "G"


def _cauchy_apply(points: np.ndarray, nodes: np.ndarray, weights: np.ndarray, kind: str) -> np.ndarray:
    """sum_j K(x_i, w_j) weights_j with K = x/(w-x) (H) or (w+x)/(w-x) (G)."""
    out = np.empty(points.shape, dtype=complex)
    rows = max(1, 2_000_000 // max(len(nodes), 1))
    for s in range(0, len(points), rows):
        x = points[s:s + rows, None]
        d = nodes[None, :] - x
        if kind == H_KIND:
            k = x / d
        else:
            k = (nodes[None, :] + x) / d
        out[s:s + rows] = k @ weights
    return out


class GraphIntegrator:
    """Evaluates graph integrals for one central charge and one scale parameter.

    kind "H": exponent -Z/w - lam^2 conj(Z) w, kernel z/(w - z), scale = lam.
    kind "G": exponent -R Z/w - R conj(Z) w, kernel (w + z)/(w - z), scale = R.
    """

    def __init__(self, Z: CentralCharge, scale: float, kind: str = H_KIND, h: float = 0.05,
                 U: float = 6.0, tail: float = 46.0, tilts: dict | None = None):
        if scale <= 0:
            raise ValueError("scale parameter must be positive")
        self.Z = Z
        self.scale = float(scale)
        self.kind = kind
        self.h = float(h)
        self.U = float(U)
        self.tail = float(tail)
        self.tilts = dict(tilts or {})
        self._contours = {}
        self._integrands = {}
        self._child = {}

    # geometry -----------------------------------------------------------
    def saddle(self, a) -> tuple:
        """(theta, r0, m): ray angle, saddle radius, and m with exponent -2 m cosh u."""
        z = self.Z(a)
        if z == 0:
            raise ValueError(f"Z vanishes on {a}")
        theta = cmath.phase(z)
        if self.kind == H_KIND:
            return theta, 1.0 / self.scale, self.scale * abs(z)
        return theta, 1.0, self.scale * abs(z)

    def contour(self, a, growth: int = 0, tilt: float | None = None):
        """Nodes w_j, trapezoid weights times the exponential factor, for the ray of a."""
        tilt = self.tilts.get(tuple(a), 0.0) if tilt is None else tilt
        key = (tuple(a), growth, tilt)
        c = self._contours.get(key)
        if c is not None:
            return c
        theta, r0, m = self.saddle(a)
        mc = m * math.cos(tilt)
        if mc <= 0:
            raise ValueError("tilt must stay inside the half-plane of decay")

        def logsize(u):
            # log-magnitude of exponential factor times kernel growth |w|^{-growth}
            return -2 * mc * np.cosh(u) + growth * np.abs(u)

        peak = max(logsize(np.linspace(-8, 8, 321)))
        U = self.U
        while logsize(U) > peak - self.tail and U < 60:
            U += 1.0
        J = int(math.ceil(U / self.h))
        u = self.h * np.arange(-J, J + 1)
        w = cmath.exp(1j * (theta + tilt)) * r0 * np.exp(u)
        expo = -m * (np.exp(-u - 1j * tilt) + np.exp(u + 1j * tilt))
        keep = logsize(u) >= peak - self.tail
        c = (w[keep], np.exp(expo[keep]) * (self.h / TWO_PI_I))
        self._contours[key] = c
        return c

    # recursion ----------------------------------------------------------
    def integrand(self, tree: DecoratedTree, growth: int = 0):
        """(nodes, weights) of the outermost integral of tree: the Cauchy-kernel density."""
        key = (tree.key, growth)
        r = self._integrands.get(key)
        if r is not None:
            return r
        w, base = self.contour(tree.label, growth)
        g = base.copy()
        for child in tree.children:
            g = g * self.child_values(child, tree.label, growth)
        r = (w, g)
        self._integrands[key] = r
        return r

    def child_values(self, child: DecoratedTree, parent_label, growth: int = 0) -> np.ndarray:
        key = (child.key, tuple(parent_label), growth)
        v = self._child.get(key)
        if v is None:
            pw, _ = self.contour(parent_label, growth)
            cw, cg = self.integrand(child)
            v = _cauchy_apply(pw, cw, cg, self.kind)
            self._child[key] = v
        return v

    # root functionals ---------------------------------------------------
    def value(self, tree: DecoratedTree | None, z) -> complex | np.ndarray:
        """H_T(z) (or G_T(z)); z may be an array."""
        if tree is None:
            return np.ones_like(np.asarray(z, dtype=complex)) if np.ndim(z) else 1.0 + 0j
        w, g = self.integrand(tree)
        zz = np.atleast_1d(np.asarray(z, dtype=complex))
        out = _cauchy_apply(zz, w, g, self.kind)
        return out if np.ndim(z) else complex(out[0])

    def z_coefficient(self, tree: DecoratedTree, k: int) -> complex:
        """Coefficient of z^k: the kernel becomes w^{-k}."""
        if k < 1:
            raise ValueError("k must be positive")
        w, g = self.integrand(tree, growth=k)
        return complex(np.sum(w ** (-k) * g))

    def z_derivative(self, tree: DecoratedTree | None, z) -> complex | np.ndarray:
        """d/dz of H_T: kernel w/(w - z)^2."""
        if self.kind != H_KIND:
            raise ValueError("z_derivative is defined for H integrals")
        if tree is None:
            return np.zeros_like(np.asarray(z, dtype=complex)) if np.ndim(z) else 0j
        w, g = self.integrand(tree)
        zz = np.atleast_1d(np.asarray(z, dtype=complex))
        out = np.array([np.sum(w / (w - x) ** 2 * g) for x in zz])
        return out if np.ndim(z) else complex(out[0])


# gap-aware step selection and refinement ----------------------------------

def tree_gap(tree: DecoratedTree, Z: CentralCharge) -> float:
    """Smallest angular gap between the rays of adjacent vertices."""
    best = math.pi
    for p, c in tree.edges():
        best = min(best, angle_gap(cmath.phase(Z(p)), cmath.phase(Z(c))))
    return best


def point_gap(tree: DecoratedTree, Z: CentralCharge, z: complex) -> float:
    return angle_gap(cmath.phase(z), cmath.phase(Z(tree.label)))


def base_step(q: QuadSpec, gaps) -> float:
    h = q.h
    for g in gaps:
        h = min(h, g / q.gap_factor)
    return h


def _refine(compute, q: QuadSpec, h0: float, what: str):
    prev = compute(h0)
    h = h0
    for _ in range(q.max_refine):
        h /= 2
        cur = compute(h)
        scale = max(abs(cur), 1e-300)
        if abs(cur - prev) <= q.tol * scale:
            return cur
        prev = cur
    raise NonConvergenceError(f"{what}: refinement did not reach tol={q.tol} (last change "
                              f"{abs(cur - prev):.3e} at h={h:.3e})")


def _check_point(tree: DecoratedTree, Z: CentralCharge, z: complex, q: QuadSpec):
    g = point_gap(tree, Z, z)
    if g <= q.eps:
        raise NearRayError(f"evaluation point within {g:.2e} rad of the ray of {tree.label}")
    return g


def _check_tree(tree: DecoratedTree, Z: CentralCharge, q: QuadSpec):
    g = tree_gap(tree, Z)
    if g <= q.eps:
        raise NearRayError(f"tree {tree.key} has adjacent vertices on (nearly) coincident rays; use pv_split")
    return g


def h_integral(tree: DecoratedTree | None, z: complex, Z: CentralCharge, lam: float,
               q: QuadSpec = QuadSpec()) -> complex:
    """H_T(z) with refinement to q.tol.  H of the empty tree is 1."""
    if tree is None:
        return 1.0 + 0j
    gaps = [_check_tree(tree, Z, q), _check_point(tree, Z, z, q)]
    return _refine(lambda h: GraphIntegrator(Z, lam, H_KIND, h, q.U, q.tail).value(tree, z),
                   q, base_step(q, gaps), "h_integral")


def h_z_coefficient(tree: DecoratedTree, k: int, Z: CentralCharge, lam: float,
                    q: QuadSpec = QuadSpec()) -> complex:
    gaps = [_check_tree(tree, Z, q)]
    return _refine(lambda h: GraphIntegrator(Z, lam, H_KIND, h, q.U, q.tail).z_coefficient(tree, k),
                   q, base_step(q, gaps), "h_z_coefficient")


def dh_dz(tree: DecoratedTree | None, z: complex, Z: CentralCharge, lam: float,
          q: QuadSpec = QuadSpec()) -> complex:
    if tree is None:
        return 0j
    gaps = [_check_tree(tree, Z, q), _check_point(tree, Z, z, q)]
    return _refine(lambda h: GraphIntegrator(Z, lam, H_KIND, h, q.U, q.tail).z_derivative(tree, z),
                   q, base_step(q, gaps), "dh_dz")


def g_integral(tree: DecoratedTree | None, zeta: complex, Z: CentralCharge, R: float,
               q: QuadSpec = QuadSpec()) -> complex:
    """G_T(zeta): kernel (w + zeta)/(w - zeta), exponent -R Z/w - R conj(Z) w."""
    if tree is None:
        return 1.0 + 0j
    gaps = [_check_tree(tree, Z, q), _check_point(tree, Z, zeta, q)]
    return _refine(lambda h: GraphIntegrator(Z, R, G_KIND, h, q.U, q.tail).value(tree, zeta),
                   q, base_step(q, gaps), "g_integral")


def tilted_h_integral(tree: DecoratedTree, z: complex, Z: CentralCharge, lam: float, tilt: float,
                      q: QuadSpec = QuadSpec()) -> complex:
    """H_T(z) with the outermost contour rotated by tilt (valid while no ray or z is crossed)."""
    gaps = [_check_tree(tree, Z, q), _check_point(tree, Z, z, q)]
    tilts = {tree.label: tilt}
    for c in tree.children:
        if any(tuple(v) == tree.label for v in c.vertices()):
            raise ValueError("tilt applies to the root label only; it also occurs below the root")
    return _refine(lambda h: GraphIntegrator(Z, lam, H_KIND, h, q.U, q.tail, tilts).value(tree, z),
                   q, base_step(q, gaps), "tilted_h_integral")


# principal values on coincident rays -------------------------------------

@dataclass
class PlemeljSplit:
    points: np.ndarray
    principal: np.ndarray
    jump: np.ndarray

    @property
    def above(self) -> np.ndarray:
        """Boundary values from the counterclockwise side."""
        return self.principal + 0.5 * self.jump

    @property
    def below(self) -> np.ndarray:
        return self.principal - 0.5 * self.jump


def pv_split(parent_label, child: DecoratedTree, Z: CentralCharge, lam: float,
             q: QuadSpec = QuadSpec(), h: float | None = None) -> PlemeljSplit:
    """Boundary values of H_child on the nodes of the parent's ray when both rays coincide.

    The principal value uses a child grid shifted by h/2, so every parent node is a
    midpoint; the jump across the ray is the child's integrand density at the node.
    """
    h = q.h if h is None else h
    tp = cmath.phase(Z(parent_label))
    tc = cmath.phase(Z(child.label))
    if angle_gap(tp, tc) > q.eps:
        raise ValueError("pv_split needs the child ray to coincide with the parent ray")
    integ = GraphIntegrator(Z, lam, H_KIND, h, q.U, q.tail)
    pw, _ = integ.contour(parent_label)
    _, r0, m = integ.saddle(child.label)
    # child nodes at half-integer multiples of h on the common ray
    J = int(math.ceil(max(q.U, 8.0) / h))
    u = h * (np.arange(-J, J) + 0.5)
    cw = cmath.exp(1j * tc) * r0 * np.exp(u)
    g = np.exp(-m * (np.exp(-u) + np.exp(u))) * (h / TWO_PI_I)
    for gc in child.children:
        if angle_gap(cmath.phase(Z(gc.label)), tc) <= q.eps:
            raise NearRayError("grandchild on the same ray; nested principal values are not supported")
        gw, gg = integ.integrand(gc)
        g = g * _cauchy_apply(cw, gw, gg, H_KIND)
    principal = _cauchy_apply(pw, cw, g, H_KIND)
    # density at the parent nodes: exponential factor times grandchildren values
    zc = Z(child.label)
    dens = np.exp(-zc / pw - lam * lam * np.conj(zc) * pw)
    for gc in child.children:
        gw, gg = integ.integrand(gc)
        dens = dens * _cauchy_apply(pw, gw, gg, H_KIND)
    return PlemeljSplit(pw, principal, dens)


# estimate sweep ----------------------------------------------------------

@dataclass
class EstimateReport:
    C1: float
    C2: float
    fit_C1: float
    fit_C2: float
    samples: list = field(default_factory=list)   # (tree key, lam, n, S, |H|, margin)
    violations: list = field(default_factory=list)
    margins_improve: bool = True
    skipped: list = field(default_factory=list)    # trees with adjacent vertices on one ray

    @property
    def min_margin(self) -> float:
        return min(s[5] for s in self.samples) if self.samples else float("inf")


def _abs_z_sum(tree: DecoratedTree, Z: CentralCharge) -> float:
    return sum(abs(Z(v)) for v in tree.vertices())


def estimate_check(trees: list, Z: CentralCharge, lam_grid, z_star: complex, q: QuadSpec = QuadSpec(),
                   calibrate=None, refine: bool = False, safety: float = 1.0,
                   functional: str = "value", c2_factor: float = 1.0) -> EstimateReport:
    """Fit |H_T(z*)| <= C1^n exp(-C2 S), S = sum_v |Z(a(v))| lam, and report margins.

    functional "z1" fits the z^1 Taylor coefficients of H_T instead (z_star unused).
    c2_factor < 1 trades decay rate for robustness: C2 = c2_factor * fit_C2.

    Least squares on log|H| against (n, S) gives (fit_C1, fit_C2).  The reported
    pair keeps fit_C2 and takes the smallest C1 making the bound hold on the
    calibration values of lam (all of lam_grid by default); margins are then
    evaluated on the whole grid.
    """
    lam_grid = [float(x) for x in lam_grid]
    calibrate = lam_grid if calibrate is None else [float(x) for x in calibrate]
    skipped = [t.key for t in trees if tree_gap(t, Z) <= q.eps]
    trees = [t for t in trees if tree_gap(t, Z) > q.eps]
    vals = {}
    for lam in sorted(set(lam_grid) | set(calibrate)):
        integ = GraphIntegrator(Z, lam, H_KIND, q.h, q.U, q.tail)
        for t in trees:
            if functional == "z1":
                v = h_z_coefficient(t, 1, Z, lam, q) if refine else integ.z_coefficient(t, 1)
            elif refine:
                v = h_integral(t, z_star, Z, lam, q)
            else:
                v = integ.value(t, z_star)
            vals[(t.key, lam)] = (t.size, _abs_z_sum(t, Z) * lam, abs(v))
    rows = [(n, S, a) for (_, lam), (n, S, a) in vals.items() if lam in calibrate and a > 0]
    A = np.array([[n, -S] for n, S, _ in rows], dtype=float)
    b = np.array([math.log(a) for _, _, a in rows])
    (logc1, c2), *_ = np.linalg.lstsq(A, b, rcond=None)
    fit_c1, fit_c2 = math.exp(logc1), float(c2)
    C2 = c2_factor * fit_c2
    # smallest C1 for this C2 on the calibration samples
    need = max((math.log(a) + C2 * S) / n for n, S, a in rows)
    C1 = math.exp(need) * safety
    rep = EstimateReport(C1, C2, fit_c1, fit_c2, skipped=skipped)
    by_tree = {}
    for (key, lam), (n, S, a) in sorted(vals.items()):
        if lam not in lam_grid:
            continue
        bound = n * math.log(C1) - C2 * S
        margin = bound - (math.log(a) if a > 0 else -math.inf)
        rep.samples.append((key, lam, n, S, a, margin))
        by_tree.setdefault(key, []).append((lam, margin))
        if not margin > 0:
            rep.violations.append((key, lam, margin))
    for key, ms in by_tree.items():
        ms.sort()
        if ms[-1][1] < ms[0][1]:
            rep.margins_improve = False
    return rep
