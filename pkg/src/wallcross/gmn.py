"""Instanton-corrected coordinate series: tree sums of G integrals and their
shell-by-shell tail diagnostics."""
from __future__ import annotations

import cmath
from dataclasses import dataclass, field

from .integrals import G_KIND, GraphIntegrator, NearRayError, QuadSpec, base_step, tree_gap
from .lattice import CentralCharge, Lattice, angle_gap, degree
from .trees import enumerate_trees, weight_coefficient


@dataclass
class CoordSeries:
    R: float
    zeta: complex
    cap: int
    table: dict                 # charge -> tuple of complex components (a vector in the lattice)
    shells: dict                # total decoration degree -> sum over trees of |W_T G_T|
    tail_ratios: dict           # degree d -> shells[d] / shells[d - 1]
    trees: int = 0
    quad_change: float | None = None
    near_unit_circle: bool = False

    def c(self, alpha) -> tuple:
        return self.table.get(tuple(alpha), tuple(0j for _ in range(len(alpha))))

    @property
    def last_ratio(self) -> float:
        return self.tail_ratios[max(self.tail_ratios)] if self.tail_ratios else 0.0

    @property
    def converging(self) -> bool:
        return self.last_ratio < 1.0


def _gaps(Z: CentralCharge, trees, zeta: complex, q: QuadSpec) -> list:
    gaps = []
    a = cmath.phase(zeta)
    for t in trees:
        g = tree_gap(t, Z)
        if g <= q.eps:
            raise NearRayError(f"tree {t.key} has adjacent vertices on one ray")
        gaps.append(g)
    for r in {t.label for t in trees}:
        g = angle_gap(a, cmath.phase(Z(r)))
        if g <= q.eps:
            raise NearRayError(f"zeta lies within {g:.2e} rad of the ray of {r}")
        gaps.append(g)
    return gaps


def _norm1(a) -> int:
    return sum(abs(x) for x in a)


def coord_series(lattice: Lattice, dt: dict, Z: CentralCharge, R: float, zeta: complex, cap: int,
                 q: QuadSpec = QuadSpec(), verify: bool = False) -> CoordSeries:
    """All c_a from connected trees with total decoration degree <= cap."""
    if R <= 0:
        raise ValueError("R must be positive")
    if zeta == 0:
        raise ValueError("zeta must be nonzero")
    dt = {a: v for a, v in dt.items() if degree(a) <= cap and v}
    terms = []
    for t in enumerate_trees(sorted(dt), cap):
        c = weight_coefficient(t, dt, lattice)
        if c:
            terms.append((t, c))
    n = lattice.rank
    if not terms:
        return CoordSeries(R, zeta, cap, {}, {d: 0.0 for d in range(1, cap + 1)}, {}, 0)
    h = base_step(q, _gaps(Z, [t for t, _ in terms], zeta, q))

    def evaluate(step):
        integ = GraphIntegrator(Z, R, G_KIND, step, q.U, q.tail)
        return [integ.value(t, zeta) for t, _ in terms]

    vals = evaluate(h)
    change = None
    if verify:
        fine = evaluate(h / 2)
        change = max(abs(a - b) / max(abs(b), 1e-300) for a, b in zip(vals, fine))
        vals = fine
    table, shells = {}, {d: 0.0 for d in range(1, cap + 1)}
    for (t, c), g in zip(terms, vals):
        a = t.charge_sum
        root = t.label
        vec = table.get(a, (0j,) * n)
        table[a] = tuple(v + float(c) * r * g for v, r in zip(vec, root))
        shells[t.total_degree] += abs(float(c)) * _norm1(root) * abs(g)
    ratios = {d: shells[d] / shells[d - 1] for d in range(2, cap + 1) if shells[d - 1] > 0}
    return CoordSeries(R, zeta, cap, table, shells, ratios, len(terms), change,
                       abs(abs(zeta) - 1.0) < 0.05)


def c_alpha(alpha, zeta: complex, Z: CentralCharge, R: float, dt: dict, cap: int, lattice: Lattice,
            q: QuadSpec = QuadSpec()) -> tuple:
    """(c_alpha vector, the full series for its tail report)."""
    cs = coord_series(lattice, dt, Z, R, zeta, cap, q)
    return cs.c(alpha), cs


def pair_vector(lattice: Lattice, beta, vec) -> complex:
    """<beta, v> for v = sum_j v_j g_j."""
    return sum(v * lattice.pairing(beta, lattice.basis(j)) for j, v in enumerate(vec))


@dataclass
class DarbouxReport:
    beta: tuple
    partial_sums: list          # cumulative sums by shell 1..cap
    bound: float                # max_a |<beta, c_a>|
    argmax: tuple | None
    argmax_degree: int | None
    per_alpha: dict = field(default_factory=dict)


def darboux_pair(beta, theta, series: CoordSeries, lattice: Lattice) -> DarbouxReport:
    """Shell partial sums of sum_a <beta, c_a> exp(i theta_a), theta_a = sum_i a_i theta_i."""
    beta = tuple(beta)
    per = {a: pair_vector(lattice, beta, v) for a, v in series.table.items()}
    shells = [0j] * series.cap
    for a, v in per.items():
        phase = cmath.exp(1j * sum(x * t for x, t in zip(a, theta)))
        shells[degree(a) - 1] += v * phase
    partial, acc = [], 0j
    for s in shells:
        acc += s
        partial.append(acc)
    if per:
        arg = max(per, key=lambda a: (abs(per[a]), a))
        return DarbouxReport(beta, partial, abs(per[arg]), arg, degree(arg), per)
    return DarbouxReport(beta, partial, 0.0, None, None, per)
