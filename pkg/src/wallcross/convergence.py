"""Comparison series for the tree expansions: the functional-equation operator,
its iterates, the tree formula for the iterates, and majorant bounds.

A family assigns to each charge b a series S_b(s) with nonnegative coefficients.
The operator is

    F[S]_b = prod_a (1 - y_a s^{|a|} S_a)^(-|<b,a>| |Omega(a)|),   y_a = c1 exp(-c2 |Z(a)| lam),

whose iterates from S = 1 are sums over forests with absolute tree weights.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .lattice import CentralCharge, Lattice, degree, scale, sdeg
from .polys import TruncPoly
from .stability import Spectrum, _divisors
from .trees import ABSOLUTE, enumerate_trees, pair_weight


class MajorantError(ArithmeticError):
    pass


@dataclass
class MajorantFamily:
    series: dict                # charge -> TruncPoly in the s variables
    order: int
    weights: dict               # charge in supp(Omega) -> y_a
    c1: float | None = None
    c2: float | None = None
    lam: float | None = None

    def __getitem__(self, b):
        return self.series[tuple(b)]

    def keys(self):
        return list(self.series)

    def max_change(self, other: "MajorantFamily") -> float:
        worst = 0.0
        for b, s in self.series.items():
            d = s - other.series[b]
            worst = max(worst, max((abs(float(c)) for c in d.terms.values()), default=0.0))
        return worst


def vertex_weights(omega: Spectrum, Z: CentralCharge, c1, c2, lam, N: int) -> dict:
    """y_a = c1 exp(-c2 |Z(a)| lam) on supp(Omega) in degree <= N."""
    return {a: c1 * math.exp(-c2 * abs(Z(a)) * lam) for a in omega.support() if degree(a) <= N}


def initial_family(keys, weights: dict, N: int, rank: int, **consts) -> MajorantFamily:
    keys = sorted(set(tuple(b) for b in keys) | set(weights))
    return MajorantFamily({b: TruncPoly.const(1, N, rank) for b in keys}, N, dict(weights), **consts)


def _pairing_abs(lattice: Lattice, a, b) -> int:
    return abs(lattice.pairing(a, b))


def f_operator(S: MajorantFamily, omega: Spectrum, lattice: Lattice) -> MajorantFamily:
    """One application of F, computed through the logarithm and truncated at S.order."""
    N, n = S.order, lattice.rank
    logs = {}
    for a, y in S.weights.items():
        u = TruncPoly.monomial(sdeg(a), y, N, n) * S.series[a]
        logs[a] = u.neg_log1m()
    out = {}
    for b in S.series:
        acc = TruncPoly.zero(N, n)
        for a, lg in logs.items():
            e = _pairing_abs(lattice, b, a) * abs(omega(a))
            if e:
                acc = acc + lg.scale(e)
        new = acc.exp()
        if new.min_coefficient() < 0:
            raise MajorantError(f"negative coefficient in F[S] at {b}")
        out[b] = new
    return MajorantFamily(out, N, S.weights, S.c1, S.c2, S.lam)


@dataclass
class IterationReport:
    family: MajorantFamily
    changes: list               # max coefficient change per iterate
    history: list = field(default_factory=list)


def iterate_s(i: int, omega: Spectrum, lattice: Lattice, Z: CentralCharge | None = None, c1=None, c2=None,
              lam=None, N: int = 4, keys=(), weights: dict | None = None, keep: bool = False) -> IterationReport:
    """S^(i) = F^i[1] with the max coefficient change of each step.

    Either pass (Z, c1, c2, lam) or the vertex weights y_a directly (rational
    weights keep the arithmetic exact).
    """
    if i < 1:
        raise ValueError("need at least one iterate")
    if weights is None:
        weights = vertex_weights(omega, Z, c1, c2, lam, N)
    S = initial_family(list(keys) + list(lattice.generators()), weights, N, lattice.rank, c1=c1, c2=c2, lam=lam)
    changes, hist = [], []
    for _ in range(i):
        T = f_operator(S, omega, lattice)
        changes.append(T.max_change(S))
        if keep:
            hist.append(T)
        S = T
    return IterationReport(S, changes, hist)


def tree_vertex_weights(omega: Spectrum, weights: dict, N: int) -> dict:
    """mu(g) = sum_{k | g} |Omega(g/k)| y_{g/k}^k / k^2 on multiples of the support."""
    mu = {}
    for a, y in weights.items():
        k = 1
        while degree(scale(k, a)) <= N:
            g = scale(k, a)
            mu.setdefault(g, 0)
            k += 1
    for g in mu:
        total = 0
        for k in _divisors(g):
            base = tuple(x // k for x in g)
            if base in weights:
                total += abs(omega(base)) * weights[base] ** k * Fraction(1, k * k)
        mu[g] = total
    return {g: v for g, v in mu.items() if v}


def tree_formula(beta, depth: int, omega: Spectrum, lattice: Lattice, weights: dict, N: int) -> TruncPoly:
    """sum over forests of depth <= depth of |<beta, W_F>| s^{sum |a(v)|}, absolute weights mu."""
    mu = tree_vertex_weights(omega, weights, N)
    n = lattice.rank
    out = {}
    for F in enumerate_trees(sorted(mu), N, connected=False):
        if F.depth > depth:
            continue
        if len(F) == 0:
            w = 1
        else:
            w = pair_weight(tuple(beta), F, mu, lattice, ABSOLUTE)
        if w == 0:
            continue
        m = [0] * n
        for v in F.vertices():
            for j, x in enumerate(v):
                m[j] += abs(x)
        key = tuple(m)
        out[key] = out.get(key, 0) + w
    return TruncPoly(out, N, n)


# radius certificates and domination ---------------------------------------

@dataclass
class RadiusCertificate:
    radius: float
    converged: bool
    iterations: int
    values: dict                # charge -> log S_a(r, ..., r) at the fixed point
    reason: str = ""


def certify_radius(omega: Spectrum, lattice: Lattice, weights: dict, r: float, targets=(),
                   max_iter: int = 10000, tol: float = 1e-14) -> RadiusCertificate:
    """Fixed point of L_b = -sum_a |<b,a>||Omega(a)| log(1 - y_a r^deg(a) e^{L_a}) from L = 0.

    The iteration is monotone; it converges iff the untruncated majorant is
    finite on the polydisc of radius r.  weights must cover the full support.
    """
    supp = list(weights)
    keys = sorted(set(supp) | set(tuple(t) for t in targets))
    pos = {b: i for i, b in enumerate(keys)}
    E = np.array([[_pairing_abs(lattice, b, a) * abs(float(omega(a))) for a in supp] for b in keys])
    base = np.array([weights[a] * r ** degree(a) for a in supp])
    idx = np.array([pos[a] for a in supp], dtype=int)
    live = E.any(axis=0)
    L = np.zeros(len(keys))
    for it in range(1, max_iter + 1):
        x = base * np.exp(np.minimum(L[idx], 700.0))
        if np.any(x[live] >= 1.0):
            j = int(np.argmax(np.where(live, x, -np.inf)))
            return RadiusCertificate(r, False, it, dict(zip(keys, L.tolist())),
                                     f"log argument {x[j]:.3g} >= 1 at {supp[j]}")
        new = -E @ np.log1p(-np.where(live, x, 0.0))
        change = float(np.max(np.abs(new - L)))
        L = new
        if change <= tol * max(1.0, float(np.max(np.abs(L)))):
            return RadiusCertificate(r, True, it, dict(zip(keys, L.tolist())))
    return RadiusCertificate(r, False, max_iter, dict(zip(keys, L.tolist())), "no fixed point within the iteration cap")


def max_certified_radius(omega: Spectrum, lattice: Lattice, weights: dict, hi: float = 1e6,
                         steps: int = 60) -> float:
    """Largest r (bisection in log r) with a converged certificate; 0 if none above 1e-6."""
    lo = 1e-6
    if not certify_radius(omega, lattice, weights, lo).converged:
        return 0.0
    if certify_radius(omega, lattice, weights, hi).converged:
        return hi
    for _ in range(steps):
        mid = math.sqrt(lo * hi)
        if certify_radius(omega, lattice, weights, mid).converged:
            lo = mid
        else:
            hi = mid
    return lo


@dataclass
class BoundEntry:
    beta: tuple
    kind: str                   # "Y" or "Q"
    coefficients: dict          # s-multidegree -> bound
    value_at_radius: float      # truncated majorant evaluated at (r, ..., r)
    status: str


@dataclass
class MajorantReport:
    C1: float
    C2: float
    lam: float
    order: int
    radius: float
    certificate: RadiusCertificate
    max_radius: float
    entries: list
    iterations: int

    def entry(self, beta, kind="Y") -> BoundEntry:
        for e in self.entries:
            if e.beta == tuple(beta) and e.kind == kind:
                return e
        raise KeyError((beta, kind))

    @property
    def certified(self) -> bool:
        return self.certificate.converged


def majorant_bound(lattice: Lattice, omega: Spectrum, Z: CentralCharge, lam: float, N: int, C1: float, C2: float,
                   radius: float = 2.0, targets=None, norm: str = "l1") -> MajorantReport:
    """Comparison-series bounds for the coefficients of Y(x_b) and Q(x_b).

    C1 is raised to 1 when smaller so that vertex weights dominate |DT|.
    Y-bounds are the coefficients of S_b; Q-bounds are those of log S_b times
    sum_i m_i |Z(g_i)| at multidegree m.
    """
    c1 = max(C1, 1.0)
    targets = [tuple(t) for t in (targets or lattice.generators())]
    weights = vertex_weights(omega, Z, c1, C2, lam, N)
    rep = iterate_s(N + 1, omega, lattice, Z, c1, C2, lam, N, keys=targets)
    full_weights = {a: c1 * math.exp(-C2 * abs(Z(a)) * lam) for a in omega.support()}
    cert = certify_radius(omega, lattice, full_weights, radius, targets)
    rmax = max_certified_radius(omega, lattice, full_weights)
    zabs = [abs(Z(g)) for g in lattice.generators()]
    entries = []
    point = [radius] * lattice.rank
    for b in targets:
        S = rep.family[b]
        status = "converged" if cert.converged else "divergent"
        entries.append(BoundEntry(b, "Y", {m: float(c) for m, c in sorted(S.terms.items())},
                                  float(S.evaluate(point)), status))
        G = S.log()
        qc = {m: float(c) * sum(mi * z for mi, z in zip(m, zabs)) for m, c in sorted(G.terms.items())}
        entries.append(BoundEntry(b, "Q", {m: v for m, v in qc.items() if v},
                                  sum(v * radius ** sum(m) for m, v in qc.items()), status))
    del weights
    return MajorantReport(C1, C2, lam, N, radius, cert, rmax, entries, N + 1)


def aggregate_by_sdeg(series) -> dict:
    """Sum of |coefficient| over charges for each s-multidegree."""
    out = {}
    for (_, m), c in series.terms.items():
        out[m] = out.get(m, 0.0) + abs(complex(c))
    return out


@dataclass
class DominationReport:
    ok: bool
    worst_ratio: float          # max actual / bound over compared coefficients
    failures: list


def check_domination(report: MajorantReport, images: list, kind: str = "Y", rel_tol: float = 1e-12,
                     noise: float = 1e-10, scale: float | None = None) -> DominationReport:
    """Compare aggregated |coefficients| of generator images with the bounds of the report.

    Aggregates below noise * scale are numerical noise and skipped.  scale
    defaults to the largest aggregate; pass the size of the data the images
    were extracted from when that is larger (residues taken off a circle).
    """
    gens = [e.beta for e in report.entries if e.kind == kind]
    worst, fails = 0.0, []
    aggs = [aggregate_by_sdeg(img) for img in images]
    if scale is None:
        scale = max((v for a in aggs for v in a.values()), default=0.0)
    floor = noise * scale
    for b, agg in zip(gens, aggs):
        bound = report.entry(b, kind).coefficients
        for m, actual in agg.items():
            bnd = bound.get(m, 0.0)
            if actual <= floor:
                continue
            ratio = actual / bnd if bnd > 0 else math.inf
            worst = max(worst, ratio)
            if actual > bnd * (1 + rel_tol):
                fails.append((b, m, actual, bnd))
    return DominationReport(not fails, worst, fails)
