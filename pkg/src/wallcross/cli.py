"""Command-line entry point: wallcross <command> --model FILE [options].

Exit status: 0 pass, 1 check failed, 2 input error, 3 numerical non-convergence.
"""
from __future__ import annotations

import argparse
import cmath
import csv
import io
import math
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import convergence as conv
from . import cv
from . import gmn
from .algebra import series_to_records
from .integrals import NearRayError, NonConvergenceError, estimate_check
from .lattice import SectorBoundaryError, degree
from .model import Model, ModelError, dumps, load_model, num
from .stability import GenericityError, continuity_check, dt_table, first_nonzero_degree
from .trees import enumerate_trees

EXIT_OK, EXIT_FAIL, EXIT_INPUT, EXIT_NONCONV = 0, 1, 2, 3


class Output:
    """Collects named files; writes them under --out when given."""

    def __init__(self, out: str | None):
        self.dir = Path(out) if out else None
        self.files = {}

    def add(self, name: str, text: str):
        self.files[name] = text
        if self.dir is not None:
            self.dir.mkdir(parents=True, exist_ok=True)
            (self.dir / name).write_text(text)


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow(r)
    return buf.getvalue()


def _charge_str(a) -> str:
    return " ".join(str(x) for x in a)


def _map_rows(m, lattice, g0=1):
    """Rows (alpha, beta, sdeg, re, im) of g(x_alpha, M x_beta)."""
    rows = []
    for g, img in zip(lattice.generators(), m.images):
        for (a, s), c in sorted(img.terms.items()):
            z = complex(c) * g0
            rows.append((_charge_str(a), _charge_str(g), _charge_str(s), num(z.real), num(z.imag)))
    return rows


def _map_json(m):
    return [series_to_records(s) for s in m.images]


def _order(args, model: Model) -> int:
    return int(args.order if args.order is not None else model.param("order", 3))


def _lam(args, model: Model) -> float:
    return float(args.lam if args.lam is not None else model.param("lambda", 2.0))


# commands ---------------------------------------------------------------

def cmd_check_continuity(model: Model, args, out: Output) -> int:
    names = list(model.chambers)
    if args.chambers:
        names = args.chambers.split(",")
    if len(names) != 2:
        raise ModelError("$.chambers", "continuity needs exactly two chambers")
    N = args.order if args.order is not None else 8
    lat = model.lattice
    (zl_name, Zl, om_l), (zr_name, Zr, om_r) = (model.z_for_chamber(c) for c in names)
    res = continuity_check(lat, om_l, Zl, om_r, Zr, N=N, exact=True)
    first = first_nonzero_degree(res)
    report = {"command": "check-continuity", "chambers": names, "central_charges": [zl_name, zr_name],
              "order": N, "status": "PASS" if first is None else "FAILED", "first_failing_degree": first,
              "residual_terms": [len(r.terms) for r in res]}
    out.add("continuity.json", dumps(report))
    print(dumps(report), end="")
    return EXIT_OK if first is None else EXIT_FAIL


def _estimate(model: Model, Z, spectrum, q, N_trees=None):
    p = model.param("estimate", {})
    lo, hi, pts = p.get("lambda_min", 5.0), p.get("lambda_max", 20.0), p.get("points", 20)
    grid = [float(x) for x in np.linspace(lo, hi, pts)]
    supp = [a for a in spectrum.support() if degree(a) == 1]
    maxv = p.get("max_vertices", 4)
    trees = [t for t in enumerate_trees(supp, maxv) if t.size <= maxv]
    z_star = sector_midpoint(Z, supp, p.get("z_star_radius", 0.01))
    rep = estimate_check(trees, Z, grid, z_star, q, calibrate=p.get("calibrate"),
                         safety=p.get("safety", 1.0), c2_factor=p.get("c2_factor", 1.0))
    return rep, grid, z_star


def sector_midpoint(Z, charges, radius: float) -> complex:
    """Point of modulus radius at the middle of the widest gap between rays of +-charges."""
    angles = sorted({cmath.phase(s * Z(a)) for a in charges for s in (1, -1)})
    if not angles:
        return radius + 0j
    best, mid = -1.0, 0.0
    for i, a in enumerate(angles):
        b = angles[(i + 1) % len(angles)]
        gap = (b - a) % (2 * math.pi) or 2 * math.pi
        if gap > best:
            best, mid = gap, a + gap / 2
    return cmath.rect(radius, mid)


def _constants(model: Model, Z, spectrum, q):
    c1, c2 = model.param("c1"), model.param("c2")
    if c1 is not None and c2 is not None:
        return float(c1), float(c2), "model"
    rep, _, _ = _estimate(model, Z, spectrum, q)
    return rep.C1, rep.C2, "estimate"


def _q_constants(Z, spectrum, lattice, lam, N, q):
    """Constants bounding the z^1 coefficients of the contributing trees at this lam."""
    trees = [tt.tree for tt in cv.contributing_trees(lattice, dt_table(spectrum, N), N)]
    rep = estimate_check(trees, Z, [lam], None, q, functional="z1")
    return rep.C1, rep.C2, "z1-fit"


def _laurent_scale(ld) -> float:
    """Size of the 1/t^2 data; Fourier noise in the residue is relative to it."""
    return max(img.max_abs() for img in ld.coeff_m2.images)


def cmd_compute_q(model: Model, args, out: Output) -> int:
    name, Z, spectrum = model.z(args.z)
    N, lam, q = _order(args, model), _lam(args, model), model.quad()
    lat = model.lattice
    data = cv.BPSData(lat, spectrum, Z)
    M = int(model.param("circle_points", 64))
    g0 = Fraction(model.param("g0", "1"))
    ld = cv.laurent_extract(data, lam, N, q, M, check=False)
    ok = ld.m2_error <= 1e-8 and ld.residual <= 1e-6
    report = {"command": "compute-q", "central_charge": name, "order": N, "lambda": lam,
              "validation": {"coeff_m2_error": ld.m2_error, "constancy_residual": ld.residual,
                             "radius": ld.radius, "points": ld.points}}
    out.add("q.csv", _csv(["alpha", "beta", "sdeg", "re", "im"], _map_rows(ld.Q, lat, float(g0))))
    report["Q"] = _map_json(ld.Q)
    if N > 0:
        c1, c2, src = _q_constants(Z, spectrum, lat, lam, N, q)
        mb = conv.majorant_bound(lat, spectrum, Z, lam, N, c1, c2, float(model.param("radius", 2.0)))
        dom = conv.check_domination(mb, ld.Q.images, "Q", scale=_laurent_scale(ld))
        report["convergence"] = {"C1": c1, "C2": c2, "constants_from": src, "radius": mb.radius,
                                 "certified": mb.certified, "max_certified_radius": mb.max_radius,
                                 "dominates_Q": dom.ok, "worst_ratio": dom.worst_ratio}
    if args.lambdas:
        lams = [float(x) for x in args.lambdas.split(",")]
        jr = cv.joyce_limit(data, lams, N, q, M)
        report["joyce"] = _joyce_json(jr)
        out.add("v.csv", _csv(["alpha", "beta", "sdeg", "re", "im"], _map_rows(jr.V, lat)))
    report["status"] = "PASS" if ok else "FAILED"
    out.add("q.json", dumps(report))
    print(dumps(report), end="")
    return EXIT_OK if ok else EXIT_FAIL


def _joyce_json(jr):
    return {"lambdas": jr.lams, "distances": jr.distances, "monotone": jr.monotone,
            "observed_orders": jr.orders, "model": jr.model, "f_consistency": jr.f_consistency,
            "f": series_to_records(jr.f)}


def cmd_joyce(model: Model, args, out: Output) -> int:
    name, Z, spectrum = model.z(args.z)
    N, q = _order(args, model), model.quad()
    lams = ([float(x) for x in args.lambdas.split(",")] if args.lambdas
            else model.param("lambdas", [1.0, 0.5, 0.25, 0.125]))
    report_lams = model.param("report_lambdas")
    M = int(model.param("circle_points", 64))
    data = cv.BPSData(model.lattice, spectrum, Z)
    jr = cv.joyce_limit(data, lams, N, q, M, report_lams=report_lams)
    conf = cv.joyce_limit(data.with_Z(Z.scaled(2)), lams, N, q, M, report_lams=report_lams)
    report = {"command": "joyce", "central_charge": name, "order": N, **_joyce_json(jr),
              "conformal_difference": jr.V.distance(conf.V)}
    ok = jr.monotone and jr.f_consistency < 1e-8
    report["status"] = "PASS" if ok else "FAILED"
    out.add("joyce.json", dumps(report))
    out.add("f.csv", _csv(["alpha", "sdeg", "re", "im"],
                          [(_charge_str(a), _charge_str(m), num(complex(c).real), num(complex(c).imag))
                           for (a, m), c in sorted(jr.f.terms.items())]))
    print(dumps(report), end="")
    return EXIT_OK if ok else EXIT_FAIL


def cmd_estimate(model: Model, args, out: Output) -> int:
    name, Z, spectrum = model.z(args.z)
    rep, grid, z_star = _estimate(model, Z, spectrum, model.quad())
    report = {"command": "estimate", "central_charge": name, "z_star": z_star, "lambda_grid": grid,
              "C1": rep.C1, "C2": rep.C2, "fit_C1": rep.fit_C1, "fit_C2": rep.fit_C2,
              "min_margin": rep.min_margin, "violations": len(rep.violations),
              "margins_improve": rep.margins_improve, "trees": len({s[0] for s in rep.samples}),
              "skipped_same_ray": len(rep.skipped)}
    report["status"] = "PASS" if not rep.violations else "FAILED"
    out.add("estimate.json", dumps(report))
    print(dumps(report), end="")
    return EXIT_OK if not rep.violations else EXIT_FAIL


def cmd_converge(model: Model, args, out: Output) -> int:
    name, Z, spectrum = model.z(args.z)
    N, lam, q = _order(args, model), _lam(args, model), model.quad()
    c1, c2, src = _constants(model, Z, spectrum, q)
    mb = conv.majorant_bound(model.lattice, spectrum, Z, lam, N, c1, c2, float(model.param("radius", 2.0)))
    entries = [{"beta": list(e.beta), "kind": e.kind, "bound_at_radius": e.value_at_radius, "status": e.status,
                "radius": mb.radius, "lambda": lam, "iterations": mb.iterations,
                "coefficients": [{"sdeg": list(m), "bound": v} for m, v in e.coefficients.items()]}
               for e in mb.entries]
    report = {"command": "converge", "central_charge": name, "order": N, "lambda": lam, "C1": c1, "C2": c2,
              "constants_from": src, "certified": mb.certified, "max_certified_radius": mb.max_radius,
              "certificate_reason": mb.certificate.reason, "entries": entries}
    report["status"] = "PASS" if mb.certified else "DIVERGENT"
    out.add("converge.json", dumps(report))
    print(dumps(report), end="")
    return EXIT_FAIL if (args.strict and not mb.certified) else EXIT_OK


def cmd_gmn(model: Model, args, out: Output) -> int:
    name, Z, spectrum = model.z(args.z)
    R = float(args.R if args.R is not None else model.param("R", 5.0))
    cap = int(args.cap if args.cap is not None else model.param("cap", 5))
    zeta = complex(*model.param("zeta", [0.5, 0.0]))
    beta = tuple(model.param("beta", [1] + [0] * (model.rank - 1)))
    lat = model.lattice
    cs = gmn.coord_series(lat, dt_table(spectrum, cap), Z, R, zeta, cap, model.quad())
    dr = gmn.darboux_pair(beta, [0.0] * model.rank, cs, lat)
    rows = []
    gens = [tuple(sgn * x for x in g) for g in lat.generators() for sgn in (1, -1)]
    for a in sorted(set(cs.table) | set(gens)):
        v = dr.per_alpha.get(a, 0j)
        d = degree(a)
        rows.append((_charge_str(a), num(v.real), num(v.imag), d, num(cs.tail_ratios.get(d, 0.0))))
    out.add("c_alpha.csv", _csv(["alpha", "re", "im", "shell", "tail_ratio"], rows))
    report = {"command": "gmn", "central_charge": name, "R": R, "zeta": zeta, "cap": cap, "beta": list(beta),
              "trees": cs.trees, "shells": {str(k): v for k, v in cs.shells.items()},
              "tail_ratios": {str(k): v for k, v in cs.tail_ratios.items()}, "last_tail_ratio": cs.last_ratio,
              "bound": dr.bound, "bound_charge": list(dr.argmax) if dr.argmax else None,
              "bound_degree": dr.argmax_degree, "near_unit_circle": cs.near_unit_circle,
              "partial_sums": dr.partial_sums}
    report["status"] = "PASS" if cs.converging else "DIVERGENT"
    out.add("gmn.json", dumps(report))
    print(dumps(report), end="")
    return EXIT_FAIL if (args.strict and not cs.converging) else EXIT_OK


COMMANDS = {
    "check-continuity": cmd_check_continuity,
    "compute-q": cmd_compute_q,
    "joyce": cmd_joyce,
    "estimate": cmd_estimate,
    "converge": cmd_converge,
    "gmn": cmd_gmn,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="wallcross", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--model", required=True, help="model JSON file, or a bundled name (a2)")
    p.add_argument("--order", type=int, help="s-truncation order N")
    p.add_argument("--lambda", dest="lam", type=float, help="scale parameter")
    p.add_argument("--lambdas", help="comma-separated decreasing lambda sequence")
    p.add_argument("--z", help="name of the central charge entry")
    p.add_argument("--chambers", help="two chamber names, comma-separated")
    p.add_argument("--R", type=float, help="radius for the coordinate series")
    p.add_argument("--cap", type=int, help="total decoration degree cap")
    p.add_argument("--out", help="directory for report files")
    p.add_argument("--jobs", type=int, default=1, help="worker cap (computations run in one process)")
    p.add_argument("--strict", action="store_true", help="nonzero exit on divergence flags")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    out = Output(args.out)
    try:
        model = load_model(args.model)
        return COMMANDS[args.command](model, args, out)
    except ModelError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (NearRayError, SectorBoundaryError, GenericityError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except NonConvergenceError as exc:
        print(f"non-convergence: {exc}", file=sys.stderr)
        return EXIT_NONCONV


if __name__ == "__main__":
    sys.exit(main())
