"""Q from the contour and from the trees, then its small-scale limit."""
import cmath

from wallcross import cv, model

m = model.load_model("a2")
_, Z, omega = m.z(None)
data = cv.BPSData(m.lattice, omega, Z)

ld = cv.laurent_extract(data, 2.0, 3)
print(f"coeff_-2 + Z: {ld.m2_error:.1e}   constancy: {ld.residual:.1e}")
print("contour vs trees:", ld.Q.distance(cv.q_from_trees(data, 2.0, 3)))
print("flatness defect:", cv.flatness_defect(data, 0.3 * cmath.exp(-0.4j), 2.0, 3))

lams = [1.0, 0.5, 0.25, 0.125] + [2.0 ** -k for k in range(4, 11)]
jr = cv.joyce_limit(data, lams, 2, M=32, report_lams=lams[:4])
for lam, d in zip(jr.lams[:4], jr.distances[:4]):
    print(f"  lam={lam:<6} |Q - V| = {d:.3e}")
print("f coefficients:")
for (a, s), c in sorted(jr.f.terms.items()):
    print(f"  {a} s^{s}: {complex(c):.6f}")
