"""Shell sizes of the coordinate series as the radius shrinks."""
from wallcross import gmn, model
from wallcross.stability import dt_table

m = model.load_model("a2")
_, Z, omega = m.z(None)
zeta = complex(*m.param("zeta"))
dt = dt_table(omega, 5)
for R in (10.0, 5.0, 2.0, 1.0, 0.5, 0.3):
    cs = gmn.coord_series(m.lattice, dt, Z, R, zeta, 5)
    ratios = " ".join(f"{cs.tail_ratios[d]:.2e}" for d in sorted(cs.tail_ratios))
    print(f"R={R:<5} tail ratios {ratios}  {'converging' if cs.converging else 'DIVERGENT'}")
