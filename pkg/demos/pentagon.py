"""Ray products on both sides of the A2 wall, and their agreement."""
from wallcross import model
from wallcross.stability import continuity_check, first_nonzero_degree, ray_diagram, ray_product

m = model.load_model("a2")
for chamber in ("three", "two"):
    name, Z, omega = m.z_for_chamber(chamber)
    diagram = ray_diagram(Z, omega, 4)
    P = ray_product(m.lattice, diagram, omega, 4)
    print(f"{chamber}: {len(diagram.groups)} rays")
    for g, img in zip(m.lattice.generators(), P.images):
        terms = " + ".join(f"({c}) s^{m} x_{a}" for (a, m), c in sorted(img.terms.items()))
        print(f"  x_{g} -> {terms}")

_, Zl, om_l = m.z_for_chamber("three")
_, Zr, om_r = m.z_for_chamber("two")
res = continuity_check(m.lattice, om_l, Zl, om_r, Zr, N=8)
print("first degree where the products differ:", first_nonzero_degree(res))
