"""A map vanishing on one side of a parabola, seen through the weight.

Run:  python demos/support_edge.py
"""

from dbarlab.carleman import probe_field, vanishing_probe

u = probe_field(A=4.0, resolution=256)
rep = vanishing_probe(u, A=4.0, alpha=0.2, tau_list=(5, 10, 20, 40, 80))
print("hypotheses", rep.hypothesis_status)
for r in rep.rows:
    print(f"tau={r['tau']:3d}  L/R={r['L_over_R']:.3e}  L<=K e^(tau phi(-alpha)) {r['bound_holds']}")
