"""Similarity reduction of a manufactured solution to a holomorphic map.

Run:  python demos/reduction.py
"""

import numpy as np

from dbarlab.dbar_reduce import manufactured_u, reduce

u, v0 = manufactured_u(resolution=256)
v, rep = reduce(u)
print(f"kappa {rep.kappa:.3f}  iterations {rep.iterations}  min|det M| {rep.min_abs_det:.3f}")
print(f"dbar residual: u {rep.holo_residual_u:.2e}  v {rep.holo_residual_v:.2e}")
print("increment ratios", np.round(np.array(rep.history[1:]) / np.array(rep.history[:-1]), 3))
