"""The dyadic maps: ratio constants, decay and the zeros accumulating at 0.

Run:  python demos/dyadic_maps.py
"""

from dbarlab.constructions import CONTROL, EX31, EX32, annulus_ratio_report, decay_report, ratio_constants
from dbarlab.scaled_field import Annulus

# %% n sup|dbar u|/|du| stays bounded
rc = ratio_constants(EX31, range(4, 10), resolution=256)
for n, c in zip(rc["n"], rc["C_n"]):
    print(f"n={n:2d}  C_n={c:6.2f}")

# %% faster than any power: local order grows with n, the control map stays at 1
for emap in (EX31, CONTROL):
    rows = decay_report(emap, range(6, 11))
    print(emap.kind, [round(r["local_order"], 2) for r in rows])

# %% zeros at a_n, and a holomorphic band around each
for n in (4, 6, 8):
    v = annulus_ratio_report(EX32, n, 256).values
    print(f"n={n}  a_n={Annulus(n).a_n:.3e}  |u(a_n)|={v['u_at_a_n']}  band ok {v['band_ok']}")
