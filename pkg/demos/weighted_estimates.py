"""Weighted L2 identity and the two lower bounds on a few random fields.

Run:  python demos/weighted_estimates.py
"""

import numpy as np

from dbarlab.carleman import (adversarial_w, carleman_identity_gap, field_suite, lemma1_check, lemma2_check,
                              sharpness_slope)

fields = field_suite(seed=0, count=4, resolution=256)

# %% the identity closes to quadrature accuracy
for tau in (1.0, 5.0, 20.0):
    gaps = [abs(carleman_identity_gap(v, tau).extra["relative_gap"]) for v in fields]
    print(f"tau={tau:5.1f}  worst relative gap {max(gaps):.2e}")

# %% lower bound without perturbation: margin relative to the left side
for tau in (1.0, 10.0, 50.0):
    margins = [float(r.margin) / float(r.lhs) for r in (lemma1_check(v, tau) for v in fields)]
    print(f"tau={tau:5.1f}  relative margin min {min(margins):.3f}")

# %% with the worst admissible perturbation
for tau in (1.0, 10.0, 50.0):
    reps = [lemma2_check(v, adversarial_w(v, 0.1), tau) for v in fields]
    print(f"tau={tau:5.1f}  holds {all(r.holds for r in reps)}  "
          f"pointwise {np.mean([r.extra['pointwise_fraction_ok'] for r in reps]):.3f}")

# %% the half-power is the threshold
for alpha in (0.3, 0.4, 0.5):
    print(f"alpha={alpha}  log-log slope {sharpness_slope(alpha):+.3f}")
