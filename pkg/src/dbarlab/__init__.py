"""Numerical checks of weighted dbar estimates and explicit multi-scale counterexamples."""

from .carleman import (CarlemanWeight, adversarial_w, carleman_identity_gap, dbar_star, field_suite,
                       lemma1_check, lemma2_check, probe_field, random_bump_field, sharpness_gap,
                       sharpness_slope, vanishing_probe)
from .constructions import (CONTROL, EX31, EX32, REMARK3, ExampleMap, Q_on_curve, annulus_ratio_report,
                            cutoff_chi, decay_report, example31_eval, example32_eval, intro_pair,
                            q_norm_profile, remark2_probe, remark3_eval)
from .cutoff import CutoffProfile, smooth_step
from .dbar_reduce import MatrixField, cauchy_transform, derive_A_from_u, reduce, solve_M
from .errors import DbarLabError
from .reports import MarginReport, RatioReport
from .scaled_field import (Annulus, AnnulusSpec, GridPatch, Rectangle, SampledField, ScaledComplex,
                           build_patch, quad_weighted, sc_add, sc_mul, sc_normalize)
from .wirtinger import DerivativePair, holo_residual, ratio_field, wirtinger_derivatives

__version__ = "0.1.0"
