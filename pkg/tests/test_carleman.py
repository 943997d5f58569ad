import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dbarlab.carleman import (FIELD_PATCH, CarlemanWeight, adversarial_w, carleman_identity_gap, dbar_star,
                              lemma1_check, lemma2_branches, lemma2_check, lemma2_pointwise, probe_field,
                              random_bump_field, sharpness_gap, sharpness_slope, vanishing_probe,
                              weighted_inner)
from dbarlab.errors import ParameterError, SupportError
from dbarlab.scaled_field import SampledField, build_patch
from dbarlab.wirtinger import wirtinger_derivatives

RES = 192


@pytest.fixture(scope="module")
def fields():
    return [random_bump_field(s, RES) for s in range(3)]


def test_weight_table():
    w = CarlemanWeight(3.0)
    x = np.linspace(-1, 1, 201)
    assert w.phi(-1) == -0.5
    assert np.all(np.diff(w.phi(x)) > 0)
    assert w.dphi(x).min() >= 0 and w.dphi(x).max() <= 2
    assert np.all(w.ddphi(x) == 1)


def test_tau_below_one_rejected(fields):
    with pytest.raises(ParameterError):
        lemma1_check(fields[0], 0.5)


def test_zero_field():
    v = SampledField(build_patch(FIELD_PATCH, 64), np.zeros((64, 64)))
    assert float(carleman_identity_gap(v, 1.0).margin) == 0
    assert float(lemma1_check(v, 1.0).margin) == 0
    assert np.abs(dbar_star(v, CarlemanWeight(2.0)).values).max() == 0


def test_dbar_star_on_plateau():
    p = build_patch(FIELD_PATCH, 129)
    c = 0.7 - 0.2j
    v = SampledField(p, np.full(p.shape, c))
    out = dbar_star(v, CarlemanWeight(2.0)).to_complex()[..., 0]
    # constant v: -(0 + tau/2 phi'(x) v)
    expect = -(2.0 / 2) * (1 + p.phys_x)[None, :] * c
    np.testing.assert_allclose(out[5:-5, 5:-5], np.broadcast_to(expect, p.shape)[5:-5, 5:-5], atol=1e-12)


def test_adjointness(fields):
    u, v = fields[0], fields[1]
    w = CarlemanWeight(5.0)
    a = weighted_inner(wirtinger_derivatives(u).dzbar, v, w)
    b = weighted_inner(u, dbar_star(v, w), w)
    a, b = a.value(), b.value()
    assert abs(a - b) <= 1e-6 * (abs(a) + abs(b) + 1e-30)


def test_identity_refines():
    gaps = [abs(carleman_identity_gap(random_bump_field(3, r), 1.0).extra["relative_gap"]) for r in (256, 512)]
    assert gaps[1] * 8 <= gaps[0]


def test_identity_with_linear_modulation():
    v0 = random_bump_field(1, 512)
    v = v0.with_values(v0.values * v0.patch.z[..., None])
    assert abs(carleman_identity_gap(v, 20.0).extra["relative_gap"]) <= 1e-4


@pytest.mark.parametrize("tau", [1, 5, 20, 50])
def test_lemma1_holds(fields, tau):
    for v in fields:
        rep = lemma1_check(v, tau)
        assert rep.holds
        assert rep.extra["pointwise_margin"] >= 0


def test_lemma1_report_json(fields):
    d = lemma1_check(fields[0], 5.0).to_json()
    assert {"lemma", "tau", "resolution", "lhs", "rhs_terms", "margin", "error_budget",
            "hypothesis_status"} <= set(d)


def test_support_violation():
    p = build_patch(FIELD_PATCH, 64)
    with pytest.raises(SupportError):
        lemma1_check(SampledField(p, np.ones(p.shape)), 2.0)


@settings(deadline=None, max_examples=200)
@given(st.floats(0, 1), st.floats(0, 50), st.floats(1, 1e4))
def test_lemma2_pointwise_both_branches(va, dv, tau):
    pl, pr = lemma2_pointwise(np.array([va]), np.array([dv]), tau)
    assert pl[0] <= pr[0] * (1 + 1e-12) + 1e-300


def test_lemma2_branch_values():
    small, large = lemma2_branches(np.array([0.01, 0.5]), np.array([3.0, 0.5]), 10.0)
    np.testing.assert_allclose(small, [1e-3, 2.5e-4])
    np.testing.assert_allclose(large, [1e-5, 0.025])


@pytest.mark.parametrize("tau", [1, 10, 50])
def test_lemma2_with_adversarial_w(fields, tau):
    for v in fields:
        rep = lemma2_check(v, adversarial_w(v, 0.1), tau)
        assert rep.holds and rep.hypothesis_status["v_le_1"] and rep.hypothesis_status["w_bound"]
        assert rep.extra["pointwise_fraction_ok"] == 1.0


def test_lemma2_flags_large_v(fields):
    v = fields[0].scaled_pow2(2)
    rep = lemma2_check(v, adversarial_w(v, 0.1), 5.0)
    assert not rep.hypothesis_status["v_le_1"]


def test_probe_decays_and_keeps_constant():
    u = probe_field(4.0, 256)
    rep = vanishing_probe(u, 4.0, 0.2)
    assert rep.hypothesis_status["vanishes_on_parabola_side"]
    assert rep.hypothesis_status["cutoff_support_compact"]
    assert rep.bound_holds and rep.leak == 0
    ratios = [r["L_over_R"] for r in rep.rows]
    assert ratios == sorted(ratios, reverse=True)


def test_probe_rejects_bad_cutoff():
    from dbarlab.cutoff import CutoffProfile
    with pytest.raises(ParameterError):
        vanishing_probe(probe_field(4.0, 128), 4.0, 0.2, cutoff=CutoffProfile(-0.3, 0.1))


@pytest.mark.parametrize("alpha", [0.1, 0.3, 0.5])
def test_sharpness_slope_is_exact(alpha):
    assert sharpness_slope(alpha) == pytest.approx(2 * alpha - 1, abs=1e-12)


def test_sharpness_half_is_scale_free():
    l1, r1 = sharpness_gap(0.5, 0.1, 10)
    l2, r2 = sharpness_gap(0.5, 0.1, 1e4)
    assert l1 / r1 == pytest.approx(l2 / r2)


@pytest.mark.parametrize("args", [(0.0, 0.1, 1), (0.6, 0.1, 1), (0.3, 0.7, 1), (0.3, 0.1, -1)])
def test_sharpness_ranges(args):
    with pytest.raises(ParameterError):
        sharpness_gap(*args)


def test_field_generator_is_seeded():
    a, b = random_bump_field(11, 64), random_bump_field(11, 64)
    np.testing.assert_array_equal(a.values, b.values)
    assert abs(a.norm().max() - 0.9) < 1e-12
