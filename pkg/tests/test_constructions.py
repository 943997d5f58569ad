import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dbarlab.constructions import (CONTROL, EX31, EX32, EX31_CHI, REMARK3, Jet, Q_matrix, Q_on_curve,
                                   annulus_index, annulus_ratio_report, annulus_sup_log2, cutoff_chi,
                                   decay_report, get_map, intro_pair, power_jet, q_norm_profile,
                                   remark2_probe, structure_J)
from dbarlab.cutoff import CutoffProfile
from dbarlab.errors import DomainError, ParameterError, SingularityError
from dbarlab.scaled_field import Annulus, Rectangle, SampledField, build_patch
from dbarlab.wirtinger import wirtinger_derivatives

DYADIC = [EX31, EX32, REMARK3]


@settings(max_examples=200)
@given(st.floats(1e-300, 0.999), st.floats(0, 2 * math.pi))
def test_annulus_index(r, t):
    z = np.array([r * np.exp(1j * t)])
    m = int(annulus_index(z)[0])
    assert 2.0 ** -m <= np.abs(z)[0] < 2.0 ** (1 - m)


@pytest.mark.parametrize("n", [3, 4, 9, 20])
def test_ex31_closed_form_near_inner_edge(n):
    # on 1 <= |w| < 5/4 the cutoff is 0: u = 2**(-n*n/2) (w**n, sqrt2 w**(n+1)), swapped for odd n
    w = 1.1 * np.exp(0.7j)
    z = complex(math.ldexp(w.real, -n), math.ldexp(w.imag, -n))
    u = EX31.evaluate(z)
    expect = [-n * n / 2 + n * math.log2(abs(w)), -n * n / 2 + 0.5 + (n + 1) * math.log2(abs(w))]
    if n % 2:
        expect.reverse()
    assert [v.log2abs() for v in u] == pytest.approx(expect, abs=1e-12)


@pytest.mark.parametrize("emap", DYADIC, ids=lambda m: m.kind)
@pytest.mark.parametrize("n", [3, 6, 11])
def test_continuity_across_annuli(emap, n):
    # |w| = 2 on annulus n is |w| = 1 on annulus n-1
    zeta = np.array([2 * np.exp(0.3j)])
    a, ea, da = emap.local_jets(n, zeta)
    b, eb, db = emap.local_jets(n - 1, zeta / 2)
    for ja, jb in zip(a, b):
        np.testing.assert_allclose(ja.f[0] * 2.0 ** (ea - eb), jb.f[0], rtol=1e-12, atol=1e-300)
        np.testing.assert_allclose(ja.d[0] * 2.0 ** (da - db), jb.d[0], rtol=1e-10, atol=1e-300)
        np.testing.assert_allclose(ja.db[0] * 2.0 ** (da - db), jb.db[0], rtol=1e-10, atol=1e-300)


def _fd_gap(emap, n, res):
    patch = build_patch(Annulus(n), res)
    u, d, db = emap.sample_all(patch)
    pair = wirtinger_derivatives(u)
    assert pair.dz.exp2 == d.exp2
    ok = pair.valid & np.isfinite(pair.err_dz)
    scale = np.abs(d.values).max()
    return max(np.abs(pair.dz.values - d.values)[ok].max(), np.abs(pair.dzbar.values - db.values)[ok].max()) / scale


@pytest.mark.parametrize("emap", DYADIC + [CONTROL], ids=lambda m: m.kind)
@pytest.mark.parametrize("n", [4, 7])
def test_analytic_derivatives_match_finite_differences(emap, n):
    coarse, fine = _fd_gap(emap, n, 256), _fd_gap(emap, n, 512)
    assert fine <= 5e-3
    assert fine <= 1e-12 or coarse / fine >= 6


@pytest.mark.parametrize("emap", DYADIC, ids=lambda m: m.kind)
def test_domain(emap):
    with pytest.raises(DomainError):
        emap.evaluate(0.6)
    assert all(v.mantissa == 0 for v in emap.evaluate(0))


def test_get_map():
    assert get_map("ex32") is EX32
    with pytest.raises(ParameterError):
        get_map("ex99")


@pytest.mark.parametrize("n", [4, 5, 8])
def test_ex32_vanishes_at_a_n(n):
    assert all(v.mantissa == 0 for v in EX32.evaluate(Annulus(n).a_n))


@pytest.mark.parametrize("n", [4, 7])
def test_lift_second_pair_relation(n):
    # u4 = z u3
    z = 1.4 * 2.0 ** -n * np.exp(0.2j)
    u = REMARK3.evaluate(z)
    if u[2].mantissa != 0:
        assert (u[3].value() / u[2].value()) == pytest.approx(z, rel=1e-12) if u[2].log2abs() > -900 else True
        assert u[3].log2abs() - u[2].log2abs() == pytest.approx(math.log2(abs(z)), abs=1e-12)


def test_jet_product_rule():
    zeta = np.array([1.3 + 0.4j, -0.7 + 1.1j])
    a, b = power_jet(zeta, 3), Jet(np.abs(zeta) ** 2 + 0j, np.conj(zeta), zeta.astype(complex))
    p = a * b
    np.testing.assert_allclose(p.d, 3 * zeta ** 2 * np.abs(zeta) ** 2 + zeta ** 3 * np.conj(zeta))
    np.testing.assert_allclose(p.db, zeta ** 4)


def test_cutoff_chi_validation():
    ann = Annulus(5)
    with pytest.raises(ParameterError):
        cutoff_chi(ann, "outer", CutoffProfile(0.9, 1.2))
    with pytest.raises(ParameterError):
        cutoff_chi(ann, "inner", CutoffProfile(1.1, 1.5), avoid_band=True)
    with pytest.raises(ParameterError):
        cutoff_chi(ann, "left", CutoffProfile(1.1, 1.2))
    chi = cutoff_chi(ann, "outer", EX31_CHI)
    assert chi(ann.inner) == 0 and chi(ann.outer) == 1
    assert chi.certified_bound(1) >= np.abs(chi.radial_derivative(np.linspace(ann.inner, ann.outer, 999))).max()


def test_control_has_order_one():
    rows = decay_report(CONTROL, range(4, 9))
    assert [r["local_order"] for r in rows] == pytest.approx([1.0] * 5)


def test_ex31_decay_within_bound():
    rows = decay_report(EX31, range(6, 13))
    assert all(r["within_bound"] for r in rows)
    orders = [r["local_order"] for r in rows]
    assert all(b > a for a, b in zip(orders, orders[1:]))


def test_decay_sup_matches_closed_form():
    # max over the annulus of the w**n component is at |w| = 2
    n = 8
    assert annulus_sup_log2(EX31, n) >= -n * n / 2 + n


@pytest.mark.parametrize("p, expect", [(2.0, (True, True)), (1.5, (True, False)), (3.0, (False, True))])
def test_exponent_rigidity(p, expect):
    assert remark2_probe(p, 40) == expect


def test_exponent_rigidity_domain():
    with pytest.raises(ParameterError):
        remark2_probe(1.0, 10)


def test_ratio_report_validation():
    with pytest.raises(ParameterError):
        annulus_ratio_report(EX31, 3)
    with pytest.raises(ParameterError):
        annulus_ratio_report(EX31, 6, resolution=128)


def test_ex31_ratio_report():
    rep = annulus_ratio_report(EX31, 6, 256)
    assert rep.values["holomorphic_band_ok"]
    assert rep.c_n == pytest.approx(6 * rep.sup_ratio)
    assert 0 < rep.sup_ratio < 10 / 6


def test_ex32_ratio_report():
    rep = annulus_ratio_report(EX32, 8, 256)
    v = rep.values
    assert v["u_at_a_n"] == 0 and v["band_ok"] and v["band_sup_u2"] == 0
    assert v["lower_bound_ok"]


@pytest.mark.parametrize("k", [2, 3, 5])
def test_intro_pair(k):
    pair = intro_pair(k)
    y = np.geomspace(1e-6, 0.4, 40)
    assert pair.injective(y)
    est = pair.holder_estimate()
    assert est["beta"] == pytest.approx((k - 1) / k, abs=0.05)
    h = 0.3 / 127
    patch = build_patch(Rectangle(-0.3, 0.3, h, 0.3 + h), 128)
    for f in (pair.u, pair.v):
        assert pair.residual(f.sample(patch))["ok"]


def test_structure_is_complex_structure():
    p = np.array([[0.1 + 0.2j, 0.3 - 0.1j], [0j, -0.5j]])
    J = structure_J(p, 3)
    np.testing.assert_allclose(J @ J, -np.broadcast_to(np.eye(4), J.shape), atol=1e-14)


def test_intro_pair_validation():
    with pytest.raises(ParameterError):
        intro_pair(1)


@settings(max_examples=50)
@given(st.lists(st.complex_numbers(max_magnitude=5), min_size=4, max_size=4),
       st.lists(st.complex_numbers(max_magnitude=5), min_size=4, max_size=4))
def test_Q_maps_d_to_conj_dbar(d, db):
    d, db = np.array(d), np.array(db)
    if np.linalg.norm(d) < 1e-3:
        return
    Q = Q_matrix(d, db)
    np.testing.assert_allclose(Q @ d, np.conj(db), atol=1e-9 * (1 + np.abs(db).max()))
    assert np.linalg.norm(Q, 2) == pytest.approx(np.linalg.norm(db) / np.linalg.norm(d), rel=1e-9, abs=1e-12)


def test_Q_singular():
    with pytest.raises(SingularityError):
        Q_matrix(np.zeros(4), np.ones(4))


def test_Q_on_curve():
    z = 1.4 * 2.0 ** -7 * np.exp(0.5j)
    Q = Q_on_curve(z)
    assert np.linalg.matrix_rank(Q, tol=1e-12 * max(np.abs(Q).max(), 1e-300)) <= 1
    with pytest.raises(DomainError):
        Q_on_curve(0.5)


def test_q_profile_validation():
    with pytest.raises(ParameterError):
        q_norm_profile([6])
