import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dbarlab.carleman import CarlemanWeight
from dbarlab.errors import DomainError, InvalidInputError, ParameterError, SupportError
from dbarlab.scaled_field import (Annulus, AnnulusSpec, Rectangle, SampledField, ScaledComplex, build_patch,
                                  crop, quad_weighted, sc_add, sc_mul, sc_normalize, sc_pow2)

finite = st.floats(-1e300, 1e300, allow_nan=False, allow_infinity=False)
exps = st.integers(-10_000, 10_000)


@pytest.mark.parametrize("m, e, mant, exp2", [(3.0, 0, 1.5, 1),
                                              (0.0, 17, 0.0, 0),
                                              (0.1, 0, 1.6, -4),
                                              (-2.0, 5, -1.0, 6)])
def test_normalize_table(m, e, mant, exp2):
    s = sc_normalize(m, e)
    assert s.exp2 == exp2
    assert s.mantissa == pytest.approx(mant, rel=1e-15)


def test_normalize_tenth_multiplies_back():
    s = sc_normalize(0.1, 0)
    assert math.ldexp(s.mantissa.real, s.exp2) == 0.1


@pytest.mark.parametrize("bad", [math.nan, math.inf, complex(1, math.inf)])
def test_normalize_rejects_non_finite(bad):
    with pytest.raises(InvalidInputError):
        sc_normalize(bad, 0)


@given(st.complex_numbers(max_magnitude=1e300, allow_nan=False, allow_infinity=False), exps)
def test_normalize_is_canonical_and_exact(z, e):
    s = sc_normalize(z, e)
    if z == 0:
        assert (s.mantissa, s.exp2) == (0, 0)
        return
    assert 1 <= abs(s.mantissa) < 2
    # same value: compare in the input's own exponent
    back = complex(math.ldexp(s.mantissa.real, s.exp2 - e), math.ldexp(s.mantissa.imag, s.exp2 - e))
    assert abs(back - z) <= 2 * np.spacing(abs(z))


def test_mul_table():
    p = sc_mul(sc_normalize(1.5, 10), sc_normalize(1.5, 10))
    assert (p.mantissa, p.exp2) == (1.125, 21)


@given(finite.filter(lambda x: x != 0), exps, finite.filter(lambda x: x != 0), exps)
def test_mul_exponent_law(a, ea, b, eb):
    x, y = sc_normalize(a, ea), sc_normalize(b, eb)
    p = sc_mul(x, y)
    assert p.exp2 - (x.exp2 + y.exp2) in (0, 1)


def test_add_identity_and_gap():
    a = sc_normalize(1.0, 0)
    assert sc_add(a, ScaledComplex(0j, 0)) == a
    assert sc_add(a, sc_normalize(1.0, -200)) == a


@given(st.floats(-1e6, 1e6), st.floats(-1e6, 1e6))
def test_add_matches_float_oracle(a, b):
    s = sc_add(sc_normalize(a, 0), sc_normalize(b, 0))
    assert s.value() == pytest.approx(a + b, rel=1e-15, abs=1e-300)


def test_pow2_half_integer():
    s = sc_pow2(-25 / 2)
    assert s.log2abs() == pytest.approx(-12.5)


def test_huge_exponents_survive():
    big = sc_pow2(10_000)
    assert sc_mul(big, big).exp2 == 20_000


def test_rectangle_patch_spacing():
    p = build_patch(Rectangle(-0.9, -0.1, -0.4, 0.4), 256)
    assert p.h == pytest.approx(0.8 / 255, rel=1e-15)
    assert (p.nx, p.ny) == (256, 256)
    assert np.abs(p.z).max() <= 1


def test_annulus_patch_covers_the_ring():
    p = build_patch(Annulus(6), 512)
    r = np.abs(p.w)
    assert r.max() > 2 and p.annulus_mask().sum() > 0
    # corners stay in the disc after undoing the rescaling
    assert np.abs(p.z).max() <= 1


@pytest.mark.parametrize("region", [Annulus(0), Annulus(1), Rectangle(0.5, 1.0, 0.5, 1.0)])
def test_patch_outside_disc(region):
    with pytest.raises(DomainError):
        build_patch(region, 64)


def test_patch_resolution_floor():
    with pytest.raises(ParameterError):
        build_patch(Rectangle(-0.5, 0.5, -0.5, 0.5), 7)


def test_annulus_spec_chain():
    a = AnnulusSpec(5)
    assert a.inner < a.r_n < a.a_n < a.R_n < a.outer
    assert a.a_n == 1.5 / 32


def _bump(patch, c=0j, r=0.3):
    d = np.abs(patch.z - c) ** 2 / r ** 2
    out = np.zeros(patch.shape)
    inside = d < 1
    out[inside] = np.exp(-1 / (1 - d[inside]))
    return SampledField(patch, out.astype(complex))


def test_quadrature_zero_field(square):
    assert quad_weighted(SampledField(square, np.zeros(square.shape))).mantissa == 0


def test_quadrature_refinement():
    vals = []
    for res in (33, 65, 129, 257):
        p = build_patch(Rectangle(-0.5, 0.5, -0.5, 0.5), res)
        vals.append(quad_weighted(_bump(p)).value().real)
    diffs = np.abs(np.diff(vals))
    assert all(d1 >= 8 * d2 for d1, d2 in zip(diffs, diffs[1:]) if d2 > 1e-15)


def test_quadrature_matches_radial_oracle():
    from scipy.integrate import quad
    p = build_patch(Rectangle(-0.5, 0.5, -0.5, 0.5), 257)
    exact = 2 * np.pi * quad(lambda s: np.exp(-2 / (1 - s * s / 0.09)) * s, 0, 0.3, epsabs=0, epsrel=1e-13)[0]
    assert quad_weighted(_bump(p)).value().real == pytest.approx(exact, rel=1e-10)


def test_quadrature_homogeneous_in_exponent(square):
    f = _bump(square)
    a, b = quad_weighted(f), quad_weighted(f.scaled_pow2(7))
    assert b.exp2 == a.exp2 + 14 and b.mantissa == a.mantissa


def test_quadrature_weight_bounded_by_edge_value():
    p = build_patch(Rectangle(-0.9, -0.1, -0.4, 0.4), 257)
    f = _bump(p, -0.6, 0.2)  # supported in x < -0.4
    w = CarlemanWeight(20.0)
    lhs = quad_weighted(f, w).value().real
    assert lhs <= math.exp(20 * w.phi(-0.4)) * quad_weighted(f).value().real


def test_quadrature_support_violation(square):
    with pytest.raises(SupportError):
        quad_weighted(SampledField(square, np.ones(square.shape)))


def test_field_dump_round_trip(tmp_path):
    p = build_patch(Annulus(9), 16)
    f = SampledField(p, np.exp(1j * p.w)[..., None] * np.array([1, 1e-30]), exp2=-40)
    f.dump(tmp_path / "f")
    head = (tmp_path / "f.csv").read_text().splitlines()[0]
    assert head == "x,y,comp,mant_re,mant_im,exp2"
    g = SampledField.load(tmp_path / "f")
    assert g.exp2 == f.exp2 and g.patch == f.patch
    np.testing.assert_allclose(g.values, f.values, rtol=1e-16, atol=0)


def test_align_before_arithmetic(square):
    f = _bump(square)
    s = f.scaled_pow2(3) + f
    np.testing.assert_allclose(s.to_complex(), 9 * f.to_complex(), rtol=1e-15)


def test_crop_keeps_coordinates(square):
    f = SampledField.from_function(square, lambda z: z)
    c = crop(f, 3)
    np.testing.assert_array_equal(c.patch.z, square.z[3:-3, 3:-3])
