import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import quad

from dbarlab.cutoff import (STEP_BOUNDS, STEP_NORM, CutoffProfile, radial_composition_bound, smooth_step,
                            smooth_step_deriv)
from dbarlab.errors import ParameterError


def _g(t):
    return np.exp(-1 / (t * (1 - t))) if 0 < t < 1 else 0.0


def test_normalizing_constant():
    assert quad(_g, 0, 1, epsabs=0, epsrel=1e-13)[0] == pytest.approx(STEP_NORM, rel=1e-12)


@pytest.mark.parametrize("t", [0.05, 0.2, 0.5, 0.73, 0.97])
def test_step_matches_quadrature(t):
    exact = quad(_g, 0, t, epsabs=0, epsrel=1e-13)[0] / STEP_NORM
    assert smooth_step(t) == pytest.approx(exact, rel=1e-12, abs=1e-15)


def test_step_ends_and_symmetry():
    t = np.linspace(-1, 2, 301)
    s = smooth_step(t)
    assert np.all(s[t <= 0] == 0) and np.all(s[t >= 1] == 1)
    np.testing.assert_allclose(smooth_step(1 - t), 1 - s, atol=1e-15)
    assert np.all(np.diff(s) >= 0)


@pytest.mark.parametrize("k", [1, 2, 3, 4])
def test_derivatives_match_differences(k):
    t = np.linspace(0.1, 0.9, 9)
    h = 1e-3
    f = lambda x: smooth_step_deriv(x, k - 1)
    fd = (8 * (f(t + h) - f(t - h)) - (f(t + 2 * h) - f(t - 2 * h))) / (12 * h)
    scale = STEP_BOUNDS[k]
    np.testing.assert_allclose(smooth_step_deriv(t, k), fd, atol=1e-6 * scale)


@pytest.mark.parametrize("k", [0, 1, 2, 3, 4])
def test_bound_table_is_tight(k):
    t = np.linspace(0, 1, 200_001)
    sup = np.abs(smooth_step_deriv(t, k)).max()
    assert sup <= STEP_BOUNDS[k]
    assert sup >= STEP_BOUNDS[k] * (1 - 1e-6)


def test_profile_rejects_empty_interval():
    with pytest.raises(ParameterError):
        CutoffProfile(1.5, 1.5)


@given(st.floats(1.0, 1.6), st.floats(0.05, 0.4), st.booleans())
def test_profile_certified_bounds_dominate(t0, width, rising):
    prof = CutoffProfile(t0, t0 + width, rising)
    r = np.linspace(t0 - 0.05, t0 + width + 0.05, 4001)
    for k in range(1, 5):
        assert np.abs(prof.radial_derivative(r, k)).max() <= prof.bound(k) * (1 + 1e-9)


def test_composition_bound_first_order_is_exact():
    assert radial_composition_bound(1, 0.5, 1.0) == pytest.approx(STEP_BOUNDS[1] / 0.5)


def test_certified_bound_scales_with_annulus():
    prof = CutoffProfile(1.25, 1.75)
    assert prof.certified_bound(2, 5) == pytest.approx(prof.bound(2) * 4 ** 5)
