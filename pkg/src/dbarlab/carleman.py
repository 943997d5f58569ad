"""Weighted L2 estimates for dbar with the convex weight phi(x) = x + x^2/2.

Every inequality is checked on a grid and reported with an explicit error
budget (finite-difference truncation plus quadrature), so a "violation" is
only ever reported when it exceeds what discretization can explain.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .cutoff import CutoffProfile, smooth_step
from .errors import ParameterError
from .reports import MarginReport
from .scaled_field import (
    GridPatch,
    Rectangle,
    SampledField,
    build_patch,
    check_support,
    sc_normalize,
    trapezoid2d,
)
from .wirtinger import DerivativePair, wirtinger_derivatives

BUDGET_SAFETY = 2.0
ROUNDOFF = 1e-13

# the test-field box |x + 0.5| <= 0.35, |y| <= 0.35 sits inside this patch
FIELD_PATCH = Rectangle(-0.9, -0.1, -0.4, 0.4)


@dataclass(frozen=True)
class CarlemanWeight:
    """``exp(tau * phi(x))`` with ``phi(x) = x + x**2 / 2``."""

    tau: float

    @staticmethod
    def phi(x):
        x = np.asarray(x, float)
        return x + 0.5 * x * x

    @staticmethod
    def dphi(x):
        return 1.0 + np.asarray(x, float)

    @staticmethod
    def ddphi(x):
        return np.ones_like(np.asarray(x, float))

    def __call__(self, x):
        return np.exp(self.tau * self.phi(x))


# ---------------------------------------------------------------------------
# test fields


def _plateau(t, half, ramp):
    return smooth_step((t + half) / ramp) * smooth_step((half - t) / ramp)


def random_bump_field(rng, resolution: int = 512, components: int = 2, degree: int = 6,
                      amplitude: float = 0.9) -> SampledField:
    """Seeded smooth field with compact support in ``|x + 0.5|, |y| <= 0.35``.

    A product of two 1-D plateau bumps times a random complex polynomial in
    (x, y) of degree <= ``degree`` per component, scaled so ``sup|v| = amplitude``.
    """
    rng = np.random.default_rng(rng)
    patch = build_patch(FIELD_PATCH, resolution)
    X = (patch.xs + 0.5) / 0.35
    Y = patch.ys / 0.35
    hx, hy = rng.uniform(0.8, 1.0, 2)
    rx, ry = rng.uniform(0.4, 0.7, 2)
    env = _plateau(Y, hy, rx * hy)[:, None] * _plateau(X, hx, ry * hx)[None, :]
    vals = np.zeros(patch.shape + (components,), complex)
    for c in range(components):
        deg = int(rng.integers(0, degree + 1))
        coef = np.zeros((deg + 1, deg + 1), complex)  # coef[b, a] multiplies X^a Y^b
        for a in range(deg + 1):
            for b in range(deg + 1 - a):
                coef[b, a] = complex(*rng.normal(size=2)) / (1 + a + b)
        xp = X[None, :] ** np.arange(deg + 1)[:, None]
        yp = Y[None, :] ** np.arange(deg + 1)[:, None]
        vals[..., c] = env * (yp.T @ coef @ xp)
    peak = np.sqrt(np.sum(np.abs(vals) ** 2, axis=2)).max()
    return SampledField(patch, vals * (amplitude / peak))


def field_suite(seed: int, count: int, resolution: int = 512):
    """``count`` reproducible test fields; field i draws from ``default_rng([seed, i])``."""
    return [random_bump_field(np.random.default_rng([seed, i]), resolution) for i in range(count)]


PROBE_PATCH = Rectangle(-0.8, 0.2, -0.5, 0.5)


def probe_field(A: float = 4.0, resolution: int = 512, ramp: float = 0.1) -> SampledField:
    """Smooth 2-component field vanishing exactly on ``{x >= -A y^2}``.

    The zero set is entered through a C-infinity step in ``-x - A y^2``;
    plateau envelopes keep the field off the patch edges, and the result is
    scaled so that ``|u| <= 1`` and ``|d u| <= 1``.
    """
    patch = build_patch(PROBE_PATCH, resolution)
    z = patch.z
    x, y = z.real, z.imag
    gate = smooth_step((-x - A * y * y) / ramp)
    env = _plateau((x + 0.3) / 0.45, 1.0, 0.4) * _plateau(y / 0.45, 1.0, 0.4)
    base = gate * env
    vals = np.stack([base * (1 + 0.5 * z), base * (0.3j - z * z)], axis=-1)
    f = SampledField(patch, vals)
    pair = wirtinger_derivatives(f)
    sup_u = f.norm().max()
    sup_d = pair.dz.norm()[pair.valid].max()
    return f.with_values(vals * (0.9 / max(sup_u, sup_d)))


# ---------------------------------------------------------------------------
# helpers


def _check_tau(tau):
    if not tau >= 1:
        raise ParameterError(f"tau must be >= 1, got {tau}")


def _deriv_units(f: SampledField) -> float:
    """Factor turning |derivative mantissa|^2 into units of |f mantissa|^2."""
    return 4.0 ** f.patch.scale_exp2


def _coarse(arr):
    return arr[::2, ::2]


def _weighted(arr, wrow, h):
    """Integral of ``arr * weight`` and its quadrature-error estimate (h vs 2h)."""
    dens = arr * wrow
    fine = trapezoid2d(dens, h)
    coarse = trapezoid2d(_coarse(dens), 2 * h)
    return fine, abs(fine - coarse)


def _fd_error(dens_d, err, wrow, h):
    """Bound on the change of the integral of |D|^2 e when D moves by err."""
    e2 = trapezoid2d(np.nan_to_num(err) ** 2 * wrow, h)
    d2 = trapezoid2d(dens_d * wrow, h)
    return 2.0 * math.sqrt(max(d2, 0.0) * e2) + e2


def _weight_row(patch: GridPatch, tau: float):
    return np.exp(tau * CarlemanWeight.phi(patch.phys_x))[None, :]


def dbar_star(v: SampledField, w: CarlemanWeight, pair: DerivativePair = None) -> SampledField:
    """Formal adjoint of dbar in the weighted space: ``-(d v + tau phi'(x) v / 2)``."""
    pair = pair or wirtinger_derivatives(v)
    dz = pair.dz
    s = v.patch.scale_exp2
    dphi = CarlemanWeight.dphi(v.patch.phys_x)[None, :, None]
    vv = np.ldexp(v.values.real, -s) + 1j * np.ldexp(v.values.imag, -s)
    out = -(dz.values + 0.5 * w.tau * dphi * vv)
    return SampledField(v.patch, out, dz.exp2, dz.mask)


def weighted_inner(f: SampledField, g: SampledField, w: CarlemanWeight):
    """``<f, g>_phi = integral of f . conj(g) e^{tau phi}`` as a ScaledComplex."""
    a, b, e = f.align(g)
    dens = np.sum(a * np.conj(b), axis=2) * _weight_row(f.patch, w.tau)
    val = trapezoid2d(dens.real, f.patch.h) + 1j * trapezoid2d(dens.imag, f.patch.h)
    return sc_normalize(val, 2 * e - 2 * f.patch.scale_exp2)


def _budget(terms, values):
    total = BUDGET_SAFETY * sum(terms) + ROUNDOFF * sum(abs(x) for x in values)
    return total


# ---------------------------------------------------------------------------
# weighted identity and the two lower bounds


def carleman_identity_gap(v: SampledField, tau: float) -> MarginReport:
    """Both sides of ``int|dbar v|^2 e = int|dbar* v|^2 e + tau/4 int|v|^2 e``.

    ``extra['relative_gap']`` is ``|lhs - rhs| / lhs``.
    """
    check_support(v)
    w = CarlemanWeight(tau)
    pair = wirtinger_derivatives(v)
    star = dbar_star(v, w, pair)
    h = v.patch.h
    wrow = _weight_row(v.patch, tau)
    k = _deriv_units(v)
    valid = pair.valid
    d_dbar = np.where(valid, pair.dzbar.norm() ** 2, 0.0)
    d_star = np.where(valid, star.norm() ** 2, 0.0)
    d_v = np.sum(np.abs(v.values) ** 2, axis=2)
    lhs, q1 = _weighted(d_dbar, wrow, h)
    r1, q2 = _weighted(d_star, wrow, h)
    r2, q3 = _weighted(d_v, wrow, h)
    lhs, r1, q1, q2 = lhs * k, r1 * k, q1 * k, q2 * k
    r2, q3 = 0.25 * tau * r2, 0.25 * tau * q3
    f1 = _fd_error(d_dbar, pair.err_dzbar, wrow, h) * k
    f2 = _fd_error(d_star, pair.err_dz, wrow, h) * k
    margin = lhs - r1 - r2
    budget = _budget([q1, q2, q3, f1, f2], [lhs, r1, r2])
    ex = 2 * v.exp2 - 2 * v.patch.scale_exp2
    return MarginReport(
        "carleman-identity", tau, v.patch.nx,
        sc_normalize(lhs, ex),
        [("adjoint", sc_normalize(r1, ex)), ("commutator", sc_normalize(r2, ex))],
        sc_normalize(margin, ex), sc_normalize(budget, ex),
        {"compact_support": True},
        {"relative_gap": abs(margin) / lhs if lhs > 0 else 0.0},
    )


def lemma1_check(v: SampledField, tau: float) -> MarginReport:
    """``int|dbar v|^2 e >= 1/(10 tau) int|d v|^2 e + tau/20 int|v|^2 e``.

    ``extra['pointwise_margin']`` is the smallest value over the grid of
    ``|dbar* v|^2 - |d v|^2/2 + tau^2 |v|^2`` divided by its scale; the
    lower bound used in the argument says it is never negative.
    """
    _check_tau(tau)
    check_support(v)
    w = CarlemanWeight(tau)
    pair = wirtinger_derivatives(v)
    star = dbar_star(v, w, pair)
    h = v.patch.h
    wrow = _weight_row(v.patch, tau)
    k = _deriv_units(v)
    valid = pair.valid
    d_dbar = np.where(valid, pair.dzbar.norm() ** 2, 0.0)
    d_d = np.where(valid, pair.dz.norm() ** 2, 0.0)
    d_v = np.sum(np.abs(v.values) ** 2, axis=2)
    lhs, q1 = _weighted(d_dbar, wrow, h)
    g, q2 = _weighted(d_d, wrow, h)
    m, q3 = _weighted(d_v, wrow, h)
    lhs, q1 = lhs * k, q1 * k
    r1, q2 = g * k / (10 * tau), q2 * k / (10 * tau)
    r2, q3 = m * tau / 20, q3 * tau / 20
    f1 = _fd_error(d_dbar, pair.err_dzbar, wrow, h) * k
    f2 = _fd_error(d_d, pair.err_dz, wrow, h) * k / (10 * tau)
    margin = lhs - r1 - r2
    budget = _budget([q1, q2, q3, f1, f2], [lhs, r1, r2])

    # pointwise lower bound |dbar* v|^2 >= |dv|^2/2 - tau^2 |v|^2, mantissa units
    s = np.where(valid, star.norm() ** 2 * k, 0.0)
    rhs_pt = 0.5 * d_d * k - tau ** 2 * d_v
    scale = np.maximum(0.5 * d_d * k + tau ** 2 * d_v, 1e-300)
    pt = np.where(valid, (s - rhs_pt) / scale, np.inf)
    ex = 2 * v.exp2 - 2 * v.patch.scale_exp2
    return MarginReport(
        "weighted-dbar-lower-bound", tau, v.patch.nx,
        sc_normalize(lhs, ex),
        [("gradient", sc_normalize(r1, ex)), ("mass", sc_normalize(r2, ex))],
        sc_normalize(margin, ex), sc_normalize(budget, ex),
        {"compact_support": True, "tau_ge_1": True},
        {"pointwise_margin": float(pt.min()) if valid.any() else 0.0,
         "integrals": {"dbar": lhs, "d": g * k, "mass": m}},
    )


def adversarial_w(v: SampledField, theta: float = 0.1, pair: DerivativePair = None) -> SampledField:
    """Largest admissible perturbation, aligned with dbar v.

    ``w = theta |v|^(1/2) min(|dv|, 1) dbar v / |dbar v|`` makes
    ``|dbar v - w|`` as small as the bound on ``|w|`` allows at each point.
    """
    pair = pair or wirtinger_derivatives(v)
    va = np.sqrt(np.sum(np.abs(v.to_complex()) ** 2, axis=2))
    db = pair.dzbar.to_complex()
    nd = np.sqrt(np.sum(np.abs(pair.dz.to_complex()) ** 2, axis=2))
    nb = np.sqrt(np.sum(np.abs(db) ** 2, axis=2))
    size = theta * np.sqrt(va) * np.minimum(nd, 1.0)
    with np.errstate(invalid="ignore", divide="ignore"):
        direction = np.where(nb[..., None] > 0, db / np.where(nb > 0, nb, 1.0)[..., None], 0.0)
    w = np.where(pair.valid[..., None], size[..., None] * direction, 0.0)
    return SampledField(v.patch, w, 0, pair.valid)


def lemma2_pointwise(v_abs, dv_abs, tau, theta=0.1):
    """Both sides of ``theta^2 |v| min(|dv|,1)^2 <= |dv|^2/(20 tau) + tau |v|^2/80``."""
    lhs = theta ** 2 * v_abs * np.minimum(dv_abs, 1.0) ** 2
    rhs = dv_abs ** 2 / (20 * tau) + tau * v_abs ** 2 / 80
    return lhs, rhs


def lemma2_branches(v_abs, dv_abs, tau, theta=0.1):
    """The two case bounds of the pointwise estimate.

    Small-|v| branch (``|v| <= 1/tau``): ``theta^2 min(|dv|,1)^2 / tau``.
    Large-|v| branch (``|v| >= 1/tau``): ``theta^2 tau |v|^2``.
    Each dominates the left side on its own range and is itself below the
    right side there.
    """
    small = theta ** 2 * np.minimum(dv_abs, 1.0) ** 2 / tau
    large = theta ** 2 * tau * np.asarray(v_abs) ** 2
    return small, large


def lemma2_check(v: SampledField, w: SampledField, tau: float, theta: float = 0.1) -> MarginReport:
    """``int|dbar v - w|^2 e >= tau/80 int|v|^2 e`` for admissible w.

    Preconditions (``|v| <= 1`` and the pointwise bound on ``|w|``) are
    checked and reported in ``hypothesis_status``; the computation always runs.
    """
    _check_tau(tau)
    check_support(v)
    pair = wirtinger_derivatives(v)
    h = v.patch.h
    s = v.patch.scale_exp2
    wrow = _weight_row(v.patch, tau)
    area = 4.0 ** -s
    valid = pair.valid

    vv = v.to_complex()
    va = np.sqrt(np.sum(np.abs(vv) ** 2, axis=2))
    db = pair.dzbar.to_complex()
    nd = np.sqrt(np.sum(np.abs(pair.dz.to_complex()) ** 2, axis=2))
    ww = w.to_complex()
    wa = np.sqrt(np.sum(np.abs(ww) ** 2, axis=2))
    bound = theta * np.sqrt(va) * np.minimum(nd, 1.0)

    v_excess = float(va.max() - 1.0)
    w_excess = float(np.where(valid, wa - bound, -np.inf).max())
    tol = 1e-12 * max(float(bound.max()), 1e-300)
    status = {
        "v_le_1": v_excess <= 0,
        "v_max_violation": max(v_excess, 0.0),
        "w_bound": w_excess <= tol,
        "w_max_violation": max(w_excess, 0.0),
    }

    resid = np.where(valid, np.sum(np.abs(db - ww) ** 2, axis=2), 0.0)
    lhs, q1 = _weighted(resid, wrow, h)
    mass, q2 = _weighted(va ** 2, wrow, h)
    lhs, q1, mass, q2 = lhs * area, q1 * area, mass * area, q2 * area
    r = tau / 80 * mass
    # w moves with the error of |dv| through min(|dv|, 1)
    err_dz = np.nan_to_num(pair.err_dz) * 2.0 ** (v.exp2 + s)
    err_db = np.nan_to_num(pair.err_dzbar) * 2.0 ** (v.exp2 + s)
    err = err_db + theta * np.sqrt(va) * err_dz
    f1 = _fd_error(resid, err, wrow, h) * area
    margin = lhs - r
    budget = _budget([q1, tau / 80 * q2, f1], [lhs, r])

    pl, pr = lemma2_pointwise(va, nd, tau, theta)
    ok = (pl <= pr * (1 + 1e-12)) | ~valid
    scale = np.maximum(pr, 1e-300)
    worst = float(np.where(valid, (pr - pl) / scale, np.inf).min()) if valid.any() else 0.0
    return MarginReport(
        "perturbed-weighted-bound", tau, v.patch.nx,
        sc_normalize(lhs, 0),
        [("mass_tau_over_80", sc_normalize(r, 0))],
        sc_normalize(margin, 0), sc_normalize(budget, 0),
        status,
        {"theta": theta,
         "rhs_tau_over_40": tau / 40 * mass,
         "margin_tau_over_40": lhs - tau / 40 * mass,
         "pointwise_worst_margin": worst,
         "pointwise_fraction_ok": float(ok[valid].mean()) if valid.any() else 1.0},
    )


# ---------------------------------------------------------------------------
# unique continuation mechanism


@dataclass
class ProbeReport:
    A: float
    alpha: float
    delta: float
    K: float
    leak: float
    rows: list
    hypothesis_status: dict
    ratio_log_slope: float
    mass_beyond: float
    extra: dict = field(default_factory=dict)

    @property
    def bound_holds(self) -> bool:
        return all(r["bound_holds"] for r in self.rows)

    def to_json(self) -> dict:
        return {
            "claim": "support-edge-decay",
            "A": self.A, "alpha": self.alpha, "delta": self.delta,
            "K": self.K, "leak": self.leak, "rows": self.rows,
            "hypothesis_status": self.hypothesis_status,
            "ratio_log_slope": self.ratio_log_slope,
            "mass_beyond": self.mass_beyond,
            "bound_holds": self.bound_holds,
        }


def vanishing_probe(u: SampledField, A: float, alpha: float, cutoff: CutoffProfile = None,
                    tau_list=(10, 20, 40), theta: float = 0.1, delta: float = None) -> ProbeReport:
    """Weighted-estimate probe for a map vanishing on ``{x >= -A y^2}``.

    With ``chi = cutoff(x)`` (0 for x < -2 alpha, 1 for x > -alpha) and
    ``w = dbar u`` on ``x >= -alpha`` (0 elsewhere), computes for each tau

        L = int |dbar(chi u) - w|^2 e^{tau phi},  R = tau/80 int |chi u|^2 e^{tau phi}.

    The integrand of L lives in ``x <= -alpha``, so ``L <= K e^{tau phi(-alpha)}``
    with the tau-free constant ``K = int_{x <= -alpha} |dbar(chi u) - w|^2``.
    Violated hypotheses are reported, not raised.
    """
    if cutoff is None:
        cutoff = CutoffProfile(-2 * alpha, -alpha)
    if cutoff.t0 < -2 * alpha - 1e-12 or cutoff.t1 > -alpha + 1e-12 or not cutoff.rising:
        raise ParameterError("cutoff must rise from 0 at x <= -2 alpha to 1 at x >= -alpha")
    if delta is None:
        delta = alpha / 4
    patch = u.patch
    h = patch.h
    x = patch.phys_x[None, :]
    y = np.ldexp(patch.ys, -patch.scale_exp2)[:, None]
    area = 4.0 ** -patch.scale_exp2

    uu = u.to_complex()
    ua = np.sqrt(np.sum(np.abs(uu) ** 2, axis=2))
    peak = float(ua.max())
    zero_region = x >= -A * y ** 2
    vanish_excess = float(ua[zero_region].max()) if zero_region.any() else 0.0
    chi = cutoff(np.broadcast_to(x, patch.shape))
    v = SampledField(patch, uu * chi[..., None])
    try:
        check_support(v)
        compact = True
    except Exception:
        compact = False

    pv = wirtinger_derivatives(v)
    pu = wirtinger_derivatives(u)
    valid = pv.valid
    dv = pv.dzbar.to_complex()
    du_bar = pu.dzbar.to_complex()
    right = np.broadcast_to(x >= -alpha, patch.shape)
    wfield = np.where(right[..., None], du_bar, 0.0)
    integrand = np.where(valid, np.sum(np.abs(dv - wfield) ** 2, axis=2), 0.0)

    left = ~right
    K = trapezoid2d(np.where(left, integrand, 0.0), h) * area
    leak = trapezoid2d(np.where(right, integrand, 0.0), h) * area
    va2 = np.abs(v.to_complex()) ** 2
    va2 = np.sum(va2, axis=2)
    beyond = np.broadcast_to(x > -alpha + delta, patch.shape)
    mass_beyond = trapezoid2d(np.where(beyond, ua ** 2, 0.0), h) * area

    # differential inequality |dbar u| <= theta |u|^(1/2) |du| (informational)
    nd = np.sqrt(np.sum(np.abs(pu.dz.to_complex()) ** 2, axis=2))
    nb = np.sqrt(np.sum(np.abs(du_bar) ** 2, axis=2))
    support = pu.valid & (ua > 1e-8 * max(peak, 1e-300))
    excess = nb - theta * np.sqrt(ua) * nd
    ineq_ok = bool((excess[support] <= 1e-12 * max(nb.max(), 1e-300)).all()) if support.any() else True

    status = {
        "vanishes_on_parabola_side": vanish_excess <= 1e-12 * max(peak, 1e-300),
        "vanish_max_violation": vanish_excess,
        "cutoff_support_compact": compact,
        "differential_inequality": ineq_ok,
    }

    rows = []
    ratios = []
    err_scale = 4.0 ** patch.scale_exp2
    fd = np.nan_to_num(pv.err_dzbar) ** 2 * err_scale
    for tau in tau_list:
        wrow = _weight_row(patch, tau)
        L, qL = _weighted(integrand, wrow, h)
        M, qM = _weighted(va2, wrow, h)
        L, qL, M, qM = L * area, qL * area, M * area, qM * area
        R = tau / 80 * M
        edge = math.exp(tau * float(CarlemanWeight.phi(-alpha)))
        fdL = _fd_error(integrand, np.sqrt(fd), wrow, h) * area
        budget = BUDGET_SAFETY * (qL + fdL) + ROUNDOFF * L
        k_eff = L / edge
        rows.append({
            "tau": tau, "L": L, "R": R, "L_over_R": L / R if R > 0 else math.inf,
            "edge_weight": edge, "K_eff": k_eff, "K": K,
            "bound_holds": bool(L <= K * edge + budget),
            "budget": budget,
        })
        if R > 0 and L > 0:
            ratios.append((tau, math.log(L / R)))
    slope = float(np.polyfit(*zip(*ratios), 1)[0]) if len(ratios) >= 2 else 0.0
    return ProbeReport(A, alpha, delta, K, leak, rows, status, slope, mass_beyond)


# ---------------------------------------------------------------------------
# why the Holder exponent 1/2 is the limit


def sharpness_gap(alpha: float, epsilon: float, tau: float, C: float = 1.0):
    """Both sides of the pointwise inequality at the extremal configuration.

    At a point where ``dv + tau phi' v = 0`` and ``|v| = epsilon / tau``
    the left side is at most ``5 epsilon^2 / tau`` while the right side is at
    least ``(C/4) epsilon^(2+2 alpha) tau^(-2 alpha)``.
    """
    if not 0 < alpha <= 0.5:
        raise ParameterError("alpha must lie in (0, 1/2]")
    if not 0 < epsilon < 0.5:
        raise ParameterError("epsilon must lie in (0, 1/2)")
    if not tau > 0 or not C > 0:
        raise ParameterError("tau and C must be positive")
    lhs = 5.0 * epsilon ** 2 / tau
    rhs = 0.25 * C * epsilon ** (2 + 2 * alpha) * tau ** (-2 * alpha)
    return lhs, rhs


def sharpness_slope(alpha: float, epsilon: float = 0.1, C: float = 1.0,
                    taus=(10.0, 1e2, 1e3, 1e4)) -> float:
    """Least-squares slope of log(lhs/rhs) against log(tau)."""
    lt = np.log(np.asarray(taus, float))
    lr = [math.log(l / r) for l, r in (sharpness_gap(alpha, epsilon, t, C) for t in taus)]
    return float(np.polyfit(lt, lr, 1)[0])
