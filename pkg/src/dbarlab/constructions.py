"""Explicit multi-scale maps and measurements of their claimed properties.

Every dyadic map is defined annulus by annulus.  On the annulus
``2**-m <= |z| < 2**(1-m)`` it is written in the local variable
``zeta = 2**m z`` (so ``1 <= |zeta| < 2``) as a vector of mantissa jets
times per-component powers of two, which keeps factors such as
``2**(m*m/2) z**m`` representable for any m.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .cutoff import CutoffProfile
from .errors import DomainError, ParameterError, SingularityError
from .reports import RatioReport
from .scaled_field import (Annulus, AnnulusSpec, GridPatch, SampledField, ScaledComplex,
                           build_patch, ldexp_c, sc_normalize)
from .wirtinger import partials, wirtinger_derivatives

SQRT2 = math.sqrt(2.0)

# transitions in the local radius |zeta|
EX31_CHI = CutoffProfile(1.25, 1.75)
EX32_CHI = CutoffProfile(1.80, 1.95)
EX32_PSI = CutoffProfile(1.05, 1.15, rising=False)

# radial envelope of the lift bumps, slightly overhanging [1, 2]
LIFT_RISE = CutoffProfile(0.9, 1.0)
LIFT_FALL = CutoffProfile(2.0, 2.2, rising=False)

# annuli more than this many steps inside the reference one underflow to zero
_DEPTH = 64

REMARK2_C = 4.0


# ---------------------------------------------------------------------------
# jets: value with both Wirtinger derivatives (in the variable zeta)


@dataclass
class Jet:
    f: np.ndarray
    d: np.ndarray
    db: np.ndarray

    def __add__(self, o):
        if not isinstance(o, Jet):
            return Jet(self.f + o, self.d, self.db)
        return Jet(self.f + o.f, self.d + o.d, self.db + o.db)

    __radd__ = __add__

    def __neg__(self):
        return Jet(-self.f, -self.d, -self.db)

    def __sub__(self, o):
        return self + (-o)

    def __rsub__(self, o):
        return (-self) + o

    def __mul__(self, o):
        if not isinstance(o, Jet):
            return Jet(self.f * o, self.d * o, self.db * o)
        return Jet(self.f * o.f, self.d * o.f + self.f * o.d, self.db * o.f + self.f * o.db)

    __rmul__ = __mul__


def zeros_jet(zeta):
    z = np.zeros_like(zeta, dtype=complex)
    return Jet(z, z.copy(), z.copy())


def power_jet(zeta, k: int) -> Jet:
    """``zeta**k`` (k may be negative; |zeta| >= 1/2 on every use)."""
    if k == 0:
        one = np.ones_like(zeta, dtype=complex)
        return Jet(one, np.zeros_like(one), np.zeros_like(one))
    return Jet(zeta ** k, k * zeta ** (k - 1), np.zeros_like(zeta, dtype=complex))


def linear_jet(zeta, c: complex) -> Jet:
    """``zeta - c``."""
    return Jet(zeta - c, np.ones_like(zeta, dtype=complex), np.zeros_like(zeta, dtype=complex))


def radial_jet(zeta, profile: Callable, dprofile: Callable) -> Jet:
    """h(|zeta|): d h = h' conj(zeta) / (2r), dbar h = h' zeta / (2r)."""
    r = np.abs(zeta)
    safe = np.where(r > 0, r, 1.0)
    hp = dprofile(r)
    return Jet(profile(r).astype(complex), hp * np.conj(zeta) / (2 * safe), hp * zeta / (2 * safe))


def cutoff_jet(zeta, prof: CutoffProfile) -> Jet:
    return radial_jet(zeta, prof, lambda r: prof.radial_derivative(r, 1))


def _half_exp(m: int):
    """``2**(-m*m/2) = c * 2**e`` with integer e and c in {1, sqrt 2}."""
    q = -m * m
    return (SQRT2 if q % 2 else 1.0), q // 2


# ---------------------------------------------------------------------------
# local formulas; each returns (jets, exps): component c is jets[c] * 2**exps[c]


def _swap(m, a, b):
    return [b, a] if m % 2 else [a, b]


def _ex31_local(m: int, zeta):
    c, e = _half_exp(m)
    chi = cutoff_jet(zeta, EX31_CHI)
    u1 = power_jet(zeta, m)
    u2 = SQRT2 * (chi * power_jet(zeta, m - 1) + (1 - chi) * power_jet(zeta, m + 1))
    return [c * u for u in _swap(m, u1, u2)], [e, e]


def _ex32_local(m: int, zeta):
    c, e = _half_exp(m)
    chi = cutoff_jet(zeta, EX32_CHI)
    psi = cutoff_jet(zeta, EX32_PSI)
    u1 = power_jet(zeta, m - 1) * linear_jet(zeta, 1.5)
    u2 = SQRT2 * (chi * power_jet(zeta, m - 2) * linear_jet(zeta, 3.0)
                  + psi * power_jet(zeta, m) * linear_jet(zeta, 0.75))
    return [c * u for u in _swap(m, u1, u2)], [e, e]


def _control_local(m: int, zeta):
    return [power_jet(zeta, 1)], [-m]


def lift_bump(zeta, m: int) -> Jet:
    """``2**(2m) psi_m`` in its own local variable.

    ``|zeta - 3/2|**2`` near the zero, capped smoothly to a positive constant
    further out (constant on a disc around the critical point of the first
    component), times a radial envelope supported in ``0.9 < |zeta| < 2.2``.
    """
    mm = max(m, 2)
    qa, qb = (0.4 / mm) ** 2, (0.8 / mm) ** 2
    w = zeta - 1.5
    q = Jet((np.abs(w) ** 2).astype(complex), np.conj(w), w.astype(complex))
    step = CutoffProfile(qa, qb)
    t = q.f.real
    ds = step.radial_derivative(t, 1)
    sig = Jet(step(t).astype(complex), ds * q.d, ds * q.db)
    g = (1 - sig) * q + sig * qb
    env = cutoff_jet(zeta, LIFT_RISE) * cutoff_jet(zeta, LIFT_FALL)
    return g * env


def _remark3_local(m: int, zeta):
    jets, exps = _ex32_local(m, zeta)
    # eps_j psi_j = 2**(-j*j - 2j) * lift_bump(2**(j-m) zeta); common exponent -m*m - 2m
    u3 = zeros_jet(zeta)
    r = np.abs(zeta)
    for j in (m - 1, m, m + 1):
        if j < 1:
            continue
        zj = np.ldexp(zeta.real, j - m) + 1j * np.ldexp(zeta.imag, j - m)
        rj = r * 2.0 ** (j - m)
        if not ((rj > 0.9) & (rj < 2.2)).any():
            continue
        b = lift_bump(zj, j)
        # d/dzeta_m = 2**(j-m) d/dzeta_j
        k = 2.0 ** (j - m)
        rel = 2.0 ** (-(j * j + 2 * j) + m * m + 2 * m)
        u3 = u3 + Jet(b.f * rel, b.d * rel * k, b.db * rel * k)
    e3 = -m * m - 2 * m
    # u4 = z u3 = 2**-m zeta u3
    u4 = power_jet(zeta, 1) * u3
    return jets + [u3, u4], exps + [e3, e3 - m]


# ---------------------------------------------------------------------------
# the map object


def annulus_index(z) -> np.ndarray:
    """m with ``2**-m <= |z| < 2**(1-m)`` (exact, via frexp)."""
    return 1 - np.frexp(np.abs(z))[1]


@dataclass(frozen=True)
class ExampleMap:
    """A map from the disc to C^k.

    Dyadic maps carry ``local(m, zeta)``; others carry a plain vectorized
    evaluator ``plain(z) -> (..., k)`` together with analytic derivatives.
    """

    kind: str
    components: int
    parity_rule: str = ""
    local: Optional[Callable] = field(default=None, repr=False)
    plain: Optional[Callable] = field(default=None, repr=False)
    min_annulus: int = 2

    # -- point evaluation --------------------------------------------------

    def __call__(self, z: complex):
        return self.evaluate(z)

    def evaluate(self, z: complex):
        z = complex(z)
        if self.plain is not None:
            return [ScaledComplex.from_value(v) for v in self.plain(np.array([z]))[0]]
        if abs(z) >= math.ldexp(1.0, 1 - self.min_annulus):
            raise DomainError(f"|z| = {abs(z)} is outside the annuli n >= {self.min_annulus}")
        if z == 0:
            return [ScaledComplex(0j, 0)] * self.components
        m = int(annulus_index(z))
        zeta = np.array([complex(math.ldexp(z.real, m), math.ldexp(z.imag, m))])
        jets, exps = self.local(m, zeta)
        return [sc_normalize(complex(j.f[0]), e) for j, e in zip(jets, exps)]

    def local_jets(self, m: int, zeta):
        """Jets on annulus m in one shared exponent: ``(jets, e, e + m)``.

        Values are ``jets[c].f * 2**e`` and z-derivatives ``jets[c].d * 2**(e+m)``.
        """
        jets, exps = self.local(m, np.asarray(zeta, complex))
        e = max(exps)
        out = [j * math.ldexp(1.0, x - e) for j, x in zip(jets, exps)]
        return out, e, e + m

    # -- grid sampling -----------------------------------------------------

    def sample_all(self, patch: GridPatch):
        """(u, d u, dbar u) on the patch with analytic derivatives."""
        shape = patch.shape + (self.components,)
        vals = np.zeros(shape, complex)
        dz = np.zeros(shape, complex)
        dzb = np.zeros(shape, complex)
        s = patch.scale_exp2
        if self.plain is not None:
            z = patch.z
            v, d, db = self.plain(z, derivatives=True)
            k = 2.0 ** -s
            return (SampledField(patch, v, 0), SampledField(patch, d / k, s), SampledField(patch, db / k, s))
        w = patch.w
        zero = w == 0
        mw = 1 - np.frexp(np.abs(w))[1]
        mw = np.where(zero, 0, mw)
        m_all = mw + s
        m_ref = int(patch.region.n) if isinstance(patch.region, Annulus) else int(m_all[~zero].min())
        _, e_ref, _ = self.local_jets(m_ref, np.array([1.5 + 0j]))
        for m in np.unique(m_all[~zero]):
            m = int(m)
            if m - m_ref > _DEPTH:
                continue
            if m < 1:
                raise DomainError("patch reaches |z| >= 1")
            sel = (m_all == m) & ~zero
            zeta = np.ldexp(w[sel].real, m - s) + 1j * np.ldexp(w[sel].imag, m - s)
            jets, e, _ = self.local_jets(m, zeta)
            with np.errstate(under="ignore"):
                for c, j in enumerate(jets):
                    vals[sel, c] = ldexp_c(j.f, e - e_ref)
                    dz[sel, c] = ldexp_c(j.d, e + m - e_ref - s)
                    dzb[sel, c] = ldexp_c(j.db, e + m - e_ref - s)
        return (SampledField(patch, vals, e_ref), SampledField(patch, dz, e_ref + s),
                SampledField(patch, dzb, e_ref + s))

    def sample(self, patch: GridPatch) -> SampledField:
        return self.sample_all(patch)[0]


EX31 = ExampleMap("ex31", 2, "odd n swaps u1 and u2", _ex31_local)
EX32 = ExampleMap("ex32", 2, "odd n swaps u1 and u2", _ex32_local)
CONTROL = ExampleMap("control", 1, "", _control_local)
REMARK3 = ExampleMap("remark3", 4, "odd n swaps u1 and u2", _remark3_local)

MAPS = {"ex31": EX31, "ex32": EX32, "control": CONTROL, "remark3": REMARK3}


def get_map(kind: str) -> ExampleMap:
    try:
        return MAPS[kind]
    except KeyError:
        raise ParameterError(f"unknown example {kind!r}; expected one of {sorted(MAPS)}") from None


def example31_eval(z: complex):
    return EX31.evaluate(z)


def example32_eval(z: complex):
    return EX32.evaluate(z)


def remark3_eval(z: complex):
    return REMARK3.evaluate(z)


# ---------------------------------------------------------------------------
# cutoffs on a given annulus


@dataclass(frozen=True)
class AnnulusCutoff:
    """``profile(2**n |z|)`` with its certified derivative bounds."""

    ann: AnnulusSpec
    profile: CutoffProfile

    def __call__(self, z) -> np.ndarray:
        return self.profile(np.ldexp(np.abs(z), self.ann.n))

    def radial_derivative(self, z, k: int = 1) -> np.ndarray:
        return self.profile.radial_derivative(np.ldexp(np.abs(z), self.ann.n), k) * 2.0 ** (k * self.ann.n)

    def certified_bound(self, k: int) -> float:
        return self.profile.certified_bound(k, self.ann.n)

    def sample(self, patch: GridPatch) -> SampledField:
        return SampledField(patch, self(patch.z).astype(complex))


def cutoff_chi(ann: AnnulusSpec, side: str, profile: CutoffProfile,
               avoid_band: bool = False) -> AnnulusCutoff:
    """Radial cutoff on annulus ``ann`` equal to 1 near its ``side`` edge.

    ``profile`` gives the transition in ``|w| = 2**n |z|`` units and must lie
    strictly inside ``(1, 2)``; with ``avoid_band`` also outside
    ``[5/4, 7/4]``.
    """
    t0, t1 = profile.t0, profile.t1
    if not (1.0 < t0 and t1 < 2.0):
        raise ParameterError(f"transition [{t0}, {t1}] is not inside the annulus (1, 2)")
    if avoid_band and not (t1 <= 1.25 or t0 >= 1.75):
        raise ParameterError(f"transition [{t0}, {t1}] meets the band [1.25, 1.75]")
    if side == "outer":
        prof = CutoffProfile(t0, t1, rising=True)
    elif side == "inner":
        prof = CutoffProfile(t0, t1, rising=False)
    else:
        raise ParameterError("side must be 'inner' or 'outer'")
    return AnnulusCutoff(ann, prof)


# ---------------------------------------------------------------------------
# per-annulus measurements


BUDGET_SAFETY = 2.0
ROUNDOFF = 1e-12


def _annulus_field(emap: ExampleMap, n: int, resolution: int):
    if n < 4:
        raise ParameterError("annulus reports need n >= 4")
    if resolution < 256:
        raise ParameterError("annulus reports need resolution >= 256")
    patch = build_patch(Annulus(n), resolution)
    u = emap.sample(patch)
    return patch, u, wirtinger_derivatives(u)


def _band(r, h, lo, hi):
    """Points whose whole stencil stays inside lo < r < hi."""
    reach = 2 * math.sqrt(2.0) * h
    return (r - reach > lo) & (r + reach < hi)


def annulus_ratio_report(emap: ExampleMap, n: int, resolution: int = 512) -> RatioReport:
    """Grid measurements of ``|dbar u| / |d u|`` and related bounds on annulus n."""
    patch, u, pair = _annulus_field(emap, n, resolution)
    r = np.abs(patch.w)
    h = patch.h
    valid = pair.valid & np.isfinite(pair.err_dzbar)
    ann = valid & (r >= 1.0) & (r <= 2.0)
    nd = pair.dz.norm()
    nb = pair.dzbar.norm()
    err = BUDGET_SAFETY * pair.err_dzbar + ROUNDOFF * nd[ann].max()
    sup_d = nd[ann].max()
    keep = ann & (nd >= 1e-10 * sup_d)
    ratio = np.where(keep, nb / np.where(nd > 0, nd, 1.0), 0.0)
    sup_ratio = float(ratio.max())
    values = {"flagged_points": int((ann & ~keep).sum()),
              "sup_dzbar_mantissa": float(nb[ann].max()),
              "derivative_exp2": pair.dz.exp2}

    # dbar u against C |z|**(n-1) (2**(n*n/2) + 2**(n*n/2 + 2n) |z|**2); in zeta units
    # the bracket is 2**(-n*n/2 + n) |zeta|**(n-1) (1 + |zeta|**2)
    c, e = _half_exp(n)
    bracket = np.log2(c) + e + n + (n - 1) * np.log2(np.where(r > 0, r, 1)) + np.log2(1 + r * r)
    with np.errstate(divide="ignore"):
        log_nb = np.log2(nb) + pair.dzbar.exp2
    star = np.where(ann & (nb > 0), log_nb - bracket, -np.inf)
    values["star_constant"] = float(2.0 ** star.max()) if np.isfinite(star.max()) else 0.0

    if emap.kind == "ex31":
        hol = valid & ((_band(r, h, 0.875, 1.25)) | _band(r, h, 1.75, 2.5))
        values["holomorphic_band_sup_dzbar"] = float(nb[hol].max())
        values["holomorphic_band_budget"] = float(err[hol].max())
        values["holomorphic_band_ok"] = bool((nb[hol] <= err[hol]).all())
    if emap.kind in ("ex32", "remark3"):
        values.update(_ex32_measurements(emap, n, patch, u, pair, valid, err))
    fd = float(np.nanmax(np.where(ann, pair.err_dzbar, np.nan)))
    return RatioReport(emap.kind, n, resolution, sup_ratio, n * sup_ratio, fd, values)


def _ex32_measurements(emap, n, patch, u, pair, valid, err):
    r = np.abs(patch.w)
    h = patch.h
    out = {}
    # zero at a_n, exactly
    a = Annulus(n).a_n
    out["u_at_a_n"] = max(abs(v.mantissa) for v in emap.evaluate(a))
    # holomorphic band r_n < |z| < R_n
    band = valid & _band(r, h, 1.25, 1.75)
    nb = pair.dzbar.norm()
    out["band_sup_dzbar"] = float(nb[band].max())
    out["band_budget"] = float(err[band].max())
    out["band_ok"] = bool((nb[band] <= err[band]).all())
    out["band_sup_u2"] = float(np.abs(u.values[band, 1 - n % 2]).max())
    # |d u1| >= (n/10) 2**(n*n/2) |z|**(n-1) on the two transition sub-annuli
    prim = n % 2
    zones = valid & (r >= 1.0) & (r <= 2.0) & (
        ((r >= EX32_PSI.t0) & (r <= EX32_PSI.t1)) | ((r >= EX32_CHI.t0) & (r <= EX32_CHI.t1)))
    d1 = np.abs(pair.dz.values[..., prim])
    d1_err = BUDGET_SAFETY * pair.err_dz
    c, e = _half_exp(n)
    # bound in units of 2**(dz.exp2)
    bound = (n / 10.0) * c * np.ldexp(1.0, e + n - pair.dz.exp2) * r ** (n - 1)
    with np.errstate(invalid="ignore"):
        ok = d1 + np.nan_to_num(d1_err) >= bound
    rel = np.where(zones, d1 / np.where(bound > 0, bound, 1), np.inf)
    out["lower_bound_points"] = int(zones.sum())
    out["lower_bound_min_ratio"] = float(rel.min())
    out["lower_bound_ok"] = bool(ok[zones].all())
    dist = np.abs(patch.w - 1.5)
    out["min_dist_to_a_over_z"] = float((dist[zones] / r[zones]).min())
    return out


def ratio_constants(emap: ExampleMap, n_values, resolution: int = 512):
    """``C_n`` for each n plus the max/min spread and the least-squares slope."""
    reps = [annulus_ratio_report(emap, n, resolution) for n in n_values]
    cn = np.array([rep.c_n for rep in reps])
    ns = np.array(list(n_values), float)
    tail = ns >= 6
    slope = float(np.polyfit(ns[tail], cn[tail], 1)[0]) if tail.sum() >= 2 else 0.0
    return {"n": [int(x) for x in ns], "C_n": cn.tolist(), "spread": float(cn.max() / cn.min()),
            "slope_n_ge_6": slope, "mean_n_ge_6": float(cn[tail].mean()) if tail.any() else float("nan"),
            "reports": reps}


# ---------------------------------------------------------------------------
# decay


def _polar(n_r=129, n_t=256):
    rad = np.linspace(1.0, 2.0, n_r)
    th = 2 * np.pi * np.arange(n_t) / n_t
    return (rad[:, None] * np.exp(1j * th)[None, :]).ravel()


def annulus_sup_log2(emap: ExampleMap, n: int, norm: str = "max") -> float:
    """log2 of sup |u| over the closed annulus n (polar sampling incl. both edges)."""
    jets, e, _ = emap.local_jets(n, _polar())
    a = np.stack([np.abs(j.f) for j in jets], axis=-1)
    v = a.max(axis=-1) if norm == "max" else np.sqrt((a ** 2).sum(axis=-1))
    return float(np.log2(v.max()) + e)


def decay_report(emap: ExampleMap, n_range) -> list:
    """Per-annulus ``log2 sup|u|`` against ``-n**2/3`` and the local vanishing order.

    The local order at n is ``log2 sup_n - log2 sup_{n+1}`` (|z| halves from
    one annulus to the next).  Both the max-component and the Euclidean
    norm are reported; ``within_bound`` uses the max-component norm.
    """
    ns = list(n_range)
    if min(ns) < emap.min_annulus:
        raise ParameterError(f"n must be >= {emap.min_annulus}")
    sups = {n: annulus_sup_log2(emap, n, "max") for n in ns + [ns[-1] + 1]}
    eucl = {n: annulus_sup_log2(emap, n, "euclid") for n in ns}
    rows = []
    for n in ns:
        rows.append({"n": n, "log2_sup_u": sups[n], "log2_sup_u_euclid": eucl[n],
                     "bound": -n * n / 3.0, "within_bound": sups[n] <= -n * n / 3.0,
                     "local_order": sups[n] - sups[n + 1]})
    return rows


# ---------------------------------------------------------------------------
# exponent rigidity


def remark2_terms(p: float, n: int):
    """log2 of the two cutoff terms over ``|d u1|`` at ``|z| = 2**-n``.

    The scale factor ``2**(n*n/2)`` is replaced by ``2**(n*n/p)``; the
    cutoff gradient is normalized to ``2**n``.
    """
    if not p > 1:
        raise ParameterError("p must be > 1")
    lz = -n  # log2 |z|
    log_d = math.log2(n) + n * n / p + (n - 1) * lz
    t1 = n + (n - 1) ** 2 / p + (n - 1) * lz
    t2 = n + (n + 1) ** 2 / p + (n + 1) * lz
    return t1 - log_d, t2 - log_d


def remark2_probe(p: float, n: int, C: float = REMARK2_C):
    """Whether each term is at most ``(C/n) |d u1|`` at ``|z| = 2**-n``."""
    r1, r2 = remark2_terms(p, n)
    lim = math.log2(C / n)
    return r1 <= lim, r2 <= lim


# ---------------------------------------------------------------------------
# non-uniqueness pair


def _c_of(p2, k):
    return k * np.maximum(np.asarray(p2).real, 0.0) ** ((k - 1) / k)


_J0 = np.array([[0, -1, 0, 0], [1, 0, 0, 0], [0, 0, 0, -1], [0, 0, 1, 0]], float)
_E32 = np.zeros((4, 4))
_E32[2, 1] = 1.0
_JC = _E32 @ _J0 - _J0 @ _E32


def structure_J(p, k: int) -> np.ndarray:
    """Real 4x4 J at image points ``p`` (shape (..., 2), complex coordinates).

    J is the standard structure conjugated by the shear ``e2 -> e2 + c e3``
    with ``c = k (Re p2)_+ ** ((k-1)/k)``, so ``J (1, 0) = (i, c)``.
    """
    p = np.asarray(p, complex)
    c = _c_of(p[..., 1], k)
    return _J0 + c[..., None, None] * _JC


def _realify(v):
    v = np.asarray(v, complex)
    return np.stack([v[..., 0].real, v[..., 0].imag, v[..., 1].real, v[..., 1].imag], axis=-1)


def _intro_u(z, derivatives=False):
    z = np.asarray(z, complex)
    v = np.stack([z, np.zeros_like(z)], axis=-1)
    if not derivatives:
        return v
    one = np.stack([np.ones_like(z), np.zeros_like(z)], axis=-1)
    return v, one, np.zeros_like(v)


def _intro_v(k):
    def fn(z, derivatives=False):
        z = np.asarray(z, complex)
        y = np.maximum(z.imag, 0.0)
        v = np.stack([z, (y ** k).astype(complex)], axis=-1)
        if not derivatives:
            return v
        # d/dy y**k = k y**(k-1); d = (d_x - i d_y)/2, dbar = (d_x + i d_y)/2
        dy = k * y ** (k - 1)
        d = np.stack([np.ones_like(z), -0.5j * dy], axis=-1)
        db = np.stack([np.zeros_like(z), 0.5j * dy + 0j], axis=-1)
        return v, d, db
    return fn


@dataclass(frozen=True)
class IntroPair:
    k: int
    u: ExampleMap
    v: ExampleMap

    def residual(self, f: SampledField) -> dict:
        """Pointwise ``|d_y f - J(f) d_x f|`` with its truncation budget.

        ``f`` is a sample of u or v on a patch that does not straddle
        ``Im z = 0``.
        """
        fx, fy = partials(f, 4)
        gx, gy = partials(f, 6)
        s = 2.0 ** f.patch.scale_exp2
        fx, fy, gx, gy = (a * s for a in (fx, fy, gx, gy))
        J = structure_J(f.values, self.k)
        res = _realify(fy) - np.einsum("...ij,...j->...i", J, _realify(fx))
        err = _realify(fy - gy) - np.einsum("...ij,...j->...i", J, _realify(fx - gx))
        res_n = np.linalg.norm(res, axis=-1)
        err_n = np.linalg.norm(err, axis=-1)
        ny, nx = f.patch.shape
        inner = np.zeros((ny, nx), bool)
        inner[3:ny - 3, 3:nx - 3] = True
        scale = float(np.abs(fx).max() + np.abs(fy).max())
        budget = BUDGET_SAFETY * err_n + 1e-12 * scale
        return {"sup_residual": float(res_n[inner].max()), "sup_budget": float(budget[inner].max()),
                "ok": bool((res_n[inner] <= budget[inner]).all())}

    def image_points(self, y, x=(0.0,)):
        z = (np.asarray(x, float)[:, None] + 1j * np.asarray(y, float)[None, :]).ravel()
        return self.u.plain(z), self.v.plain(z)

    def injective(self, y, x=(0.0, 0.3)) -> bool:
        """Distinct sample points with Im z > 0 map to distinct image points under v."""
        _, pv = self.image_points(y, x)
        key = np.round(_realify(pv), 15)
        return len(np.unique(key, axis=0)) == len(key)

    def holder_estimate(self, n_levels: int = 48, lo: float = 1e-8, hi: float = 0.5) -> dict:
        """Slope of the upper envelope of ``log|dJ|`` against ``log|dp|``.

        Pairs are drawn from both images (u and v at geometrically spaced
        heights); the envelope is the per-bin maximum and its slope over the
        smallest half of the ``|dp|`` range estimates the Holder exponent.
        """
        y = np.geomspace(lo, hi, n_levels)
        pu, pv = self.image_points(y, x=(0.0, 0.25))
        pts = np.concatenate([pu, pv])
        J = structure_J(pts, self.k)
        i, j = np.triu_indices(len(pts), 1)
        dp = np.linalg.norm(_realify(pts[i] - pts[j]), axis=-1)
        dJ = np.linalg.norm(J[i] - J[j], ord=2, axis=(-2, -1))
        keep = (dp > 0) & (dJ > 0)
        lp, lj = np.log(dp[keep]), np.log(dJ[keep])
        edges = np.linspace(lp.min(), lp.max(), 41)
        idx = np.clip(np.digitize(lp, edges) - 1, 0, 39)
        bx, by = [], []
        for b in range(40):
            sel = idx == b
            if sel.any():
                k = np.argmax(lj[sel])
                bx.append(lp[sel][k])
                by.append(lj[sel][k])
        bx, by = np.array(bx), np.array(by)
        small = bx <= np.median(bx)
        beta = float(np.polyfit(bx[small], by[small], 1)[0])
        return {"beta": beta, "expected": (self.k - 1) / self.k, "pairs": int(keep.sum())}


def intro_pair(k: int) -> IntroPair:
    if int(k) != k or k < 2:
        raise ParameterError("k must be an integer >= 2")
    k = int(k)
    u = ExampleMap("intro_u", 2, "", plain=_intro_u)
    v = ExampleMap(f"intro_v{k}", 2, "", plain=_intro_v(k))
    return IntroPair(k, u, v)


# ---------------------------------------------------------------------------
# lift and its rank-one structure map


def Q_matrix(d, db) -> np.ndarray:
    """Rank-one ``conj(db) <., d> / |d|**2``; 0 where both vanish."""
    d = np.asarray(d, complex)
    db = np.asarray(db, complex)
    nd = np.sum(np.abs(d) ** 2, axis=-1)
    nb = np.sum(np.abs(db) ** 2, axis=-1)
    if np.any((nd == 0) & (nb > 0)):
        raise SingularityError("d U vanishes where dbar U does not")
    safe = np.where(nd > 0, nd, 1.0)
    return np.conj(db)[..., :, None] * np.conj(d)[..., None, :] / safe[..., None, None]


def Q_on_curve(z: complex) -> np.ndarray:
    """4x4 matrix Q at U(z), sending d U(z) to conj(dbar U(z))."""
    z = complex(z)
    if abs(z) >= 0.5:
        raise DomainError("|z| must be < 1/2")
    if z == 0:
        return np.zeros((4, 4), complex)
    m = int(annulus_index(z))
    zeta = np.array([complex(math.ldexp(z.real, m), math.ldexp(z.imag, m))])
    jets, _, _ = REMARK3.local_jets(m, zeta)
    d = np.array([j.d[0] for j in jets])
    db = np.array([j.db[0] for j in jets])
    return Q_matrix(d, db)


def q_norm_annulus(m: int, n_r: int = 401, n_t: int = 512) -> float:
    """sup over annulus m of ``|dbar U| / |d U|`` (analytic, polar sampling)."""
    zeta = _polar(n_r, n_t)
    jets, _, _ = REMARK3.local_jets(m, zeta)
    d = np.stack([j.d for j in jets], axis=-1)
    db = np.stack([j.db for j in jets], axis=-1)
    nd = np.linalg.norm(d, axis=-1)
    nb = np.linalg.norm(db, axis=-1)
    if np.any((nd == 0) & (nb > 0)):
        raise SingularityError(f"d U vanishes on annulus {m} where dbar U does not")
    return float(np.max(np.where(nd > 0, nb / np.where(nd > 0, nd, 1), 0.0)))


def q_norm_profile(m_values, depth: int = 12) -> dict:
    """sup of ``||Q||`` over ``|z| <= 2**-m``, as the max over annuli m..m+depth."""
    m_values = list(m_values)
    if min(m_values) < 7:
        raise ParameterError("lift checks are restricted to m >= 7")
    per = {j: q_norm_annulus(j) for j in range(min(m_values), max(m_values) + depth + 1)}
    sups = [max(per[j] for j in range(m, m + depth + 1)) for m in m_values]
    return {"m": m_values, "sup_Q": sups, "per_annulus": per}
