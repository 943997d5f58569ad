"""Overflow-safe complex scalars, uniform grid patches and sampled fields.

Values such as ``2**(n*n/2) * z**n`` span hundreds of binary orders across
dyadic annuli.  Scalars are therefore kept as a mantissa plus an integer
binary exponent (:class:`ScaledComplex`), and whole grids share one exponent
offset (:class:`SampledField`), with coordinates rescaled per annulus so the
mantissas stay of order one.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Callable, Optional, Union

import numpy as np

from .errors import DomainError, InvalidInputError, ParameterError, SupportError

# below this exponent gap the smaller addend cannot change a double mantissa
_ADD_GAP = 55
SUPPORT_THRESHOLD = 1e-12


def ldexp_c(x, e):
    """Complex ``x * 2**e`` (numpy's ldexp is real-only)."""
    x = np.asarray(x)
    return np.ldexp(x.real, e) + 1j * np.ldexp(x.imag, e)


@dataclass(frozen=True)
class ScaledComplex:
    """The complex number ``mantissa * 2**exp2``.

    Canonical instances (as built by :func:`sc_normalize`) have
    ``1 <= |mantissa| < 2`` or are the zero ``(0, 0)``.
    """

    mantissa: complex
    exp2: int

    @classmethod
    def from_value(cls, value) -> "ScaledComplex":
        return sc_normalize(complex(value), 0)

    def value(self) -> complex:
        """Plain complex value; raises OverflowError if it is not representable."""
        m = complex(self.mantissa)
        return complex(math.ldexp(m.real, self.exp2), math.ldexp(m.imag, self.exp2))

    def log2abs(self) -> float:
        if self.mantissa == 0:
            return -math.inf
        return math.log2(abs(self.mantissa)) + self.exp2

    @property
    def real(self) -> "ScaledComplex":
        return sc_normalize(complex(self.mantissa).real, self.exp2)

    def __abs__(self) -> "ScaledComplex":
        return sc_normalize(abs(self.mantissa), self.exp2)

    def __float__(self) -> float:
        v = self.value()
        return v.real

    def __mul__(self, other):
        return sc_mul(self, _as_scaled(other))

    __rmul__ = __mul__

    def __add__(self, other):
        return sc_add(self, _as_scaled(other))

    __radd__ = __add__

    def __neg__(self):
        return ScaledComplex(-self.mantissa, self.exp2)

    def __sub__(self, other):
        return sc_add(self, -_as_scaled(other))

    def to_json(self) -> dict:
        m = complex(self.mantissa)
        try:
            v = self.value()
            approx = v.real if m.imag == 0 else [v.real, v.imag]
        except OverflowError:
            approx = None
        return {"mant_re": m.real, "mant_im": m.imag, "exp2": int(self.exp2), "approx": approx}


def _as_scaled(x) -> ScaledComplex:
    if isinstance(x, ScaledComplex):
        return x
    return sc_normalize(complex(x), 0)


def sc_normalize(m, e: int) -> ScaledComplex:
    """Bring ``m * 2**e`` to canonical form with ``1 <= |mantissa| < 2``."""
    m = complex(m)
    if not (math.isfinite(m.real) and math.isfinite(m.imag)):
        raise InvalidInputError(f"non-finite mantissa {m!r}")
    e = int(e)
    if m == 0:
        return ScaledComplex(0j, 0)
    a = abs(m)
    if math.isinf(a):
        m = complex(math.ldexp(m.real, -2), math.ldexp(m.imag, -2))
        e += 2
        a = abs(m)
    _, ex = math.frexp(a)
    shift = 1 - ex
    mant = complex(math.ldexp(m.real, shift), math.ldexp(m.imag, shift))
    e -= shift
    # abs() rounding can land exactly on a bracket edge
    am = abs(mant)
    if am >= 2.0:
        mant, e = mant / 2, e + 1
    elif am < 1.0:
        mant, e = mant * 2, e - 1
    return ScaledComplex(mant, e)


def sc_mul(a: ScaledComplex, b: ScaledComplex) -> ScaledComplex:
    # exponents are Python ints, so there is no exponent overflow to saturate
    return sc_normalize(a.mantissa * b.mantissa, a.exp2 + b.exp2)


def sc_add(a: ScaledComplex, b: ScaledComplex) -> ScaledComplex:
    if b.mantissa == 0:
        return sc_normalize(a.mantissa, a.exp2)
    if a.mantissa == 0:
        return sc_normalize(b.mantissa, b.exp2)
    if a.exp2 < b.exp2:
        a, b = b, a
    gap = a.exp2 - b.exp2
    if gap > _ADD_GAP:
        return sc_normalize(a.mantissa, a.exp2)
    m = a.mantissa + complex(math.ldexp(b.mantissa.real, -gap), math.ldexp(b.mantissa.imag, -gap))
    return sc_normalize(m, a.exp2)


def sc_pow2(q) -> ScaledComplex:
    """``2**q`` for a rational exponent ``q`` (e.g. ``Fraction(n*n, 2)``)."""
    q = Fraction(q)
    k = math.floor(q)
    return sc_normalize(2.0 ** float(q - k), k)


def sc_sum(values) -> ScaledComplex:
    out = ScaledComplex(0j, 0)
    for v in values:
        out = sc_add(out, _as_scaled(v))
    return out


# ---------------------------------------------------------------------------
# grids


@dataclass(frozen=True)
class Rectangle:
    x0: float
    x1: float
    y0: float
    y1: float

    def to_json(self):
        return {"kind": "rectangle", "x0": self.x0, "x1": self.x1, "y0": self.y0, "y1": self.y1}


@dataclass(frozen=True)
class Annulus:
    """The dyadic annulus ``2**-n <= |z| <= 2**(1-n)``, sampled in ``w = 2**n z``."""

    n: int

    @property
    def inner(self) -> float:
        return math.ldexp(1.0, -self.n)

    @property
    def outer(self) -> float:
        return math.ldexp(1.0, 1 - self.n)

    @property
    def r_n(self) -> float:
        return 1.25 * self.inner

    @property
    def a_n(self) -> float:
        return 1.5 * self.inner

    @property
    def R_n(self) -> float:
        return 1.75 * self.inner

    def to_json(self):
        return {"kind": "annulus", "n": self.n}


# the same descriptor doubles as the annulus data record
AnnulusSpec = Annulus


Region = Union[Rectangle, Annulus]


@dataclass(frozen=True)
class GridPatch:
    """Uniform square grid.

    Grid coordinates ``w = origin + (i + 1j*j) * h`` are in patch units; the
    physical point is ``z = 2**-scale_exp2 * w``.  Arrays sampled on the patch
    have shape ``(ny, nx)`` with x along axis 1.
    """

    origin: complex
    h: float
    nx: int
    ny: int
    region: Region
    scale_exp2: int = 0

    @property
    def xs(self) -> np.ndarray:
        return self.origin.real + self.h * np.arange(self.nx)

    @property
    def ys(self) -> np.ndarray:
        return self.origin.imag + self.h * np.arange(self.ny)

    @property
    def w(self) -> np.ndarray:
        return self.xs[None, :] + 1j * self.ys[:, None]

    @property
    def z(self) -> np.ndarray:
        return np.ldexp(self.w.real, -self.scale_exp2) + 1j * np.ldexp(self.w.imag, -self.scale_exp2)

    @property
    def phys_x(self) -> np.ndarray:
        """Physical x coordinate, shape (nx,)."""
        return np.ldexp(self.xs, -self.scale_exp2)

    @property
    def shape(self):
        return (self.ny, self.nx)

    def annulus_mask(self, inner=1.0, outer=2.0) -> np.ndarray:
        r = np.abs(self.w)
        return (r >= inner) & (r <= outer)

    def to_json(self) -> dict:
        return {
            "origin": [self.origin.real, self.origin.imag],
            "h": self.h,
            "nx": self.nx,
            "ny": self.ny,
            "scale_exp2": self.scale_exp2,
            "region": self.region.to_json(),
        }

    @classmethod
    def from_json(cls, d: dict) -> "GridPatch":
        r = d["region"]
        region = Annulus(r["n"]) if r["kind"] == "annulus" else Rectangle(r["x0"], r["x1"], r["y0"], r["y1"])
        return cls(complex(*d["origin"]), d["h"], d["nx"], d["ny"], region, d.get("scale_exp2", 0))


# cells kept between the annulus |w| = 2 and the patch edge
ANNULUS_MARGIN_CELLS = 4


def build_patch(region: Region, resolution: int) -> GridPatch:
    """Uniform grid over ``region``.

    A rectangle gets ``resolution`` points along x and the same spacing along
    y.  An annulus gets a ``resolution``-square grid in ``w = 2**n z`` covering
    ``|w| <= 2`` plus a margin of a few cells, so derivative stencils reach
    every point of the closed annulus.
    """
    if resolution < 8:
        raise ParameterError("resolution must be >= 8")
    if isinstance(region, Rectangle):
        if not (region.x1 > region.x0 and region.y1 > region.y0):
            raise ParameterError("empty rectangle")
        corners = [complex(x, y) for x in (region.x0, region.x1) for y in (region.y0, region.y1)]
        if max(abs(c) for c in corners) > 1.0:
            raise DomainError(f"rectangle {region} is not inside the closed unit disc")
        h = (region.x1 - region.x0) / (resolution - 1)
        ny = int(round((region.y1 - region.y0) / h)) + 1
        return GridPatch(complex(region.x0, region.y0), h, resolution, ny, region, 0)
    if isinstance(region, Annulus):
        n = int(region.n)
        half = 2.0 / (1.0 - 2 * ANNULUS_MARGIN_CELLS / (resolution - 1))
        if n < 1 or half * math.sqrt(2.0) * 2.0 ** -n > 1.0:
            raise DomainError(f"annulus n={n}: sampled square leaves the unit disc (need n >= 2)")
        h = 2 * half / (resolution - 1)
        return GridPatch(complex(-half, -half), h, resolution, resolution, region, n)
    raise ParameterError(f"unknown region {region!r}")


# ---------------------------------------------------------------------------
# sampled fields


@dataclass(frozen=True)
class SampledField:
    """A C^k-valued map sampled on a patch: ``values * 2**exp2``.

    ``values`` has shape ``(ny, nx, components)``.  ``mask`` (optional)
    marks grid points whose values are meaningful, e.g. the interior where a
    derivative stencil fits.
    """

    patch: GridPatch
    values: np.ndarray
    exp2: int = 0
    mask: Optional[np.ndarray] = field(default=None, compare=False)

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.ndim == 2:
            v = v[:, :, None]
        if v.shape[:2] != self.patch.shape or v.ndim != 3 or v.shape[2] < 1:
            raise InvalidInputError(f"values shape {v.shape} does not match patch {self.patch.shape}")
        object.__setattr__(self, "values", v.astype(complex, copy=False))
        object.__setattr__(self, "exp2", int(self.exp2))

    @classmethod
    def from_function(cls, patch: GridPatch, fn: Callable, exp2: int = 0) -> "SampledField":
        """Sample ``fn(z)`` (physical coordinates) on the patch."""
        vals = np.asarray(fn(patch.z))
        if vals.ndim == 2:
            vals = vals[:, :, None]
        return cls(patch, vals, exp2)

    @property
    def components(self) -> int:
        return self.values.shape[2]

    def valid(self) -> np.ndarray:
        return np.ones(self.patch.shape, bool) if self.mask is None else self.mask

    def with_values(self, values, exp2=None, mask=None) -> "SampledField":
        return SampledField(self.patch, values, self.exp2 if exp2 is None else exp2,
                            self.mask if mask is None else mask)

    def scaled_pow2(self, k: int) -> "SampledField":
        """The field times ``2**k``, mantissas untouched."""
        return self.with_values(self.values, self.exp2 + int(k))

    def align(self, other: "SampledField"):
        """Mantissa arrays of both fields on the common (larger) exponent."""
        if other.patch != self.patch:
            raise InvalidInputError("fields live on different patches")
        e = max(self.exp2, other.exp2)
        return ldexp_c(self.values, self.exp2 - e), ldexp_c(other.values, other.exp2 - e), e

    def _combine_mask(self, other):
        if self.mask is None:
            return other.mask
        if other.mask is None:
            return self.mask
        return self.mask & other.mask

    def __add__(self, other):
        a, b, e = self.align(other)
        return SampledField(self.patch, a + b, e, self._combine_mask(other))

    def __sub__(self, other):
        a, b, e = self.align(other)
        return SampledField(self.patch, a - b, e, self._combine_mask(other))

    def __neg__(self):
        return self.with_values(-self.values)

    def __mul__(self, other):
        if isinstance(other, SampledField):
            if other.patch != self.patch:
                raise InvalidInputError("fields live on different patches")
            return SampledField(self.patch, self.values * other.values, self.exp2 + other.exp2,
                                self._combine_mask(other))
        if isinstance(other, ScaledComplex):
            return self.with_values(self.values * other.mantissa, self.exp2 + other.exp2)
        other = np.asarray(other)
        if other.ndim == 2:
            other = other[:, :, None]
        return self.with_values(self.values * other)

    __rmul__ = __mul__

    def conj(self) -> "SampledField":
        return self.with_values(np.conj(self.values))

    def norm(self) -> np.ndarray:
        """Pointwise Euclidean norm of the mantissas, shape (ny, nx)."""
        return np.sqrt(np.sum(np.abs(self.values) ** 2, axis=2))

    def abs_max(self, where=None) -> ScaledComplex:
        nrm = self.norm()
        if where is not None:
            nrm = np.where(where, nrm, 0.0)
        return sc_normalize(float(nrm.max()) if nrm.size else 0.0, self.exp2)

    def to_complex(self) -> np.ndarray:
        """Plain values; entries beyond double range become inf or 0."""
        with np.errstate(over="ignore", under="ignore"):
            return ldexp_c(self.values, self.exp2)

    def pointwise_scaled(self):
        """Per-sample canonical (mantissa, exp2) arrays, ``1 <= |mantissa| < 2``."""
        a = np.abs(self.values)
        _, ex = np.frexp(a)
        shift = 1 - ex
        mant = ldexp_c(self.values, shift)
        exps = ex - 1 + self.exp2
        zero = a == 0
        mant[zero] = 0
        exps = np.where(zero, 0, exps)
        return mant, exps

    # -- dump format -------------------------------------------------------

    def dump(self, path) -> None:
        """Write ``<path>.csv`` (``x,y,comp,mant_re,mant_im,exp2``) and ``<path>.json``."""
        path = Path(path)
        mant, exps = self.pointwise_scaled()
        z = self.patch.z
        with open(path.with_suffix(".csv"), "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["x", "y", "comp", "mant_re", "mant_im", "exp2"])
            for j in range(self.patch.ny):
                for i in range(self.patch.nx):
                    for c in range(self.components):
                        m = mant[j, i, c]
                        wr.writerow([repr(float(z[j, i].real)), repr(float(z[j, i].imag)), c,
                                     f"{m.real:.17g}", f"{m.imag:.17g}", int(exps[j, i, c])])
        meta = self.patch.to_json()
        meta.update(components=self.components, global_exp2=self.exp2)
        with open(path.with_suffix(".json"), "w") as fh:
            json.dump(meta, fh, indent=2)

    @classmethod
    def load(cls, path) -> "SampledField":
        path = Path(path)
        with open(path.with_suffix(".json")) as fh:
            meta = json.load(fh)
        patch = GridPatch.from_json(meta)
        comps = meta["components"]
        gexp = meta["global_exp2"]
        vals = np.zeros((patch.ny, patch.nx, comps), complex)
        with open(path.with_suffix(".csv")) as fh:
            rows = csv.reader(fh)
            next(rows)
            k = 0
            for row in rows:
                c = int(row[2])
                j, i = divmod(k // comps, patch.nx)
                m = complex(float(row[3]), float(row[4]))
                vals[j, i, c] = ldexp_c(np.array([m]), int(row[5]) - gexp)[0]
                k += 1
        return cls(patch, vals, gexp)


# ---------------------------------------------------------------------------
# quadrature


def crop(f: SampledField, k: int) -> SampledField:
    """Drop ``k`` grid points from every edge of the patch."""
    p = f.patch
    if k == 0:
        return f
    if min(p.nx, p.ny) <= 2 * k:
        raise ParameterError("crop removes the whole patch")
    sub = GridPatch(p.origin + k * p.h * (1 + 1j), p.h, p.nx - 2 * k, p.ny - 2 * k, p.region, p.scale_exp2)
    mask = None if f.mask is None else f.mask[k:-k, k:-k]
    return SampledField(sub, f.values[k:-k, k:-k], f.exp2, mask)


def trapezoid2d(arr: np.ndarray, h: float) -> float:
    """Tensor trapezoid rule over the last two grid axes (ny, nx)."""
    wy = np.full(arr.shape[0], h)
    wx = np.full(arr.shape[1], h)
    wy[[0, -1]] *= 0.5
    wx[[0, -1]] *= 0.5
    return float(wy @ arr @ wx)


def check_support(f: SampledField, threshold: float = SUPPORT_THRESHOLD) -> None:
    nrm = f.norm()
    peak = nrm.max()
    if peak == 0:
        return
    edge = max(nrm[0].max(), nrm[-1].max(), nrm[:, 0].max(), nrm[:, -1].max())
    if edge > threshold * peak:
        raise SupportError(f"field reaches the patch boundary (edge/peak = {edge / peak:.3g})")


def weight_array(patch: GridPatch, weight) -> Optional[np.ndarray]:
    """``exp(tau * phi(x))`` on the patch as a (1, nx) row, or None for unit weight."""
    if weight is None:
        return None
    return np.exp(weight.tau * weight.phi(patch.phys_x))[None, :]


def integral_mantissa(f: SampledField, weight=None, where=None) -> float:
    """Weighted integral of |f|^2 in units of ``2**(2*f.exp2 - 2*scale_exp2)``."""
    dens = np.sum(np.abs(f.values) ** 2, axis=2)
    if where is not None:
        dens = np.where(where, dens, 0.0)
    wa = weight_array(f.patch, weight)
    if wa is not None:
        dens = dens * wa
    return trapezoid2d(dens, f.patch.h)


def quad_weighted(f: SampledField, weight=None, *, check=True) -> ScaledComplex:
    """Trapezoid approximation of the integral of ``|f|^2 e^{tau phi}``.

    ``weight`` is a :class:`~dbarlab.carleman.CarlemanWeight` (anything with
    ``tau`` and ``phi``) or None for the unit weight.  The field must vanish
    (relative to its peak) on the patch boundary.
    """
    if check:
        check_support(f)
    val = integral_mantissa(f, weight)
    return sc_normalize(val, 2 * f.exp2 - 2 * f.patch.scale_exp2)
