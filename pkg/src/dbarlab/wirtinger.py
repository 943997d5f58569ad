"""Discrete Wirtinger derivatives on sampled fields.

``d = (d/dx - i d/dy) / 2`` and ``dbar = (d/dx + i d/dy) / 2`` are built from
fourth-order centered differences.  A sixth-order stencil on the same grid
gives a pointwise truncation-error estimate ``|D4 - D6|``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import StencilError
from .scaled_field import SampledField

MARGIN = 2
_ERR_MARGIN = 3
RATIO_FLOOR = 1e-10

_C4 = {1: 8.0, 2: -1.0}
_C6 = {1: 45.0, 2: -9.0, 3: 1.0}


def _diff(a: np.ndarray, h: float, axis: int, coeffs: dict, denom: float, margin: int) -> np.ndarray:
    out = np.zeros_like(a)
    n = a.shape[axis]
    core = [slice(None)] * a.ndim
    core[axis] = slice(margin, n - margin)
    acc = np.zeros_like(out[tuple(core)])
    for k, c in coeffs.items():
        plus = [slice(None)] * a.ndim
        minus = [slice(None)] * a.ndim
        plus[axis] = slice(margin + k, n - margin + k)
        minus[axis] = slice(margin - k, n - margin - k)
        acc += c * (a[tuple(plus)] - a[tuple(minus)])
    out[tuple(core)] = acc / (denom * h)
    return out


def _interior(shape, margin):
    m = np.zeros(shape, bool)
    m[margin:shape[0] - margin, margin:shape[1] - margin] = True
    return m


def partials(f: SampledField, order: int = 4):
    """Mantissa arrays of d/dx and d/dy in patch units (order 4 or 6)."""
    if order == 4:
        coeffs, denom, margin = _C4, 12.0, MARGIN
    elif order == 6:
        coeffs, denom, margin = _C6, 60.0, _ERR_MARGIN
    else:
        raise ValueError("order must be 4 or 6")
    v, h = f.values, f.patch.h
    return _diff(v, h, 1, coeffs, denom, margin), _diff(v, h, 0, coeffs, denom, margin)


@dataclass(frozen=True)
class DerivativePair:
    """d f and dbar f on the source patch.

    Both fields carry ``mask`` = points at least ``margin`` cells from the
    edge.  ``err_dz``/``err_dzbar`` are pointwise truncation estimates in the
    same mantissa units (NaN where the wider estimator stencil does not fit).
    """

    dz: SampledField
    dzbar: SampledField
    order: int
    margin: int
    err_dz: np.ndarray
    err_dzbar: np.ndarray

    @property
    def valid(self) -> np.ndarray:
        return self.dz.mask

    def error_sup(self) -> float:
        """Largest pointwise truncation estimate for either derivative (mantissa units)."""
        e = np.fmax(self.err_dz, self.err_dzbar)
        return float(np.nanmax(e)) if np.isfinite(e).any() else 0.0


def wirtinger_derivatives(f: SampledField) -> DerivativePair:
    ny, nx = f.patch.shape
    if min(nx, ny) < 2 * MARGIN + 1:
        raise StencilError(f"patch {nx}x{ny} too small for a {2 * MARGIN + 1}-point stencil")
    peak = np.abs(f.values).max()
    if peak > 0:
        jump = max(np.abs(np.diff(f.values, axis=0)).max(), np.abs(np.diff(f.values, axis=1)).max())
        if jump / peak >= 0.5:
            warnings.warn("field changes by more than half its peak between neighbouring samples; "
                          "derivatives are not resolved", RuntimeWarning, stacklevel=2)
    fx, fy = partials(f, 4)
    dz = 0.5 * (fx - 1j * fy)
    dzbar = 0.5 * (fx + 1j * fy)
    mask = _interior((ny, nx), MARGIN)
    if min(nx, ny) >= 2 * _ERR_MARGIN + 1:
        gx, gy = partials(f, 6)
        ex, ey = fx - gx, fy - gy
        err_dz = np.sqrt(np.sum(np.abs(0.5 * (ex - 1j * ey)) ** 2, axis=2))
        err_dzbar = np.sqrt(np.sum(np.abs(0.5 * (ex + 1j * ey)) ** 2, axis=2))
        inner = _interior((ny, nx), _ERR_MARGIN)
        err_dz[~inner] = np.nan
        err_dzbar[~inner] = np.nan
    else:
        err_dz = np.full((ny, nx), np.nan)
        err_dzbar = np.full((ny, nx), np.nan)
    # d/dz = 2**scale d/dw on rescaled patches
    e = f.exp2 + f.patch.scale_exp2
    return DerivativePair(
        SampledField(f.patch, dz, e, mask),
        SampledField(f.patch, dzbar, e, mask),
        4, MARGIN, err_dz, err_dzbar,
    )


def holo_residual(f: SampledField, pair: DerivativePair = None) -> float:
    """``sup|dbar f| / max(sup|d f|, sup|dbar f|)`` over the valid interior.

    0 for (numerically) holomorphic fields, 1 for anti-holomorphic ones.  A
    field whose derivatives are all below ``1e-10 * sup|f| / width`` (a
    constant, say) has residual 0 by convention.
    """
    pair = pair or wirtinger_derivatives(f)
    valid = pair.valid
    if not valid.any():
        raise StencilError("no interior points")
    sup_dbar = float(pair.dzbar.norm()[valid].max())
    sup_d = float(pair.dz.norm()[valid].max())
    width = f.patch.h * max(f.patch.nx - 1, 1)
    floor = RATIO_FLOOR * float(f.norm().max()) / width
    denom = max(sup_d, sup_dbar)
    if denom <= floor:
        return 0.0
    return sup_dbar / denom


def ratio_field(f: SampledField, pair: DerivativePair = None) -> SampledField:
    """Pointwise ``|dbar f| / |d f|`` as a real one-component field.

    The mask keeps interior points where ``|d f| >= 1e-10 sup|d f|``; the
    excluded interior points are returned by :func:`flagged_points`.
    """
    pair = pair or wirtinger_derivatives(f)
    nd = pair.dz.norm()
    nb = pair.dzbar.norm()
    valid = pair.valid
    sup_d = nd[valid].max() if valid.any() else 0.0
    keep = valid & (nd >= RATIO_FLOOR * sup_d) & (nd > 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.where(keep, nb / np.where(nd > 0, nd, 1.0), 0.0)
    return SampledField(f.patch, r.astype(complex), 0, keep)


def flagged_points(f: SampledField, pair: DerivativePair = None) -> np.ndarray:
    pair = pair or wirtinger_derivatives(f)
    return pair.valid & ~ratio_field(f, pair).mask
