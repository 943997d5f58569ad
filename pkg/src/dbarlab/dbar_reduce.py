"""Similarity reduction of a solution of |dbar u| <= C|u| to a holomorphic map.

Given u, a bounded rank-one A with ``dbar u + A u = 0`` is read off the
samples; ``dbar M + A M = 0`` is solved by the fixed point
``M = I - T(A M)`` with the solid Cauchy transform T; then ``v = M^-1 u``
is holomorphic and shares the zeros of u.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.signal import fftconvolve

from .errors import (ConditioningError, IN1ViolationError, IterationError, NoContractionError,
                     ParameterError)
from .scaled_field import GridPatch, Rectangle, SampledField, build_patch, crop
from .wirtinger import MARGIN, holo_residual, wirtinger_derivatives

FLOOR_REL = 1e-10
MAX_RATIO = 1e6
DET_REL = 1e-6


@dataclass(frozen=True)
class MatrixField:
    """An n x n complex matrix per grid point, in physical units."""

    patch: GridPatch
    entries: np.ndarray

    def __post_init__(self):
        e = np.asarray(self.entries, complex)
        if e.shape[:2] != self.patch.shape or e.ndim != 4 or e.shape[2] != e.shape[3]:
            raise ParameterError(f"entries shape {e.shape} does not fit patch {self.patch.shape}")
        object.__setattr__(self, "entries", e)

    @property
    def n(self) -> int:
        return self.entries.shape[2]

    def op_norm(self) -> np.ndarray:
        return np.linalg.norm(self.entries, ord=2, axis=(-2, -1))

    @property
    def sup_norm(self) -> float:
        return float(self.op_norm().max())

    def apply(self, f: SampledField) -> SampledField:
        return f.with_values(np.einsum("...ij,...j->...i", self.entries, f.values), mask=None)

    def dump(self, path) -> None:
        """Write ``<path>.csv`` (``x,y,row,col,re,im``) and ``<path>.json``."""
        path = Path(path)
        z = self.patch.z
        with open(path.with_suffix(".csv"), "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["x", "y", "row", "col", "re", "im"])
            for j in range(self.patch.ny):
                for i in range(self.patch.nx):
                    for r in range(self.n):
                        for c in range(self.n):
                            a = self.entries[j, i, r, c]
                            wr.writerow([repr(float(z[j, i].real)), repr(float(z[j, i].imag)), r, c,
                                         f"{a.real:.17g}", f"{a.imag:.17g}"])
        meta = self.patch.to_json()
        meta.update(n=self.n, sup_norm=self.sup_norm)
        with open(path.with_suffix(".json"), "w") as fh:
            json.dump(meta, fh, indent=2)


# ---------------------------------------------------------------------------
# solid Cauchy transform


def _corner(x, y):
    """Antiderivative F with d2F/dxdy = 1/(x + iy)."""
    r2 = x * x + y * y
    with np.errstate(divide="ignore", invalid="ignore"):
        lg = np.where(r2 > 0, np.log(np.where(r2 > 0, r2, 1.0)), 0.0)
        ax = np.where(x != 0, x * np.arctan(y / np.where(x != 0, x, 1.0)), 0.0)
        ay = np.where(y != 0, y * np.arctan(x / np.where(y != 0, y, 1.0)), 0.0)
    re = 0.5 * y * lg - y + ax
    im = -(0.5 * x * lg - x + ay)
    return re + 1j * im


def cell_kernel(kx: np.ndarray, ky: np.ndarray) -> np.ndarray:
    """``(1/pi) * integral over the unit cell centred at 0 of 1/(k - s) ds``.

    ``k = kx + i ky`` is an offset in cell units; scale by h for spacing h.
    """
    x0, x1 = kx - 0.5, kx + 0.5
    y0, y1 = ky - 0.5, ky + 0.5
    return (_corner(x1, y1) - _corner(x0, y1) - _corner(x1, y0) + _corner(x0, y0)) / math.pi


def _kernel(nx, ny):
    kx = np.arange(-(nx - 1), nx)[None, :].astype(float)
    ky = np.arange(-(ny - 1), ny)[:, None].astype(float)
    return cell_kernel(kx, ky)


def transform_norm(patch: GridPatch) -> float:
    """Bound on the sup-norm of T on the patch: ``2 sqrt(area / pi)``."""
    h = math.ldexp(patch.h, -patch.scale_exp2)
    return 2.0 * math.sqrt(patch.nx * patch.ny * h * h / math.pi)


def _apply_T(arr: np.ndarray, patch: GridPatch, kern: np.ndarray) -> np.ndarray:
    """T on plain arrays of shape (ny, nx, ...) in physical units."""
    ny, nx = patch.shape
    h = math.ldexp(patch.h, -patch.scale_exp2)
    flat = arr.reshape(ny, nx, -1)
    out = np.empty_like(flat, dtype=complex)
    for c in range(flat.shape[2]):
        full = fftconvolve(flat[:, :, c], kern, mode="full")
        out[:, :, c] = full[ny - 1:2 * ny - 1, nx - 1:2 * nx - 1]
    return (h * out).reshape(arr.shape)


def cauchy_transform(f: SampledField) -> SampledField:
    """``T f(z) = (1/pi) * integral of f(s) / (z - s)`` over the patch cells.

    Each sample stands for its square cell; the kernel is integrated exactly
    over every cell, so the singular cell needs no special treatment.
    """
    kern = _kernel(f.patch.nx, f.patch.ny)
    return SampledField(f.patch, _apply_T(f.values, f.patch, kern), f.exp2)


# ---------------------------------------------------------------------------
# the coefficient A


@dataclass(frozen=True)
class DerivedA:
    A: MatrixField
    measured_C: float
    floor: float
    above_floor: np.ndarray


def derive_A_from_u(u: SampledField, floor: float = None, max_ratio: float = MAX_RATIO) -> DerivedA:
    """Rank-one ``A = -dbar u <., u> / |u|**2`` where ``|u| >= floor``; 0 elsewhere.

    ``floor`` is relative to ``sup |u|`` (default 1e-10).  ``measured_C``
    is ``sup |dbar u| / |u|`` over the points kept; it bounds ``sup ||A||``.
    """
    floor = FLOOR_REL if floor is None else floor
    pair = wirtinger_derivatives(u)
    nu = u.norm()
    keep = pair.valid & (nu >= floor * nu.max()) & (nu > 0)
    safe = np.where(keep, nu, 1.0) ** 2
    db = pair.dzbar.values * math.ldexp(1.0, u.patch.scale_exp2)  # d/dz in units of 2**u.exp2
    A = -db[..., :, None] * np.conj(u.values)[..., None, :] / safe[..., None, None]
    A[~keep] = 0
    ratio = np.where(keep, np.linalg.norm(db, axis=-1) / np.sqrt(safe), 0.0)
    C = float(ratio.max()) if keep.any() else 0.0
    if not math.isfinite(C) or C > max_ratio:
        raise IN1ViolationError(f"|dbar u| / |u| reaches {C:.3g} above the floor")
    return DerivedA(MatrixField(u.patch, A), C, floor, keep)


# ---------------------------------------------------------------------------
# fixed point


@dataclass(frozen=True)
class SolveResult:
    M: MatrixField
    kappa: float
    iterations: int
    history: list
    min_abs_det: float
    pde_residual: float = float("nan")
    extra: dict = field(default_factory=dict)


def solve_M(A: MatrixField, max_iter: int = 200, tol: float = 1e-12) -> SolveResult:
    """Iterate ``M <- I - T(A M)`` from ``M = I``.

    Stops when the sup-norm increment is at most ``tol * sup ||M||``.
    ``history`` lists the increments; they shrink at least by the
    contraction factor ``kappa = sup ||A|| * ||T||``.
    """
    patch = A.patch
    kappa = A.sup_norm * transform_norm(patch)
    if kappa >= 1:
        raise NoContractionError(f"kappa = {kappa:.3g} >= 1; shrink the patch")
    n = A.n
    eye = np.broadcast_to(np.eye(n, dtype=complex), patch.shape + (n, n))
    kern = _kernel(patch.nx, patch.ny)
    M = eye.copy()
    history = []
    for it in range(1, max_iter + 1):
        new = eye - _apply_T(A.entries @ M, patch, kern)
        inc = float(np.linalg.norm(new - M, ord=2, axis=(-2, -1)).max())
        M = new
        history.append(inc)
        if inc <= tol * float(np.linalg.norm(M, ord=2, axis=(-2, -1)).max()):
            break
    else:
        raise IterationError(f"no convergence in {max_iter} iterations (last increment {history[-1]:.3g})")
    det = np.abs(np.linalg.det(M))
    # finite-difference check of dbar M + A M on the interior
    Mf = SampledField(patch, M.reshape(patch.shape + (n * n,)), 0)
    pair = wirtinger_derivatives(Mf)
    dbM = pair.dzbar.values.reshape(patch.shape + (n, n)) * math.ldexp(1.0, patch.scale_exp2)
    res = np.linalg.norm(dbM + A.entries @ M, ord=2, axis=(-2, -1))
    # A is cut to 0 on the derivative margin; stencils reaching that jump are skipped
    k = 2 * MARGIN + 1
    valid = pair.valid.copy()
    valid[:k] = valid[-k:] = False
    valid[:, :k] = valid[:, -k:] = False
    pde = float(res[valid].max()) if valid.any() else float("nan")
    return SolveResult(MatrixField(patch, M), kappa, it, history, float(det.min()), pde)


# ---------------------------------------------------------------------------
# reduction


@dataclass(frozen=True)
class ReduceReport:
    kappa: float
    measured_C: float
    iterations: int
    history: list
    min_abs_det: float
    pde_residual: float
    holo_residual_u: float
    holo_residual_v: float
    zero_sets_match: bool
    zeros_u: int

    def to_json(self) -> dict:
        return dict(self.__dict__)


def reduce(u: SampledField, floor: float = None, max_iter: int = 200, tol: float = 1e-12):
    """``v = M^-1 u`` with ``dbar M + A M = 0``; returns ``(v, report)``.

    Holomorphy of v is measured away from the strip where A is unknown
    (the derivative margin of u) so that strip cannot pollute the stencils.
    """
    d = derive_A_from_u(u, floor)
    sol = solve_M(d.A, max_iter, tol)
    M = sol.M.entries
    n = M.shape[-1]
    det = np.abs(np.linalg.det(M))
    mnorm = np.linalg.norm(M, ord=2, axis=(-2, -1))
    if np.any(det < DET_REL * mnorm ** n):
        raise ConditioningError("M is nearly singular on the patch")
    vals = np.linalg.solve(M, u.values[..., None])[..., 0]
    v = SampledField(u.patch, vals, u.exp2)
    inner = 2 * MARGIN
    hr_u = holo_residual(crop(u, inner))
    hr_v = holo_residual(crop(v, inner))
    nu, nv = u.norm(), v.norm()
    zu = nu < d.floor * nu.max()
    # some floor for v reproduces the zero set of u iff the two groups separate
    match = bool(not zu.any() or zu.all() or nv[zu].max() < nv[~zu].min())
    report = ReduceReport(sol.kappa, d.measured_C, sol.iterations, sol.history, sol.min_abs_det,
                          sol.pde_residual, hr_u, hr_v, match, int(zu.sum()))
    return v, report


# ---------------------------------------------------------------------------
# manufactured input

MANUFACTURED_B = np.array([[0.3, 0.2j], [-0.1, 0.25]])
MANUFACTURED_PATCH_HALF = 0.3


def manufactured_u(resolution: int = 256, B: np.ndarray = None, half: float = MANUFACTURED_PATCH_HALF):
    """``u = exp(-conj(z) B) v0`` with holomorphic ``v0``, so ``dbar u = -B u``.

    Returns ``(u, v0)`` on the square ``[-half, half]**2``.
    """
    B = MANUFACTURED_B if B is None else np.asarray(B, complex)
    patch = build_patch(Rectangle(-half, half, -half, half), resolution)
    z = patch.z
    lam, V = np.linalg.eig(B)
    E = np.exp(-np.conj(z)[..., None] * lam)  # (ny, nx, n)
    Mz = np.einsum("ij,...j,jk->...ik", V, E, np.linalg.inv(V))
    v0 = np.stack([1 + z + z * z, z - 0.1j], axis=-1)
    u = np.einsum("...ij,...j->...i", Mz, v0)
    return SampledField(patch, u), SampledField(patch, v0)
