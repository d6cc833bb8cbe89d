"""Novikov-Veselov symbols, the linear propagator and the nonlinearities.

Conventions
-----------
The dispersion symbol is ``P(xi, mu) = xi**3/4 - 3 xi mu**2 / 4`` and the
linear flow multiplies Fourier coefficients by ``exp(i t P)``.  The Wirtinger
derivatives are

    d    = (d_x - i d_y) / 2   with symbol (i xi + mu) / 2,
    dbar = (d_x + i d_y) / 2   with symbol (i xi - mu) / 2,

and the unimodular ratio ``dbar^{-1} d`` has symbol ``(i xi + mu)/(i xi - mu)``
(sent to 0 at the origin).  Since the symbol of ``d^3 + dbar^3`` is
``-i P``, the NV equation ``u_t + (d^3 + dbar^3) u + NL(u) = 0`` reads

    d/dt u_hat = i P u_hat - NL_hat(u).

Products are formed in physical space.  Quadratic outputs are truncated to
the 2/3 band and cubic outputs to the 1/2 band, so on inputs supported in
those bands the pseudospectral products agree exactly with the discrete
convolutions.

The coefficient-level helpers (``*_coeffs``) act on arrays whose last two
axes are spatial; any leading axes (e.g. time) are carried along, which is
how space-time fields are handled slice by slice.
"""

from __future__ import annotations

from typing import Literal

import numpy as np
import scipy.fft as sfft

from .spectral import (GridMismatchError, GridSpec, SpectralField, fft_workers,
                       hermitian_part, reflect_index)

__all__ = [
    "dispersion_symbol",
    "dispersion_gradient",
    "hessian_det",
    "d_symbol",
    "dbar_symbol",
    "ratio_symbol",
    "linear_propagate",
    "reflect",
    "wirtinger",
    "beurling_ratio",
    "dealias_mask",
    "dealias",
    "nl_nv",
    "nl_mnv",
    "nl1_bilinear",
    "mnl1_trilinear",
    "nl_nv_coeffs",
    "nl_mnv_coeffs",
    "nl1_bilinear_coeffs",
    "mnl1_trilinear_coeffs",
    "max_retained_symbol",
]

QUADRATIC_BAND = 2.0 / 3.0
CUBIC_BAND = 0.5


# ---------------------------------------------------------------------------
# symbols
# ---------------------------------------------------------------------------

def dispersion_symbol(xi, mu):
    """``P(xi, mu) = xi^3/4 - 3 xi mu^2/4``."""
    xi = np.asarray(xi, dtype=float)
    mu = np.asarray(mu, dtype=float)
    return 0.25 * xi ** 3 - 0.75 * xi * mu ** 2


def dispersion_gradient(xi, mu):
    """Gradient ``(dP/dxi, dP/dmu)``."""
    xi = np.asarray(xi, dtype=float)
    mu = np.asarray(mu, dtype=float)
    return 0.75 * (xi ** 2 - mu ** 2), -1.5 * xi * mu


def hessian_det(xi, mu):
    """Determinant of the Hessian of ``P``.

    The second derivatives are ``P_xx = 3 xi / 2``, ``P_mm = -3 xi / 2`` and
    ``P_xm = -3 mu / 2``, so the determinant is ``-9 (xi^2 + mu^2) / 4``.  It
    vanishes only at the origin.  (A frequently quoted closed form,
    ``-3 (xi^2 + mu^2) / 4``, is off by a factor of 3; the factor only
    rescales weights such as ``|det|^{1/8}`` by a constant.)
    """
    xi = np.asarray(xi, dtype=float)
    mu = np.asarray(mu, dtype=float)
    return -2.25 * (xi ** 2 + mu ** 2)


def d_symbol(xi, mu):
    return 0.5 * (1j * xi + mu)


def dbar_symbol(xi, mu):
    return 0.5 * (1j * xi - mu)


def ratio_symbol(xi, mu, which: str = "dbar_inv_d"):
    """Unimodular symbol of ``dbar^{-1} d`` or ``d^{-1} dbar`` (0 at the origin)."""
    xi = np.asarray(xi, dtype=float)
    mu = np.asarray(mu, dtype=float)
    num = 1j * xi + mu
    den = 1j * xi - mu
    if which == "d_inv_dbar":
        num, den = den, num
    elif which != "dbar_inv_d":
        raise ValueError(f"unknown ratio {which!r}")
    zero = (xi == 0) & (mu == 0)
    safe = np.where(zero, 1.0, den)
    return np.where(zero, 0.0, num / safe)


def max_retained_symbol(grid: GridSpec, fraction: float = QUADRATIC_BAND) -> float:
    """Largest ``|P|`` over the dealiased band of ``grid``."""
    xi, mu = grid.wavenumbers()
    p = np.abs(dispersion_symbol(xi, mu)) * grid.band_mask(fraction)
    return float(p.max())


# ---------------------------------------------------------------------------
# linear operators on fields
# ---------------------------------------------------------------------------

def linear_propagate(F: SpectralField, t: float) -> SpectralField:
    """Linear NV flow: multiply by ``exp(i t P)``."""
    xi, mu = F.grid.wavenumbers()
    return F.with_coeffs(F.coeffs * np.exp(1j * t * dispersion_symbol(xi, mu)))


def reflect(F: SpectralField) -> SpectralField:
    """The reflection ``u(x, y) -> u(-x, -y)``.

    Since ``P`` is odd, reflecting, evolving forward by ``t`` and reflecting
    back is the NV evolution by ``-t``.
    """
    c = F.coeffs[reflect_index(F.grid.nx), :][:, reflect_index(F.grid.ny)]
    return F.with_coeffs(c)


def wirtinger(F: SpectralField, which: Literal["d", "dbar"] = "d") -> SpectralField:
    """Apply ``d`` or ``dbar``.  The output of a real field is complex."""
    if which not in ("d", "dbar"):
        raise ValueError(f"unknown derivative {which!r}")
    xi, mu = F.grid.wavenumbers()
    sym = d_symbol(xi, mu) if which == "d" else dbar_symbol(xi, mu)
    return F.with_coeffs(F.coeffs * sym, real=False)


def beurling_ratio(F: SpectralField, which: str = "dbar_inv_d") -> SpectralField:
    """Apply the unimodular ratio ``dbar^{-1} d`` (or ``d^{-1} dbar``)."""
    xi, mu = F.grid.wavenumbers()
    return F.with_coeffs(F.coeffs * ratio_symbol(xi, mu, which), real=False)


def dealias_mask(grid: GridSpec, rule: Literal["2/3", "1/2"] = "2/3") -> np.ndarray:
    frac = {"2/3": QUADRATIC_BAND, "1/2": CUBIC_BAND}[rule]
    return grid.band_mask(frac)


def dealias(F: SpectralField, rule: Literal["2/3", "1/2"] = "2/3") -> SpectralField:
    return F.with_coeffs(F.coeffs * dealias_mask(F.grid, rule))


# ---------------------------------------------------------------------------
# coefficient-level kernels
# ---------------------------------------------------------------------------

class _Ops:
    """Cached symbol tables for a grid."""

    _cache: dict = {}

    def __init__(self, grid: GridSpec):
        xi, mu = grid.wavenumbers()
        self.grid = grid
        self.d = d_symbol(xi, mu)
        self.dbar = dbar_symbol(xi, mu)
        self.b = ratio_symbol(xi, mu, "dbar_inv_d")
        self.bbar = ratio_symbol(xi, mu, "d_inv_dbar")
        self.m23 = grid.band_mask(QUADRATIC_BAND)
        self.m12 = grid.band_mask(CUBIC_BAND)
        self.n = grid.nx * grid.ny

    @classmethod
    def get(cls, grid: GridSpec) -> "_Ops":
        ops = cls._cache.get(grid)
        if ops is None:
            ops = cls(grid)
            if len(cls._cache) > 32:
                cls._cache.clear()
            cls._cache[grid] = ops
        return ops

    def phys(self, c: np.ndarray) -> np.ndarray:
        return sfft.ifft2(c, axes=(-2, -1), workers=fft_workers()) * self.n

    def spec(self, v: np.ndarray) -> np.ndarray:
        return sfft.fft2(v, axes=(-2, -1), workers=fft_workers()) / self.n


def nl1_bilinear_coeffs(uc: np.ndarray, vc: np.ndarray, grid: GridSpec, truncate: bool = True) -> np.ndarray:
    """Coefficients of ``NL1(u, v) = 3/4 d(u * dbar^{-1} d v)``."""
    o = _Ops.get(grid)
    prod = o.phys(uc) * o.phys(o.b * vc)
    out = 0.75 * o.d * o.spec(prod)
    return out * o.m23 if truncate else out


def nl_nv_coeffs(uc: np.ndarray, grid: GridSpec, truncate: bool = True) -> np.ndarray:
    """Coefficients of ``NL1(u) + NL2(u)`` for real ``u``.

    ``NL2(u) = 3/4 dbar(u * d^{-1} dbar u)`` is evaluated explicitly rather
    than as the conjugate of ``NL1``; the Hermitian projection at the end only
    removes rounding asymmetry.
    """
    o = _Ops.get(grid)
    u = o.phys(uc)
    p1 = u * o.phys(o.b * uc)
    p2 = u * o.phys(o.bbar * uc)
    out = 0.75 * (o.d * o.spec(p1) + o.dbar * o.spec(p2))
    if truncate:
        out = out * o.m23
    return hermitian_part(out)


def mnl1_trilinear_coeffs(uc: np.ndarray, vc: np.ndarray, wc: np.ndarray, grid: GridSpec,
                          truncate: bool = True) -> np.ndarray:
    """Coefficients of ``mNL1(u, v, w) = 3/4 (d u) * dbar^{-1} d (v * conj(w))``."""
    o = _Ops.get(grid)
    vw = o.spec(o.phys(vc) * np.conj(o.phys(wc)))
    prod = o.phys(o.d * uc) * o.phys(o.b * vw)
    out = 0.75 * o.spec(prod)
    return out * o.m12 if truncate else out


def nl_mnv_coeffs(uc: np.ndarray, grid: GridSpec, real: bool = False, truncate: bool = True) -> np.ndarray:
    """Coefficients of ``mNL1 + mNL2 + mNL3 + mNL4``.

    With ``B = dbar^{-1} d`` and ``Bbar = d^{-1} dbar``::

        mNL1 = 3/4 (d u)    * B(|u|^2)
        mNL2 = 3/4 (dbar u) * Bbar(|u|^2)
        mNL3 = 3/4 u * B(conj(u) * d u)
        mNL4 = 3/4 u * Bbar(conj(u) * dbar u)
    """
    o = _Ops.get(grid)
    u = o.phys(uc)
    ub = np.conj(u)
    du = o.phys(o.d * uc)
    dbu = o.phys(o.dbar * uc)
    mod2 = o.spec(u * ub)
    t1 = du * o.phys(o.b * mod2)
    t2 = dbu * o.phys(o.bbar * mod2)
    t3 = u * o.phys(o.b * o.spec(ub * du))
    t4 = u * o.phys(o.bbar * o.spec(ub * dbu))
    out = 0.75 * o.spec(t1 + t2 + t3 + t4)
    if truncate:
        out = out * o.m12
    if real:
        out = hermitian_part(out)
    return out


# ---------------------------------------------------------------------------
# field-level nonlinearities
# ---------------------------------------------------------------------------

def nl_nv(u: SpectralField) -> SpectralField:
    """NV nonlinearity ``NL1(u) + NL2(u)`` with 2/3-rule truncation.

    Raises
    ------
    ValueError
        If ``u`` is not flagged real.
    """
    if not u.real:
        raise ValueError("nl_nv requires a real-flagged field")
    c = nl_nv_coeffs(u.coeffs, u.grid)
    c[0, 0] = 0.0
    return SpectralField(u.grid, c, True)


def nl_mnv(u: SpectralField, require_real: bool = False) -> SpectralField:
    """mNV nonlinearity with 1/2-rule truncation.

    Complex fields are accepted.  Real input gives real output.
    """
    if require_real and not u.real:
        raise ValueError("nl_mnv called with require_real on a complex field")
    c = nl_mnv_coeffs(u.coeffs, u.grid, real=u.real)
    return SpectralField(u.grid, c, u.real)


def nl1_bilinear(u: SpectralField, v: SpectralField) -> SpectralField:
    """``NL1(u, v) = 3/4 d(u dbar^{-1} d v)``."""
    if u.grid != v.grid:
        raise GridMismatchError("grid mismatch")
    return SpectralField(u.grid, nl1_bilinear_coeffs(u.coeffs, v.coeffs, u.grid), False)


def mnl1_trilinear(u: SpectralField, v: SpectralField, w: SpectralField) -> SpectralField:
    """``mNL1(u, v, w) = 3/4 (d u) dbar^{-1} d (v conj(w))``."""
    if not (u.grid == v.grid == w.grid):
        raise GridMismatchError("grid mismatch")
    return SpectralField(u.grid, mnl1_trilinear_coeffs(u.coeffs, v.coeffs, w.coeffs, u.grid), False)
