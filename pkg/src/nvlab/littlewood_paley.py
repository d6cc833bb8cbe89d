"""Dyadic cutoffs, Littlewood-Paley and modulation projections, X^{s,b} norms.

The base profile ``eta`` is smooth and even, equal to 1 on ``[-1, 1]`` and
supported in ``[-2, 2]``.  Between 1 and 2 it uses the C-infinity smoothstep

    eta(r) = g(2 - |r|) / (g(2 - |r|) + g(|r| - 1)),   g(x) = exp(-1/x) for x > 0,

so all derivatives match at both junctions.  The ring profile
``eta(r) - eta(2 r)`` is supported in ``1/2 <= |r| <= 2`` and the family

    phi_0 = eta(|xi|),   phi_k = ring(|xi| / 2^k)   (k >= 1)

telescopes to ``eta(|xi| / 2^K)``, an exact partition of unity on
``|xi| <= 2^K``.  The modulation cutoffs ``psi_l`` are the same profiles in
``w = tau - P(xi, mu)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
import scipy.fft as sfft

from .operators import dispersion_symbol
from .spectral import (GridSpec, SpaceTimeField, SpaceTimeGridSpec, SpectralField, fft_workers,
                       sobolev_weight)
from .timestepper import Trajectory

__all__ = [
    "eta",
    "ring",
    "CutoffFamily",
    "NormSpec",
    "shell_support",
    "project_Pk",
    "project_Ql",
    "modulation",
    "xsb_norm",
    "default_bump",
    "window_in_time",
    "spacetime_from_physical",
]


def _g(x: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore", over="ignore"):
        return np.where(x > 0, np.exp(-1.0 / np.where(x > 0, x, 1.0)), 0.0)


def eta(r) -> np.ndarray:
    """Smooth even cutoff: 1 on ``|r| <= 1``, 0 on ``|r| >= 2``."""
    a = np.abs(np.asarray(r, dtype=float))
    left = _g(2.0 - a)
    right = _g(a - 1.0)
    with np.errstate(invalid="ignore"):
        mid = left / (left + right)
    return np.where(a <= 1.0, 1.0, np.where(a >= 2.0, 0.0, mid))


def ring(r) -> np.ndarray:
    """``eta(r) - eta(2 r)``, supported in ``1/2 <= |r| <= 2``."""
    r = np.asarray(r, dtype=float)
    return eta(r) - eta(2.0 * r)


def shell_support(k: int) -> tuple[float, float]:
    """Radial support ``[r_in, r_out]`` of ``phi_k``."""
    if k < 0:
        raise ValueError("dyadic index must be nonnegative")
    return (0.0, 2.0) if k == 0 else (2.0 ** (k - 1), 2.0 ** (k + 1))


@dataclass(frozen=True)
class CutoffFamily:
    """The dyadic families ``phi_k`` (frequency) and ``psi_l`` (modulation)."""

    def phi(self, k: int, xi, mu) -> np.ndarray:
        r = np.hypot(xi, mu)
        return eta(r) if k == 0 else ring(r / 2.0 ** k)

    def psi(self, l: int, w) -> np.ndarray:
        a = np.abs(np.asarray(w, dtype=float))
        return eta(a) if l == 0 else ring(a / 2.0 ** l)

    def phi_table(self, grid: GridSpec, k: int) -> np.ndarray:
        xi, mu = grid.wavenumbers()
        return np.broadcast_to(self.phi(k, xi, mu), grid.shape).copy()

    def partition_residual(self, grid: GridSpec, K: int) -> float:
        """Max over lattice points with ``|xi| <= 2^K`` of ``|sum_k phi_k - 1|``."""
        xi, mu = grid.wavenumbers()
        tot = sum(self.phi(k, xi, mu) for k in range(K + 1))
        inside = np.hypot(xi, mu) <= 2.0 ** K
        return float(np.max(np.abs(np.broadcast_to(tot, grid.shape)[inside] - 1.0)))


CUTOFFS = CutoffFamily()


@dataclass(frozen=True)
class NormSpec:
    """Indices of an ``X^{s,b}`` norm.

    Parameters
    ----------
    s : float
        Sobolev index.
    b : float
        Modulation index.
    homogeneous : bool
        Use ``|(xi, mu)|^s`` instead of ``<(xi, mu)>^s``.
    """

    s: float = 0.0
    b: float = 0.0
    homogeneous: bool = False

    def __post_init__(self):
        if not (np.isfinite(self.s) and np.isfinite(self.b)):
            raise ValueError("norm indices must be finite")


def project_Pk(F: SpectralField, k: int) -> SpectralField:
    """Littlewood-Paley projection onto the shell ``|(xi, mu)| ~ 2^k``.

    Raises
    ------
    ValueError
        When ``2^{k+1}`` exceeds the grid's dealiased band edge.
    """
    if k < 0:
        raise ValueError("dyadic index must be nonnegative")
    if 2.0 ** (k + 1) > F.grid.band_edge():
        raise ValueError(f"shell k = {k} reaches beyond the dealiased band edge {F.grid.band_edge():.4g}")
    return F.with_coeffs(F.coeffs * CUTOFFS.phi_table(F.grid, k))


def modulation(stgrid: SpaceTimeGridSpec) -> np.ndarray:
    """The weight ``w = tau - P(xi, mu)`` on the space-time lattice."""
    tau = stgrid.tau_1d()[:, None, None]
    xi, mu = stgrid.grid.wavenumbers()
    return tau - dispersion_symbol(xi, mu)[None]


def project_Ql(U: SpaceTimeField, l: int) -> SpaceTimeField:
    """Modulation projection onto ``|tau - P| ~ 2^l``.

    Raises
    ------
    ValueError
        When ``2^{l+1} + max|P|`` over the populated band exceeds
        ``tau_max``, i.e. the modulation shell is not representable.
    """
    if l < 0:
        raise ValueError("dyadic index must be nonnegative")
    pmax = U.populated_pmax()
    if 2.0 ** (l + 1) + pmax > U.stgrid.tau_max:
        raise ValueError(f"modulation shell l = {l} exceeds the representable window")
    w = modulation(U.stgrid)
    return SpaceTimeField(U.stgrid, U.coeffs * CUTOFFS.psi(l, w), U.real, check_band=False)


def xsb_norm(U: SpaceTimeField, spec: NormSpec) -> float:
    """``X^{s,b}`` norm ``(T area sum <xi>^{2s} <w>^{2b} |c|^2)^{1/2}``."""
    if spec.homogeneous and spec.s < 0 and np.any(U.coeffs[:, 0, 0] != 0):
        raise ValueError("homogeneous norm with s < 0 needs spatially mean-zero fields")
    xi, mu = U.grid.wavenumbers()
    ws = sobolev_weight(xi, mu, spec.s, spec.homogeneous)[None]
    wb = (1.0 + modulation(U.stgrid) ** 2) ** (spec.b / 2.0)
    return float(np.sqrt(U.stgrid.measure * np.sum((ws * wb * np.abs(U.coeffs)) ** 2)))


def default_bump(t: np.ndarray, t_window: float) -> np.ndarray:
    """Smooth bump equal to 1 on the middle half of ``[0, t_window]``."""
    return eta((np.asarray(t) - t_window / 2.0) / (t_window / 4.0))


def spacetime_from_physical(values: np.ndarray, stgrid: SpaceTimeGridSpec, real: bool = True,
                            check_band: bool = True) -> SpaceTimeField:
    """Space-time coefficients of samples on the ``(t, x, y)`` grid."""
    n = values.size
    c = sfft.fftn(values, workers=fft_workers()) / n
    c[:, stgrid.grid.nyquist_mask()] = 0.0
    if stgrid.nt % 2 == 0:
        c[stgrid.nt // 2] = 0.0
    return SpaceTimeField(stgrid, c, real, check_band)


def window_in_time(traj: Trajectory, profile: Optional[Callable[[np.ndarray], np.ndarray]] = None,
                   tol: float = 1e-12) -> SpaceTimeField:
    """Multiply a trajectory by a time bump and transform in time.

    Parameters
    ----------
    traj : Trajectory
        Uniform samples ``t_0 = 0, ..., t_{n-1}``; the periodic window is
        ``T = n * dt``.
    profile : callable, optional
        Bump evaluated at the sample times.  Defaults to
        :func:`default_bump` on the window.

    Raises
    ------
    ValueError
        If the bump does not vanish at the window edges (window too short
        for the bump support) or the sampling is not uniform.
    """
    if not traj.is_uniform() or len(traj) < 2:
        raise ValueError("trajectory must be uniformly sampled")
    t = traj.times - traj.times[0]
    dt = t[1] - t[0]
    T = dt * t.size
    if profile is None:
        def profile(tt):
            return default_bump(tt, T)
    rho = np.asarray(profile(t), dtype=float)
    edges = np.abs(np.asarray(profile(np.array([0.0, T])), dtype=float))
    peak = np.max(np.abs(rho)) if rho.size else 0.0
    if peak > 0 and np.max(edges) > tol * peak:
        raise ValueError("bump does not vanish at the window edges; the window is too short")
    st = SpaceTimeGridSpec(traj.grid, t.size, T)
    # u(t) = sum_n c_n exp(i tau_n t), so c_n is the normalised forward DFT in time
    weighted = rho[:, None, None] * traj.coeffs
    c = sfft.fft(weighted, axis=0, workers=fft_workers()) / t.size
    return SpaceTimeField(st, c, traj.real)
