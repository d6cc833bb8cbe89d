"""Time integration of NV / mNV and the Duhamel fixed-point iteration.

In Fourier variables both equations read

    d/dt u_hat = L u_hat + N(u_hat),   L = i P(xi, mu),   N = -NL_hat(u),

with ``NL`` the quadratic NV or cubic mNV nonlinearity.  The stiff linear
part is integrated exactly: ETDRK4 (exponential time differencing with
contour-averaged phi functions) or IFRK4 (integrating factor RK4).

The Duhamel map evaluates

    u(t) = exp(itP) phi - int_0^t exp(i(t - s)P) NL(u(s)) ds

on the native time samples of a trajectory, using the interaction picture
``exp(-isP) NL(u(s))`` and cumulative Simpson weights.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Literal, Optional

import numpy as np
from scipy.integrate import cumulative_simpson

from .fieldio import write_fields, write_manifest
from .operators import (CUBIC_BAND, QUADRATIC_BAND, dispersion_symbol, nl_mnv_coeffs,
                        nl_nv_coeffs)
from .spectral import GridMismatchError, GridSpec, SpectralField, sobolev_weight

__all__ = [
    "EvolutionConfig",
    "PicardConfig",
    "Trajectory",
    "PicardResult",
    "EvolutionError",
    "etdrk4_coefficients",
    "evolve",
    "duhamel_map",
    "picard_iterate",
    "sup_sobolev_difference",
    "dump_trajectory",
]

log = logging.getLogger(__name__)

N_CONTOUR = 32


class EvolutionError(FloatingPointError):
    """Raised when a run becomes non-finite or exceeds the blow-up guard."""

    def __init__(self, message: str, time: float):
        super().__init__(f"{message} at t = {time:.6g}")
        self.time = time


@dataclass(frozen=True)
class EvolutionConfig:
    """Parameters of a time integration.

    Parameters
    ----------
    dt : float
        Step size, positive.  ``dt * max|P|`` over the retained band must
        not exceed pi.
    t_end : float
        Final time, nonnegative.  It is rounded to a whole number of steps.
    equation : {"NV", "mNV"}
    integrator : {"ETDRK4", "IFRK4"}
    dealias : bool
        Restrict the solution to the 2/3 (NV) or 1/2 (mNV) band.
    nonlinear : bool
        Switch the nonlinearity off to obtain the linear flow.
    save_every : int
        Store every ``save_every``-th step in the trajectory.
    """

    dt: float = 1e-3
    t_end: float = 1.0
    equation: Literal["NV", "mNV"] = "NV"
    integrator: Literal["ETDRK4", "IFRK4"] = "ETDRK4"
    dealias: bool = True
    nonlinear: bool = True
    save_every: int = 1

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not self.t_end >= 0:
            raise ValueError("t_end must be nonnegative")
        if self.equation not in ("NV", "mNV"):
            raise ValueError(f"unknown equation {self.equation!r}")
        if self.integrator not in ("ETDRK4", "IFRK4"):
            raise ValueError(f"unknown integrator {self.integrator!r}")
        if self.save_every < 1:
            raise ValueError("save_every must be >= 1")

    @property
    def n_steps(self) -> int:
        return int(round(self.t_end / self.dt))

    def band_fraction(self) -> float:
        return QUADRATIC_BAND if self.equation == "NV" else CUBIC_BAND


@dataclass(frozen=True)
class PicardConfig:
    """Parameters of the Duhamel fixed-point iteration.

    Parameters
    ----------
    delta : float
        Window length in ``(0, 1]``.
    n_iter : int
        Number of iterations (at least 1).
    s : float
        Sobolev index of the sup-in-time difference diagnostics.
    n_samples : int
        Odd number of uniform time samples on ``[0, delta]``.
    equation : {"NV", "mNV"}
    """

    delta: float = 0.1
    n_iter: int = 6
    s: float = 0.0
    n_samples: int = 201
    equation: Literal["NV", "mNV"] = "NV"

    def __post_init__(self):
        if not (0 < self.delta <= 1):
            raise ValueError("delta must lie in (0, 1]")
        if self.n_iter < 1:
            raise ValueError("n_iter must be >= 1")
        if self.n_samples < 3 or self.n_samples % 2 == 0:
            raise ValueError("n_samples must be odd and >= 3")

    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.delta, self.n_samples)


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Immutable time series of spectral coefficients on one grid."""

    grid: GridSpec
    times: np.ndarray
    coeffs: np.ndarray
    real: bool = True

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        c = np.asarray(self.coeffs, dtype=complex)
        if c.shape != (t.size,) + self.grid.shape:
            raise ValueError("trajectory coefficients do not match times and grid")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "coeffs", c)

    def __len__(self) -> int:
        return self.times.size

    def __iter__(self) -> Iterator[tuple[float, SpectralField]]:
        for t, c in zip(self.times, self.coeffs):
            yield float(t), SpectralField(self.grid, c, self.real)

    def field(self, i: int) -> SpectralField:
        return SpectralField(self.grid, self.coeffs[i], self.real)

    @property
    def final(self) -> SpectralField:
        return self.field(-1)

    def is_uniform(self, rtol: float = 1e-9) -> bool:
        if self.times.size < 2:
            return True
        d = np.diff(self.times)
        return bool(np.all(np.abs(d - d[0]) <= rtol * abs(d[0])))


@dataclass(frozen=True, eq=False)
class PicardResult:
    """Outcome of :func:`picard_iterate`.

    Attributes
    ----------
    trajectory : Trajectory
        Last iterate.
    differences : ndarray
        ``sup_t ||u^{n+1}(t) - u^n(t)||_{H^s}`` for each iteration.
    contracted : bool
        False when the differences grew in two consecutive iterations.
    """

    trajectory: Trajectory
    differences: np.ndarray
    contracted: bool
    floor: float = 0.0

    def ratios(self) -> np.ndarray:
        """Successive ratios ``d_{n+1} / d_n`` above the rounding floor."""
        d = self.differences
        keep = d[:-1] > self.floor
        r = np.full(d.size - 1, np.nan)
        r[keep] = d[1:][keep] / d[:-1][keep]
        return r


# ---------------------------------------------------------------------------
# nonlinear right-hand sides
# ---------------------------------------------------------------------------

def _nonlinearity(equation: str, real: bool):
    if equation == "NV":
        def nl(c, grid):
            out = nl_nv_coeffs(c, grid)
            out[..., 0, 0] = 0.0
            return out
    else:
        def nl(c, grid):
            return nl_mnv_coeffs(c, grid, real=real)
    return nl


def etdrk4_coefficients(Ldt: np.ndarray, dt: float, m: int = N_CONTOUR) -> tuple[np.ndarray, ...]:
    """ETDRK4 coefficients ``(E, E2, Q, f1, f2, f3)`` for ``L dt``.

    The phi functions are averaged over ``m`` points on the unit circle
    centred at each ``L dt`` which removes the cancellation error for
    small arguments.
    """
    Ldt = np.asarray(Ldt, dtype=complex)
    r = np.exp(2j * np.pi * (np.arange(1, m + 1) - 0.5) / m)
    LR = Ldt[..., None] + r
    E = np.exp(Ldt)
    E2 = np.exp(Ldt / 2)
    eLR = np.exp(LR)
    Q = dt * np.mean((np.exp(LR / 2) - 1) / LR, axis=-1)
    f1 = dt * np.mean((-4 - LR + eLR * (4 - 3 * LR + LR ** 2)) / LR ** 3, axis=-1)
    f2 = dt * np.mean((2 + LR + eLR * (LR - 2)) / LR ** 3, axis=-1)
    f3 = dt * np.mean((-4 - 3 * LR - LR ** 2 + eLR * (4 - LR)) / LR ** 3, axis=-1)
    return E, E2, Q, f1, f2, f3


def _sup(c: np.ndarray, grid: GridSpec) -> float:
    return float(np.max(np.abs(np.fft.ifft2(c) * grid.nx * grid.ny)))


def evolve(phi: SpectralField, cfg: EvolutionConfig) -> Trajectory:
    """Integrate NV or mNV from ``phi`` up to ``cfg.t_end``.

    Parameters
    ----------
    phi : SpectralField
        Initial datum.  NV requires a real-flagged field.
    cfg : EvolutionConfig

    Returns
    -------
    Trajectory
        Samples at ``t = k * dt`` for ``k`` a multiple of ``save_every`` and
        the final time.

    Raises
    ------
    EvolutionError
        On non-finite values or when the sup norm exceeds ``1e6`` times the
        initial sup norm.
    """
    grid = phi.grid
    if cfg.equation == "NV" and not phi.real:
        raise ValueError("NV evolution needs a real-flagged datum")
    frac = cfg.band_fraction()
    mask = grid.band_mask(frac) if cfg.dealias else ~grid.nyquist_mask()
    xi, mu = grid.wavenumbers()
    P = dispersion_symbol(xi, mu) * np.ones(grid.shape)
    pmax = float(np.max(np.abs(P[mask]))) if mask.any() else 0.0
    if cfg.dt * pmax > np.pi * (1 + 1e-12):
        raise ValueError(f"dt * max|P| = {cfg.dt * pmax:.4g} exceeds pi on the retained band")
    u = phi.coeffs * mask
    if np.max(np.abs(phi.coeffs - u)) > 0:
        log.debug("initial datum truncated to the retained band")
    L = 1j * P
    dt = cfg.dt
    n = cfg.n_steps
    nl = _nonlinearity(cfg.equation, phi.real)

    def N(c):
        if not cfg.nonlinear:
            return np.zeros_like(c)
        return -nl(c, grid) * mask

    sup0 = _sup(u, grid)
    guard = 1e6 * sup0 if sup0 > 0 else np.inf
    times, saved = [0.0], [u.copy()]
    if cfg.integrator == "ETDRK4":
        E, E2, Q, f1, f2, f3 = etdrk4_coefficients(L * dt, dt)
    else:
        E = np.exp(L * dt)
        E2 = np.exp(L * dt / 2)
    for k in range(1, n + 1):
        if cfg.integrator == "ETDRK4":
            Nu = N(u)
            a = E2 * u + Q * Nu
            Na = N(a)
            b = E2 * u + Q * Na
            Nb = N(b)
            c = E2 * a + Q * (2 * Nb - Nu)
            Nc = N(c)
            u = E * u + Nu * f1 + 2 * (Na + Nb) * f2 + Nc * f3
        else:
            k1 = N(u)
            k2 = N(E2 * (u + 0.5 * dt * k1))
            k3 = N(E2 * u + 0.5 * dt * k2)
            k4 = N(E * u + dt * E2 * k3)
            u = E * u + dt / 6 * (E * k1 + 2 * E2 * (k2 + k3) + k4)
        u = u * mask
        if phi.real:
            u[0, 0] = u[0, 0].real + 0j
        t = k * dt
        if not np.all(np.isfinite(u)):
            raise EvolutionError("non-finite field", t)
        if cfg.nonlinear and _sup(u, grid) > guard:
            raise EvolutionError("sup norm exceeded the blow-up guard", t)
        if k % cfg.save_every == 0 or k == n:
            times.append(t)
            saved.append(u.copy())
    return Trajectory(grid, np.array(times), np.array(saved), phi.real)


# ---------------------------------------------------------------------------
# Duhamel map and Picard iteration
# ---------------------------------------------------------------------------

def duhamel_map(u: Trajectory, phi: SpectralField, cfg: PicardConfig | EvolutionConfig | None = None,
                equation: Optional[str] = None) -> Trajectory:
    """Apply the Duhamel operator to a trajectory.

    Parameters
    ----------
    u : Trajectory
        Uniformly sampled input starting at ``t = 0``.
    phi : SpectralField
        Datum on the same grid.
    cfg : PicardConfig or EvolutionConfig, optional
        Supplies the equation (default NV).

    Returns
    -------
    Trajectory
        ``exp(itP) phi - int_0^t exp(i(t-s)P) NL(u(s)) ds`` at the input times.
    """
    if u.grid != phi.grid:
        raise GridMismatchError("trajectory and datum live on different grids")
    if u.times[0] != 0 or not u.is_uniform():
        raise ValueError("trajectory must be uniformly sampled from t = 0")
    eq = equation or (cfg.equation if cfg is not None else "NV")
    grid = u.grid
    xi, mu = grid.wavenumbers()
    P = dispersion_symbol(xi, mu)
    nl = _nonlinearity(eq, phi.real)
    t = u.times
    phase = np.exp(-1j * t[:, None, None] * P)            # exp(-isP)
    integrand = phase * nl(u.coeffs, grid)
    if t.size >= 3:
        # scipy's cumulative_simpson is real-only; integrate both parts
        cum = (cumulative_simpson(integrand.real, x=t, axis=0, initial=0)
               + 1j * cumulative_simpson(integrand.imag, x=t, axis=0, initial=0))
    else:
        cum = np.concatenate([np.zeros_like(integrand[:1]),
                              0.5 * (t[1] - t[0]) * (integrand[:1] + integrand[1:])], axis=0)
    out = np.conj(phase) * (phi.coeffs[None] - cum)
    if phi.real:
        out[:, 0, 0] = out[:, 0, 0].real
    return Trajectory(grid, t.copy(), out, phi.real)


def sup_sobolev_difference(a: Trajectory, b: Trajectory, s: float) -> float:
    """``sup_t ||a(t) - b(t)||_{H^s}``."""
    xi, mu = a.grid.wavenumbers()
    w = sobolev_weight(xi, mu, s)
    d = np.abs(a.coeffs - b.coeffs) * w
    return float(np.sqrt(a.grid.area * np.max(np.sum(d ** 2, axis=(1, 2)))))


def picard_iterate(phi: SpectralField, cfg: PicardConfig) -> PicardResult:
    """Iterate ``u^{n+1} = duhamel_map(u^n)`` from the linear flow.

    Divergence (differences growing in two consecutive iterations) stops the
    iteration and is reported through ``contracted = False``.  Differences
    below ``1e-13`` times the datum's norm are treated as converged to
    rounding and are excluded from ratio statistics.
    """
    times = cfg.times()
    xi, mu = phi.grid.wavenumbers()
    P = dispersion_symbol(xi, mu)
    lin = np.exp(1j * times[:, None, None] * P) * phi.coeffs[None]
    u = Trajectory(phi.grid, times, lin, phi.real)
    diffs = []
    grew = 0
    contracted = True
    xi_w = sobolev_weight(xi, mu, cfg.s)
    norm0 = float(np.sqrt(phi.grid.area * np.sum((xi_w * np.abs(phi.coeffs)) ** 2)))
    for _ in range(cfg.n_iter):
        nxt = duhamel_map(u, phi, cfg)
        diffs.append(sup_sobolev_difference(nxt, u, cfg.s))
        u = nxt
        if len(diffs) >= 2 and diffs[-1] > diffs[-2] and diffs[-2] > 1e-13 * norm0:
            grew += 1
            if grew >= 2:
                contracted = False
                log.warning("Picard iteration is not contracting; stopping")
                break
        else:
            grew = 0
    return PicardResult(u, np.array(diffs), contracted, floor=1e-13 * norm0)


# ---------------------------------------------------------------------------
# dumps
# ---------------------------------------------------------------------------

def dump_trajectory(traj: Trajectory, directory: str | Path, config: dict | None = None,
                    stem: str = "trajectory") -> Path:
    """Write trajectory field records plus a manifest with checksums."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    path = directory / f"{stem}.nvf"
    write_fields(path, (f for _, f in traj))
    times_path = directory / f"{stem}_times.csv"
    times_path.write_text("index,t\n" + "".join(f"{i},{t:.17g}\n" for i, t in enumerate(traj.times)))
    g = traj.grid
    cfg = dict(config or {})
    cfg.setdefault("grid", {"nx": g.nx, "ny": g.ny, "lx": g.lx, "ly": g.ly})
    return write_manifest(directory, [path, times_path], cfg, name=f"{stem}_manifest.json")
