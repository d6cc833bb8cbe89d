"""Periodic grids, Fourier transforms, multipliers and norm quadratures.

Fields on the periodic box ``[0, lx) x [0, ly)`` are represented by their
Fourier coefficients ``c[j, m]`` in the unshifted FFT layout, normalised so
that

    f(x, y) = sum_{j,m} c[j, m] exp(i (xi_j x + mu_m y)),

with ``xi_j = 2 pi j / lx`` and ``mu_m = 2 pi m / ly``.  The constant field
1 therefore has a single coefficient equal to 1, and ``cos(2 pi x / lx)``
has two coefficients equal to 1/2.  The L2 norm on the box is

    ||f||_{L2}^2 = lx * ly * sum |c|^2.

Array axis 0 is the x direction, axis 1 the y direction.  Space-time fields
carry a leading time/frequency axis.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
import scipy.fft as sfft

__all__ = [
    "GridSpec",
    "SpectralField",
    "SpaceTimeGridSpec",
    "SpaceTimeField",
    "GridMismatchError",
    "NyquistContaminationError",
    "fft_workers",
    "forward_transform",
    "inverse_transform",
    "apply_multiplier",
    "lp_norm",
    "sobolev_norm",
    "sobolev_weight",
    "hermitian_part",
    "is_hermitian",
    "random_field",
    "reflect_index",
]


class GridMismatchError(ValueError):
    """Raised when two fields living on different grids are combined."""


class NyquistContaminationError(ValueError):
    """Raised when a Nyquist row or column carries a nonzero coefficient."""


def fft_workers() -> int:
    """Number of FFT worker threads, capped by ``NVLAB_THREADS`` (default 1)."""
    raw = os.environ.get("NVLAB_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        n = 1
    return max(1, n)


def reflect_index(n: int) -> np.ndarray:
    """Index array mapping FFT position ``j`` to the position of ``-j``."""
    return (-np.arange(n)) % n


@dataclass(frozen=True)
class GridSpec:
    """Uniform periodic grid on the box ``[0, lx) x [0, ly)``.

    Parameters
    ----------
    nx, ny : int
        Even number of points per axis, at least 8.
    lx, ly : float
        Box side lengths.  The default ``2 pi * 32`` resolves dyadic shells
        up to ``k = 7`` with a 128 point grid after dealiasing.
    """

    nx: int = 128
    ny: int = 128
    lx: float = 2 * np.pi * 32
    ly: float = 2 * np.pi * 32

    def __post_init__(self):
        for n in (self.nx, self.ny):
            if int(n) != n or n < 8 or n % 2:
                raise ValueError(f"grid sizes must be even integers >= 8, got {n}")
        if not (self.lx > 0 and self.ly > 0):
            raise ValueError("box lengths must be positive")

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nx, self.ny)

    @property
    def area(self) -> float:
        return self.lx * self.ly

    @property
    def dx(self) -> float:
        return self.lx / self.nx

    @property
    def dy(self) -> float:
        return self.ly / self.ny

    @property
    def dxi(self) -> float:
        """Lattice spacing in xi."""
        return 2 * np.pi / self.lx

    @property
    def dmu(self) -> float:
        return 2 * np.pi / self.ly

    def xi_1d(self) -> np.ndarray:
        return 2 * np.pi * np.fft.fftfreq(self.nx, d=self.dx)

    def mu_1d(self) -> np.ndarray:
        return 2 * np.pi * np.fft.fftfreq(self.ny, d=self.dy)

    def wavenumbers(self) -> tuple[np.ndarray, np.ndarray]:
        """Frequency lattice ``(xi, mu)`` as broadcastable 2D arrays."""
        return self.xi_1d()[:, None], self.mu_1d()[None, :]

    def coordinates(self) -> tuple[np.ndarray, np.ndarray]:
        """Physical sample points ``(x, y)`` as broadcastable 2D arrays."""
        x = np.arange(self.nx) * self.dx
        y = np.arange(self.ny) * self.dy
        return x[:, None], y[None, :]

    def index_1d(self) -> tuple[np.ndarray, np.ndarray]:
        """Signed integer mode indices in FFT layout."""
        return (np.fft.fftfreq(self.nx, d=1.0 / self.nx).astype(int),
                np.fft.fftfreq(self.ny, d=1.0 / self.ny).astype(int))

    def nyquist_mask(self) -> np.ndarray:
        """Boolean mask that is True on the Nyquist row and column."""
        mask = np.zeros(self.shape, dtype=bool)
        mask[self.nx // 2, :] = True
        mask[:, self.ny // 2] = True
        return mask

    def band_mask(self, fraction: float) -> np.ndarray:
        """Modes with ``|j| < fraction * nx / 2`` and ``|m| < fraction * ny / 2``.

        ``fraction = 2/3`` is the quadratic dealiasing band and ``1/2`` the
        cubic one.
        """
        j, m = self.index_1d()
        return ((np.abs(j)[:, None] < fraction * self.nx / 2)
                & (np.abs(m)[None, :] < fraction * self.ny / 2))

    def band_edge(self, fraction: float = 2.0 / 3.0) -> float:
        """Radius of the largest frequency disk contained in ``band_mask``."""
        jmax = np.ceil(fraction * self.nx / 2) - 1
        mmax = np.ceil(fraction * self.ny / 2) - 1
        return float(min(jmax * self.dxi, mmax * self.dmu))

    def refined(self, factor: int = 2) -> "GridSpec":
        """Same box with ``factor`` times more points per axis."""
        return GridSpec(self.nx * factor, self.ny * factor, self.lx, self.ly)


def _check_grid(a: GridSpec, b: GridSpec) -> None:
    if a != b:
        raise GridMismatchError(f"grid mismatch: {a} vs {b}")


def hermitian_part(coeffs: np.ndarray) -> np.ndarray:
    """Project coefficients (last two axes spatial) onto Hermitian symmetry."""
    nx, ny = coeffs.shape[-2:]
    refl = coeffs[..., reflect_index(nx), :][..., reflect_index(ny)]
    return 0.5 * (coeffs + np.conj(refl))


def is_hermitian(coeffs: np.ndarray, rtol: float = 1e-13) -> bool:
    nx, ny = coeffs.shape[-2:]
    refl = coeffs[..., reflect_index(nx), :][..., reflect_index(ny)]
    scale = np.max(np.abs(coeffs)) if coeffs.size else 0.0
    if scale == 0.0:
        return True
    return bool(np.max(np.abs(coeffs - np.conj(refl))) <= rtol * scale)


@dataclass(frozen=True, eq=False)
class SpectralField:
    """Fourier coefficients of a field on a :class:`GridSpec`.

    Parameters
    ----------
    grid : GridSpec
    coeffs : ndarray of complex, shape ``grid.shape``
    real : bool
        Flag declaring that the physical field is real valued, i.e. the
        coefficients are Hermitian symmetric.
    """

    grid: GridSpec
    coeffs: np.ndarray
    real: bool = False

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=complex)
        if c.shape != self.grid.shape:
            raise ValueError(f"coefficient shape {c.shape} does not match grid {self.grid.shape}")
        object.__setattr__(self, "coeffs", c)

    # value semantics -----------------------------------------------------
    def copy(self) -> "SpectralField":
        return SpectralField(self.grid, self.coeffs.copy(), self.real)

    def with_coeffs(self, coeffs: np.ndarray, real: Optional[bool] = None) -> "SpectralField":
        return SpectralField(self.grid, coeffs, self.real if real is None else real)

    def __add__(self, other: "SpectralField") -> "SpectralField":
        _check_grid(self.grid, other.grid)
        return SpectralField(self.grid, self.coeffs + other.coeffs, self.real and other.real)

    def __sub__(self, other: "SpectralField") -> "SpectralField":
        _check_grid(self.grid, other.grid)
        return SpectralField(self.grid, self.coeffs - other.coeffs, self.real and other.real)

    def __mul__(self, a: float) -> "SpectralField":
        a = complex(a)
        return SpectralField(self.grid, a * self.coeffs, self.real and a.imag == 0)

    __rmul__ = __mul__

    def __neg__(self) -> "SpectralField":
        return SpectralField(self.grid, -self.coeffs, self.real)

    # diagnostics ---------------------------------------------------------
    def nyquist_clean(self) -> bool:
        return not np.any(self.coeffs[self.grid.nyquist_mask()])

    def l2_norm(self) -> float:
        """Physical L2 norm computed from the coefficients (Parseval)."""
        return float(np.sqrt(self.grid.area * np.sum(np.abs(self.coeffs) ** 2)))

    def mean(self) -> complex:
        """Spatial mean, i.e. the (0, 0) coefficient."""
        return complex(self.coeffs[0, 0])

    @classmethod
    def zeros(cls, grid: GridSpec, real: bool = True) -> "SpectralField":
        return cls(grid, np.zeros(grid.shape, dtype=complex), real)


@dataclass(frozen=True)
class SpaceTimeGridSpec:
    """A spatial grid together with ``nt`` uniform samples on ``[0, t_window)``.

    The temporal frequency lattice is ``tau_n = 2 pi n / t_window``.
    """

    grid: GridSpec
    nt: int
    t_window: float

    def __post_init__(self):
        if self.nt < 2:
            raise ValueError("need at least two time samples")
        if not self.t_window > 0:
            raise ValueError("time window must be positive")

    @property
    def dt(self) -> float:
        return self.t_window / self.nt

    @property
    def tau_max(self) -> float:
        """Largest representable |tau| (the temporal Nyquist frequency)."""
        return np.pi * self.nt / self.t_window

    def times(self) -> np.ndarray:
        return np.arange(self.nt) * self.dt

    def tau_1d(self) -> np.ndarray:
        return 2 * np.pi * np.fft.fftfreq(self.nt, d=self.dt)

    @property
    def measure(self) -> float:
        """Weight turning coefficient sums into space-time L2 integrals."""
        return self.t_window * self.grid.area


@dataclass(frozen=True, eq=False)
class SpaceTimeField:
    """Space-time Fourier coefficients ``c[n, j, m]``.

    The physical field is ``u(t, x, y) = sum c[n,j,m] exp(i(tau_n t + xi_j x
    + mu_m y))`` on the periodic window.  Construction checks that the
    spatial band actually populated keeps ``max |P| <= tau_max / 2`` so the
    modulation weight ``tau - P`` is not aliased.
    """

    stgrid: SpaceTimeGridSpec
    coeffs: np.ndarray
    real: bool = False
    check_band: bool = True

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=complex)
        shape = (self.stgrid.nt,) + self.stgrid.grid.shape
        if c.shape != shape:
            raise ValueError(f"coefficient shape {c.shape} does not match {shape}")
        object.__setattr__(self, "coeffs", c)
        if self.check_band:
            pmax = self.populated_pmax()
            if pmax > self.stgrid.tau_max / 2 * (1 + 1e-12):
                raise ValueError(
                    f"populated spatial band has max|P| = {pmax:.4g} > tau_max/2 = "
                    f"{self.stgrid.tau_max / 2:.4g}; refine the time sampling")

    @property
    def grid(self) -> GridSpec:
        return self.stgrid.grid

    def populated_pmax(self) -> float:
        """Largest ``|P(xi, mu)|`` over spatial modes carrying any energy."""
        occupied = np.any(self.coeffs != 0, axis=0)
        if not occupied.any():
            return 0.0
        xi, mu = self.grid.wavenumbers()
        p = np.abs(0.25 * xi ** 3 - 0.75 * xi * mu ** 2)
        return float(np.max(np.broadcast_to(p, occupied.shape)[occupied]))

    def l2_norm(self) -> float:
        return float(np.sqrt(self.stgrid.measure * np.sum(np.abs(self.coeffs) ** 2)))

    def physical(self) -> np.ndarray:
        """Samples on the ``(t, x, y)`` grid."""
        n = self.coeffs.size
        vals = sfft.ifftn(self.coeffs, workers=fft_workers()) * n
        return vals.real if self.real else vals


# ---------------------------------------------------------------------------
# transforms
# ---------------------------------------------------------------------------

def forward_transform(values: np.ndarray, grid: GridSpec, real: Optional[bool] = None) -> SpectralField:
    """Physical samples to Fourier coefficients.

    Nyquist modes are zeroed, so the round trip is the identity exactly for
    fields whose Nyquist content vanishes.

    Parameters
    ----------
    values : ndarray, shape ``grid.shape``
    grid : GridSpec
    real : bool, optional
        Defaults to whether ``values`` has a real dtype.
    """
    values = np.asarray(values)
    if values.shape != grid.shape:
        raise ValueError(f"sample shape {values.shape} does not match grid {grid.shape}")
    if real is None:
        real = not np.iscomplexobj(values)
    c = sfft.fft2(values, workers=fft_workers()) / (grid.nx * grid.ny)
    c[grid.nyquist_mask()] = 0.0
    if real:
        c = hermitian_part(c)
    return SpectralField(grid, c, bool(real))


def inverse_transform(F: SpectralField) -> np.ndarray:
    """Fourier coefficients to physical samples.

    Returns a real array when ``F`` is flagged real (the discarded imaginary
    residue is below rounding for Hermitian coefficients).

    Raises
    ------
    NyquistContaminationError
        If a Nyquist coefficient is nonzero.
    """
    if not F.nyquist_clean():
        raise NyquistContaminationError("field carries nonzero Nyquist coefficients")
    vals = sfft.ifft2(F.coeffs, workers=fft_workers()) * (F.grid.nx * F.grid.ny)
    return vals.real if F.real else vals


def apply_multiplier(F: SpectralField, m: Callable[[np.ndarray, np.ndarray], np.ndarray],
                     real: Optional[bool] = None) -> SpectralField:
    """Multiply coefficients pointwise by ``m(xi, mu)``.

    Parameters
    ----------
    F : SpectralField
    m : callable
        Vectorised multiplier evaluated on the frequency lattice.  Singular
        points must be regularised by the caller.
    real : bool, optional
        Realness flag of the output.  By default the flag is kept when the
        multiplier satisfies ``m(-xi, -mu) = conj(m(xi, mu))`` on the lattice.
    """
    xi, mu = F.grid.wavenumbers()
    vals = np.broadcast_to(np.asarray(m(xi, mu)), F.grid.shape)
    if not np.all(np.isfinite(vals)):
        raise ValueError("multiplier is not finite on the lattice")
    out = F.coeffs * vals
    if real is None:
        if F.real:
            refl = vals[reflect_index(F.grid.nx), :][:, reflect_index(F.grid.ny)]
            live = ~F.grid.nyquist_mask()
            real = bool(np.allclose(refl[live], np.conj(vals[live]), rtol=1e-13, atol=0.0))
        else:
            real = False
    return SpectralField(F.grid, out, bool(real))


# ---------------------------------------------------------------------------
# norms
# ---------------------------------------------------------------------------

def lp_norm(values: np.ndarray, grid: GridSpec, p: float) -> float:
    """L^p norm of physical samples by the rectangle rule on the box.

    ``p = inf`` returns ``max |f|``.
    """
    if not p >= 1:
        raise ValueError(f"p must be >= 1, got {p}")
    values = np.asarray(values)
    if values.shape[-2:] != grid.shape:
        raise ValueError("sample shape does not match grid")
    a = np.abs(values)
    if np.isinf(p):
        return float(a.max())
    return float((np.sum(a ** p) * grid.dx * grid.dy) ** (1.0 / p))


def sobolev_weight(xi: np.ndarray, mu: np.ndarray, s: float, homogeneous: bool = False) -> np.ndarray:
    """``<(xi,mu)>^s`` or ``|(xi,mu)|^s`` with the homogeneous weight 0 at the origin."""
    r2 = xi ** 2 + mu ** 2
    if not homogeneous:
        return (1.0 + r2) ** (s / 2.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        w = np.where(r2 > 0, r2 ** (s / 2.0), 0.0)
    return w


def sobolev_norm(F: SpectralField, s: float, homogeneous: bool = False) -> float:
    """Weighted l2 norm ``(area * sum weight^2 |c|^2)^{1/2}``.

    Raises
    ------
    ValueError
        For a homogeneous norm with ``s < 0`` when the mean is nonzero.
    """
    if homogeneous and s < 0 and F.coeffs[0, 0] != 0:
        raise ValueError("homogeneous Sobolev norm with s < 0 needs a mean-zero field")
    xi, mu = F.grid.wavenumbers()
    w = sobolev_weight(xi, mu, s, homogeneous)
    return float(np.sqrt(F.grid.area * np.sum((w * np.abs(F.coeffs)) ** 2)))


# ---------------------------------------------------------------------------
# random data
# ---------------------------------------------------------------------------

def random_field(grid: GridSpec, rng: np.random.Generator, band: Optional[np.ndarray] = None,
                 real: bool = True, mean_zero: bool = False) -> SpectralField:
    """Complex Gaussian coefficients on ``band`` (a boolean mask or None).

    The result is Nyquist free, optionally Hermitian, and has unit-variance
    coefficients before symmetrisation.
    """
    c = rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape)
    if band is not None:
        c = c * band
    c[grid.nyquist_mask()] = 0.0
    if real:
        c = hermitian_part(c)
    if mean_zero:
        c[0, 0] = 0.0
    return SpectralField(grid, c, real)
