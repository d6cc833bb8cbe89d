"""Space-time products of dyadically localized fields, evaluated in frequency.

A localized piece is described directly by its space-time Fourier transform
on the continuum ``R x R^2``:

    f~(tau, xi, mu) = alpha(xi, mu) * beta(tau - P(xi, mu)),

with ``alpha = phi_k * |G|`` and ``beta = psi_l * |H|`` for smooth random
profiles ``G`` (planar) and ``H`` (one-dimensional).  Both factors are
nonnegative, so no cancellation hides the geometry of the interaction
sets, and ``||f||_{L^2}^2 = ||alpha||^2 ||beta||^2`` by Plancherel.

The squared norm of a product is ``||f~ * g~||^2``.  With
``H(z) = (f~ * g~)(z)`` and the symmetry of the convolution,

    ||f~ * g~||^2 = int int H(z_1 + z_2) f~(z_1) g~(z_2) dz_1 dz_2,

estimated by importance sampling ``z_i`` from densities proportional to the
cutoffs ``phi_k psi_l``.  The pair density
``H`` is computed by deterministic quadrature: the modulation integral
collapses to the one-dimensional convolution ``c = beta_f * beta_g``
evaluated at the phase ``Phi(xi_2) = tau - P(xi - xi_2) - P(xi_2)``, and
``Phi`` is an exact quadratic in each coordinate of ``xi_2``, so the level
band ``|Phi| <= S`` is resolved in closed form on every line.  The triple
product adds one Monte Carlo integral over the third frequency, restricted
to the strip on which the pair density can be nonzero.

Factors of ``2 pi`` from the Fourier normalisation are common to both sides
of every ratio and are omitted.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.signal import fftconvolve

from .littlewood_paley import CUTOFFS, shell_support
from .operators import dispersion_symbol
from .resonance import (_inner_axis, disk_chord, gauss_nodes, intersect, phase_quadratic,
                        quadratic_band, sample_annulus)

__all__ = [
    "RandomProfile",
    "LocalizedPiece",
    "ProductEstimate",
    "modulation_support",
    "bilinear_product_norm",
    "trilinear_product_norm",
    "pair_density",
]


def modulation_support(l: int) -> tuple[float, float]:
    """Support ``[a, b]`` of ``psi_l`` in ``|tau - P|``."""
    return shell_support(l)


@dataclass(frozen=True)
class RandomProfile:
    """Modulus of a random trigonometric sum, ``|sum_j a_j exp(i p_j . v)|``.

    Parameters
    ----------
    positions : ndarray, shape (m, d)
        Frequencies ``p_j`` of the sum.  Their spread sets the correlation
        length of the profile, about ``1 / std(p)``.
    amplitudes : ndarray, shape (m,)
        Complex weights ``a_j``.
    """

    positions: np.ndarray
    amplitudes: np.ndarray

    @classmethod
    def draw(cls, rng: np.random.Generator, dim: int, correlation: float, terms: int = 4) -> "RandomProfile":
        """Random profile with correlation length ``correlation``."""
        pos = rng.normal(size=(terms, dim)) / correlation
        amp = (rng.normal(size=terms) + 1j * rng.normal(size=terms)) / np.sqrt(2 * terms)
        return cls(pos, amp)

    def __call__(self, *coords) -> np.ndarray:
        coords = np.broadcast_arrays(*(np.asarray(c, dtype=float) for c in coords))
        acc = np.zeros(coords[0].shape, dtype=complex)
        for p, a in zip(self.positions, self.amplitudes):
            phase = sum(pc * c for pc, c in zip(p, coords))
            acc += a * np.exp(1j * phase)
        return np.abs(acc)


@dataclass(frozen=True)
class LocalizedPiece:
    """Nonnegative space-time Fourier profile localized to ``|xi| ~ 2^k``, ``|tau - P| ~ 2^l``.

    Parameters
    ----------
    k, l : int
        Frequency and modulation levels.
    spatial, temporal : RandomProfile
        Random factors multiplying the cutoffs ``phi_k`` and ``psi_l``.
    scale : float
        Global amplitude factor.
    """

    k: int
    l: int
    spatial: RandomProfile
    temporal: RandomProfile
    scale: float = 1.0

    @classmethod
    def draw(cls, rng: np.random.Generator, k: int, l: int, correlation: float = 0.25,
             terms: int = 4) -> "LocalizedPiece":
        """Random piece whose profiles decorrelate over ``correlation`` times the shell radius."""
        return cls(k, l, RandomProfile.draw(rng, 2, correlation * 2.0 ** k, terms),
                   RandomProfile.draw(rng, 1, correlation * 2.0 ** l, terms))

    def scaled(self, a: float) -> "LocalizedPiece":
        return LocalizedPiece(self.k, self.l, self.spatial, self.temporal, self.scale * a)

    @property
    def radii(self) -> tuple[float, float]:
        return shell_support(self.k)

    @property
    def modulation_radii(self) -> tuple[float, float]:
        return modulation_support(self.l)

    def alpha(self, xi, mu) -> np.ndarray:
        return self.scale * CUTOFFS.phi(self.k, xi, mu) * self.spatial(xi, mu)

    def beta(self, w) -> np.ndarray:
        return CUTOFFS.psi(self.l, w) * self.temporal(w)

    def __call__(self, tau, xi, mu) -> np.ndarray:
        return self.alpha(xi, mu) * self.beta(tau - dispersion_symbol(xi, mu))

    @cached_property
    def alpha_norm_sq(self) -> float:
        r_in, r_out = self.radii
        nr = 16 * 8
        edges = np.linspace(r_in, r_out, nr // 8 + 1)
        gx, gw = gauss_nodes(8)
        r = (edges[:-1, None] + np.diff(edges)[:, None] * gx).ravel()
        wr = (np.diff(edges)[:, None] * gw).ravel()
        nth = 512
        th = 2 * np.pi * np.arange(nth) / nth
        vals = self.alpha(r[:, None] * np.cos(th), r[:, None] * np.sin(th)) ** 2
        return float(np.sum(vals * (r * wr)[:, None]) * 2 * np.pi / nth)

    @cached_property
    def beta_norm_sq(self) -> float:
        a, b = self.modulation_radii
        edges = np.linspace(a, b, 33)
        gx, gw = gauss_nodes(8)
        w = (edges[:-1, None] + np.diff(edges)[:, None] * gx).ravel()
        ww = (np.diff(edges)[:, None] * gw).ravel()
        return float(np.sum(ww * (self.beta(w) ** 2 + self.beta(-w) ** 2)))

    @property
    def norm(self) -> float:
        """``L^2`` norm of the piece."""
        return float(np.sqrt(self.alpha_norm_sq * self.beta_norm_sq))

    @cached_property
    def cutoff_mass(self) -> float:
        """``int phi_k d xi * int psi_l d w``, the normaliser of the sampling density."""
        r_in, r_out = self.radii
        edges = np.linspace(r_in, r_out, 33)
        gx, gw = gauss_nodes(8)
        r = (edges[:-1, None] + np.diff(edges)[:, None] * gx).ravel()
        wr = (np.diff(edges)[:, None] * gw).ravel()
        spatial = 2 * np.pi * np.sum(wr * r * CUTOFFS.phi(self.k, r, 0.0))
        a, b = self.modulation_radii
        edges = np.linspace(a, b, 33)
        w = (edges[:-1, None] + np.diff(edges)[:, None] * gx).ravel()
        ww = (np.diff(edges)[:, None] * gw).ravel()
        return float(spatial * 2 * np.sum(ww * CUTOFFS.psi(self.l, w)))

    def sample(self, rng: np.random.Generator, n: int):
        """Samples ``z = (tau, xi, mu)`` with density ``q ~ phi_k psi_l`` and weights ``f~(z)/q(z)``.

        ``E_q[F(z) w(z)] = int F f~`` for any integrand ``F``.
        """
        a, b = self.modulation_radii
        out_x = np.empty((0, 2))
        out_s = np.empty(0)
        while out_s.size < n:
            m = 2 * (n - out_s.size) + 16
            x = sample_annulus(rng, m, *self.radii)
            s = rng.uniform(a, b, m) * rng.choice([-1.0, 1.0], m)
            acc = rng.uniform(size=m) < CUTOFFS.phi(self.k, x[:, 0], x[:, 1]) * CUTOFFS.psi(self.l, s)
            out_x = np.concatenate([out_x, x[acc]])
            out_s = np.concatenate([out_s, s[acc]])
        x, s = out_x[:n], out_s[:n]
        tau = dispersion_symbol(x[:, 0], x[:, 1]) + s
        wts = self.scale * self.spatial(x[:, 0], x[:, 1]) * self.temporal(s) * self.cutoff_mass
        return tau, x[:, 0], x[:, 1], wts


@dataclass(frozen=True)
class _Profile1D:
    """Tabulated nonnegative function of the modulation variable."""

    grid: np.ndarray
    values: np.ndarray

    @property
    def half_width(self) -> float:
        return float(self.grid[-1])

    def __call__(self, w) -> np.ndarray:
        return np.interp(w, self.grid, self.values, left=0.0, right=0.0)


def _convolved_modulation(pieces, points_per_unit: float = 32.0) -> _Profile1D:
    """Tabulate ``beta_1 * beta_2 * ...`` on a uniform grid."""
    h = min(2.0 ** p.l for p in pieces) / points_per_unit
    out = None
    for p in pieces:
        b = p.modulation_radii[1]
        n = int(np.ceil(b / h))
        w = h * np.arange(-n, n + 1)
        vals = p.beta(w)
        out = vals if out is None else fftconvolve(out, vals) * h
    n = (out.size - 1) // 2
    grid = h * np.arange(-n, n + 1)
    return _Profile1D(grid, np.maximum(out, 0.0))


@dataclass(frozen=True)
class Quadrature:
    """Node counts of the pair-density quadrature.

    ``panels`` composite Gauss-Legendre panels of ``outer`` nodes cover the
    low-frequency disk in the outer coordinate; on every line the band
    ``|Phi| <= S`` is split into ``levels`` sub-bands of equal phase width,
    each integrated with ``inner`` nodes per interval.
    """

    panels: int = 12
    outer: int = 4
    levels: int = 4
    inner: int = 6


def pair_density(tau, xi, mu, hi: LocalizedPiece, lo: LocalizedPiece, cmod: _Profile1D,
                 quad: Quadrature = Quadrature(), chunk: int = 64) -> np.ndarray:
    """``H(z) = int alpha_hi(xi - xi_2) alpha_lo(xi_2) c(Phi(xi_2)) d xi_2`` at each output.

    Parameters
    ----------
    tau, xi, mu : ndarray, shape (n,)
        Output points.
    hi, lo : LocalizedPiece
        The pair; ``xi_2`` ranges over the support disk of ``lo``.
    cmod : _Profile1D
        Convolution of the modulation profiles entering the pair.
    """
    tau, xi, mu = (np.atleast_1d(np.asarray(a, dtype=float)) for a in (tau, xi, mu))
    ro = lo.radii[1]
    edges = np.linspace(-ro, ro, quad.panels + 1)
    gx, gw = gauss_nodes(quad.outer)
    v_out = (edges[:-1, None] + np.diff(edges)[:, None] * gx).ravel()
    w_out = (np.diff(edges)[:, None] * gw).ravel()
    chord = disk_chord(v_out, ro)                                   # (no, 1, 2)
    S = cmod.half_width
    lev = np.linspace(-S, S, quad.levels + 1)
    ix, iw = gauss_nodes(quad.inner)
    out = np.zeros(tau.size)
    for start in range(0, tau.size, chunk):
        sl = slice(start, min(start + chunk, tau.size))
        for axis in ("x", "y"):
            sel = np.array([_inner_axis(a, b) == axis for a, b in zip(xi[sl], mu[sl])], dtype=bool)
            if not np.any(sel):
                continue
            t, x0, y0 = tau[sl][sel], xi[sl][sel], mu[sl][sel]
            A, B, C = phase_quadratic(t[:, None, None], x0[:, None, None], y0[:, None, None],
                                      v_out[None, :, None], axis)
            band = quadratic_band(A, B, C, lev[None, None, :-1], lev[None, None, 1:], -ro, ro)
            band = band.reshape(t.size, v_out.size, -1, 2)           # (n, no, 2*levels, 2)
            iv = intersect(band, chord[None])                        # (n, no, 2*levels, 2)
            lo_e = iv[..., 0]
            ln = np.maximum(iv[..., 1] - lo_e, 0.0)
            v_in = lo_e[..., None] + ln[..., None] * ix              # (n, no, m, inner)
            A4, B4, C4 = (q[..., None] for q in (A, B, C))
            phi = (A4 * v_in + B4) * v_in + C4
            vo = v_out[None, :, None, None]
            if axis == "x":
                px, py = v_in, vo
            else:
                px, py = vo, v_in
            xs = x0[:, None, None, None]
            ys = y0[:, None, None, None]
            f = lo.alpha(px, py) * hi.alpha(xs - px, ys - py) * cmod(phi)
            inner = np.sum(f * iw * ln[..., None], axis=(-1, -2))    # (n, no)
            out[np.flatnonzero(sel) + start] = inner @ w_out
    return out


@dataclass(frozen=True)
class ProductEstimate:
    """Monte Carlo estimate of a product norm.

    Attributes
    ----------
    norm : float
        Estimated ``L^2`` norm of the product.
    norm_sq_stderr : float
        Standard error of the squared-norm estimate.
    factors : tuple of float
        ``L^2`` norms of the factors.
    """

    norm: float
    norm_sq_stderr: float
    factors: tuple = field(default_factory=tuple)


def _order_pair(f: LocalizedPiece, g: LocalizedPiece):
    return (f, g) if f.k >= g.k else (g, f)


def bilinear_product_norm(f: LocalizedPiece, g: LocalizedPiece, rng: np.random.Generator,
                          n_samples: int = 400, quad: Quadrature = Quadrature()) -> ProductEstimate:
    """``||f g||_{L^2}`` for two localized pieces."""
    hi, lo = _order_pair(f, g)
    if f.scale == 0 or g.scale == 0:
        return ProductEstimate(0.0, 0.0, (f.norm, g.norm))
    cmod = _convolved_modulation([hi, lo])
    t1, x1, y1, v1 = hi.sample(rng, n_samples)
    t2, x2, y2, v2 = lo.sample(rng, n_samples)
    H = pair_density(t1 + t2, x1 + x2, y1 + y2, hi, lo, cmod, quad)
    terms = H * v1 * v2
    est = max(float(terms.mean()), 0.0)
    se = float(terms.std(ddof=1) / np.sqrt(n_samples))
    return ProductEstimate(float(np.sqrt(est)), se, (f.norm, g.norm))


def trilinear_product_norm(pair_hi: LocalizedPiece, pair_lo: LocalizedPiece, third: LocalizedPiece,
                           rng: np.random.Generator, n_samples: int = 200, n_third: int = 16,
                           quad: Quadrature = Quadrature()) -> ProductEstimate:
    """``||f g h||_{L^2}`` with ``(pair_hi, pair_lo)`` resolved by quadrature.

    The convolution with ``third`` is integrated by stratified Monte Carlo
    over its frequency, restricted to the strip
    ``|tau - P(xi_3) - P(xi - xi_3)| <= S + M`` outside of which the inner
    pair density vanishes; ``M`` bounds the resonance of the inner pair.
    """
    factors = (pair_hi.norm, pair_lo.norm, third.norm)
    if pair_hi.scale == 0 or pair_lo.scale == 0 or third.scale == 0:
        return ProductEstimate(0.0, 0.0, factors)
    cmod = _convolved_modulation([pair_hi, pair_lo, third])
    rho = pair_lo.radii[1]
    r_pair = pair_hi.radii[1] + rho
    reach = cmod.half_width + 0.75 * r_pair ** 2 * rho + 0.75 * r_pair * rho ** 2
    r3 = third.radii[1]
    samples = [p.sample(rng, n_samples) for p in (pair_hi, pair_lo, third)]
    tau = sum(s[0] for s in samples)
    xi = sum(s[1] for s in samples)
    mu = sum(s[2] for s in samples)
    weight = np.prod([s[3] for s in samples], axis=0)
    # stratified lines through the third disk
    h = 2.0 * r3 / n_third
    T = np.zeros(n_samples)
    for i in range(n_samples):
        axis = _inner_axis(xi[i], mu[i])
        v_out = -r3 + h * (np.arange(n_third) + rng.uniform(size=n_third))
        A, B, C = phase_quadratic(tau[i], xi[i], mu[i], v_out, axis)
        band = quadratic_band(A, B, C, -reach, reach, -r3, r3)
        iv = intersect(band, disk_chord(v_out, r3))                   # (n3, 2, 2)
        lens = np.maximum(iv[..., 1] - iv[..., 0], 0.0)
        L = lens.sum(axis=-1)
        u = rng.uniform(size=n_third) * L
        first = u <= lens[:, 0]
        v_in = np.where(first, iv[:, 0, 0] + u, iv[:, 1, 0] + (u - lens[:, 0]))
        x3, y3 = (v_in, v_out) if axis == "x" else (v_out, v_in)
        live = L > 0
        if not np.any(live):
            continue
        x3, y3, L = x3[live], y3[live], L[live]
        a3 = third.alpha(x3, y3)
        Hs = pair_density(tau[i] - dispersion_symbol(x3, y3), xi[i] - x3, mu[i] - y3,
                          pair_hi, pair_lo, cmod, quad)
        T[i] = h * np.sum(L * a3 * Hs)
    terms = T * weight
    est = max(float(terms.mean()), 0.0)
    se = float(terms.std(ddof=1) / np.sqrt(n_samples))
    return ProductEstimate(float(np.sqrt(est)), se, factors)
