"""Resonance function, its gradient, and exact level-band geometry.

For a frequency pair ``xi_1 + xi_2 = xi`` (planar vectors ``(xi, mu)``) the
resonance function is implemented through its polynomial expansion

    R = 3/4 xi_1 xi (xi - xi_1) - 3/4 xi_1 (mu - mu_1)^2
        - 3/4 (xi - xi_1) mu_1^2 - 3/2 xi mu_1 (mu - mu_1),

which equals ``P(xi) - P(xi_1) - P(xi_2)``.  The same identity shows that for
a fixed output ``(tau, xi)`` the phase

    Phi(xi_2) = tau - P(xi - xi_2) - P(xi_2)
              = tau - P(xi) + grad P(xi) . xi_2 - 1/2 xi_2^T Hess P(xi) xi_2

is an exact quadratic in ``xi_2`` (the cubic terms cancel).  Fixing one
coordinate of ``xi_2`` leaves a one-variable quadratic whose level bands
``{|Phi| <= S}`` are found in closed form.  Everything in this module that
measures sets or integrates over resonant strips builds on that fact.

Interval sets are stored as arrays of shape ``(..., n, 2)`` holding
``[lo, hi]`` pairs; a pair with ``hi <= lo`` is empty.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .operators import dispersion_gradient, dispersion_symbol

__all__ = [
    "resonance",
    "resonance_grad",
    "phase_quadratic",
    "quadratic_band",
    "disk_chord",
    "annulus_chord",
    "intersect",
    "interval_lengths",
    "gauss_nodes",
    "DyadicSets",
    "sample_annulus",
    "sample_sector_annulus",
    "PairVolumes",
    "pair_set_volumes",
    "sample_admissible_output",
    "sample_regime",
]


def resonance(xi, xi1, mu, mu1):
    """Displayed expansion of the resonance function ``R(xi_1, xi - xi_1, mu_1, mu - mu_1)``."""
    xi, xi1, mu, mu1 = (np.asarray(a, dtype=float) for a in (xi, xi1, mu, mu1))
    xi2 = xi - xi1
    mu2 = mu - mu1
    return (0.75 * xi1 * xi * xi2 - 0.75 * xi1 * mu2 ** 2 - 0.75 * xi2 * mu1 ** 2
            - 1.5 * xi * mu1 * mu2)


def resonance_grad(xi, xi1, mu, mu1):
    """Partial derivatives ``(dR/dxi_1, dR/dmu_1)`` at fixed output ``(xi, mu)``.

    ``dR/dxi_1 = -3/4 (xi_1^2 - mu_1^2) + 3/4 (xi_2^2 - mu_2^2)`` and
    ``dR/dmu_1 = 3/2 (xi_1 mu_1 - xi_2 mu_2)`` with ``xi_2 = xi - xi_1``,
    ``mu_2 = mu - mu_1``.
    """
    xi, xi1, mu, mu1 = (np.asarray(a, dtype=float) for a in (xi, xi1, mu, mu1))
    xi2 = xi - xi1
    mu2 = mu - mu1
    d_xi = -0.75 * (xi1 ** 2 - mu1 ** 2) + 0.75 * (xi2 ** 2 - mu2 ** 2)
    d_mu = 1.5 * (xi1 * mu1 - xi2 * mu2)
    return d_xi, d_mu


# ---------------------------------------------------------------------------
# exact quadratic structure of the pair phase
# ---------------------------------------------------------------------------

def phase_quadratic(tau, xi, mu, outer, inner_axis: str = "x"):
    """Coefficients ``(A, B, C)`` of ``Phi`` as a quadratic in one coordinate.

    Parameters
    ----------
    tau, xi, mu : array_like
        Output point.
    outer : array_like
        Value of the fixed coordinate of ``xi_2`` (``mu_2`` when
        ``inner_axis == "x"``, ``xi_2`` otherwise).
    inner_axis : {"x", "y"}
        Which coordinate of ``xi_2`` is free.

    Returns
    -------
    A, B, C : ndarray
        ``Phi = A v^2 + B v + C`` with ``v`` the free coordinate.
    """
    tau, xi, mu, outer = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in (tau, xi, mu, outer)))
    p = dispersion_symbol(xi, mu)
    px, pm = dispersion_gradient(xi, mu)
    if inner_axis == "x":
        y = outer
        A = -0.75 * xi
        B = px + 1.5 * mu * y
        C = tau - p + pm * y + 0.75 * xi * y ** 2
    elif inner_axis == "y":
        x = outer
        A = 0.75 * xi
        B = pm + 1.5 * mu * x
        C = tau - p + px * x - 0.75 * xi * x ** 2
    else:
        raise ValueError("inner_axis must be 'x' or 'y'")
    return A, B, C


def _eval_q(A, B, C, v):
    return (A * v + B) * v + C


def _solve_on_branch(A, B, C, v, p, q):
    """Root of ``A x^2 + B x + C = v`` lying in ``[p, q]`` (monotone branch)."""
    c = C - v
    lin = A == 0
    with np.errstate(divide="ignore", invalid="ignore"):
        disc = np.maximum(B * B - 4 * A * c, 0.0)
        sq = np.sqrt(disc)
        sgn = np.where(B >= 0, 1.0, -1.0)
        qq = -0.5 * (B + sgn * sq)
        r1 = np.where(qq != 0, qq / np.where(A != 0, A, 1.0), 0.0)
        r1 = np.where(A != 0, r1, np.inf)
        r2 = np.where(qq != 0, c / np.where(qq != 0, qq, 1.0), -B / np.where(A != 0, 2 * A, 1.0))
        rl = np.where(B != 0, -c / np.where(B != 0, B, 1.0), p)
    d1 = np.maximum(p - r1, 0) + np.maximum(r1 - q, 0)
    d2 = np.maximum(p - r2, 0) + np.maximum(r2 - q, 0)
    r = np.where(np.nan_to_num(d1, nan=np.inf) <= np.nan_to_num(d2, nan=np.inf), r1, r2)
    r = np.where(lin, rl, r)
    return np.clip(r, p, q)


def quadratic_band(A, B, C, vlo, vhi, a, b):
    """Intervals of ``[a, b]`` on which ``vlo <= A x^2 + B x + C <= vhi``.

    Returns an array of shape ``broadcast + (2, 2)``: at most one interval
    on each side of the vertex.
    """
    A, B, C, vlo, vhi, a, b = np.broadcast_arrays(*(np.asarray(z, dtype=float)
                                                     for z in (A, B, C, vlo, vhi, a, b)))
    with np.errstate(divide="ignore", invalid="ignore"):
        xv = np.where(A != 0, -B / np.where(A != 0, 2 * A, 1.0), b)
    xv = np.clip(np.nan_to_num(xv, nan=b, posinf=b, neginf=a), a, b)
    out = np.empty(A.shape + (2, 2))
    for i, (p, q) in enumerate(((a, xv), (xv, b))):
        fp = _eval_q(A, B, C, p)
        fq = _eval_q(A, B, C, q)
        fmin = np.minimum(fp, fq)
        fmax = np.maximum(fp, fq)
        lo_v = np.maximum(vlo, fmin)
        hi_v = np.minimum(vhi, fmax)
        ok = (lo_v <= hi_v) & (q > p)
        at_min = np.where(fp <= fq, p, q)
        at_max = np.where(fp <= fq, q, p)
        x_lo = np.where(lo_v <= fmin, at_min, _solve_on_branch(A, B, C, lo_v, p, q))
        x_hi = np.where(hi_v >= fmax, at_max, _solve_on_branch(A, B, C, hi_v, p, q))
        lo = np.minimum(x_lo, x_hi)
        hi = np.maximum(x_lo, x_hi)
        out[..., i, 0] = np.where(ok, lo, 0.0)
        out[..., i, 1] = np.where(ok, hi, 0.0)
    return out


def disk_chord(y, radius, cx=0.0, cy=0.0):
    """Chord ``{x : |(x - cx, y - cy)| <= radius}`` as an ``(..., 1, 2)`` interval set."""
    y, radius, cx, cy = np.broadcast_arrays(*(np.asarray(z, dtype=float) for z in (y, radius, cx, cy)))
    h2 = radius ** 2 - (y - cy) ** 2
    h = np.sqrt(np.maximum(h2, 0.0))
    out = np.empty(y.shape + (1, 2))
    out[..., 0, 0] = np.where(h2 > 0, cx - h, 0.0)
    out[..., 0, 1] = np.where(h2 > 0, cx + h, 0.0)
    return out


def annulus_chord(y, r_in, r_out, cx=0.0, cy=0.0):
    """Chord of an annulus at height ``y``: up to two intervals ``(..., 2, 2)``."""
    y, r_in, r_out, cx, cy = np.broadcast_arrays(*(np.asarray(z, dtype=float)
                                                   for z in (y, r_in, r_out, cx, cy)))
    dy2 = (y - cy) ** 2
    ho2 = r_out ** 2 - dy2
    ho = np.sqrt(np.maximum(ho2, 0.0))
    hi_ = np.sqrt(np.maximum(r_in ** 2 - dy2, 0.0))
    ok = ho2 > 0
    out = np.empty(y.shape + (2, 2))
    out[..., 0, 0] = np.where(ok, cx - ho, 0.0)
    out[..., 0, 1] = np.where(ok, cx - hi_, 0.0)
    out[..., 1, 0] = np.where(ok, cx + hi_, 0.0)
    out[..., 1, 1] = np.where(ok, cx + ho, 0.0)
    return out


def intersect(I: np.ndarray, J: np.ndarray) -> np.ndarray:
    """Pairwise intersections of two interval sets ``(..., a, 2)``, ``(..., b, 2)``."""
    lo = np.maximum(I[..., :, None, 0], J[..., None, :, 0])
    hi = np.minimum(I[..., :, None, 1], J[..., None, :, 1])
    shape = lo.shape[:-2] + (lo.shape[-2] * lo.shape[-1],)
    return np.stack([lo.reshape(shape), hi.reshape(shape)], axis=-1)


def interval_lengths(I: np.ndarray) -> np.ndarray:
    """Total length of each interval set (last two axes consumed)."""
    return np.sum(np.maximum(I[..., 1] - I[..., 0], 0.0), axis=-1)


_GL_CACHE: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def gauss_nodes(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights on ``[0, 1]``."""
    if n not in _GL_CACHE:
        x, w = np.polynomial.legendre.leggauss(n)
        _GL_CACHE[n] = (0.5 * (x + 1.0), 0.5 * w)
    return _GL_CACHE[n]


# ---------------------------------------------------------------------------
# dyadic sets
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DyadicSets:
    """Meaning of ``|v| ~ 2^k`` used when sampling or measuring sets.

    ``"core"`` reads ``|v| ~ 2^k`` as ``2^{k-1/2} <= |v| <= 2^{k+1/2}``
    (``|v| <= 2^{1/2}`` for ``k = 0``), which tiles the plane by disjoint
    dyadic annuli.  ``"support"`` uses the full support of the smooth
    cutoff, ``2^{k-1} <= |v| <= 2^{k+1}`` (``|v| <= 2`` for ``k = 0``).
    """

    convention: str = "core"

    def radii(self, k: int) -> tuple[float, float]:
        if self.convention == "core":
            return (0.0, 2 ** 0.5) if k == 0 else (2.0 ** (k - 0.5), 2.0 ** (k + 0.5))
        if self.convention == "support":
            return (0.0, 2.0) if k == 0 else (2.0 ** (k - 1), 2.0 ** (k + 1))
        raise ValueError(f"unknown convention {self.convention!r}")


def sample_annulus(rng: np.random.Generator, n: int, r_in: float, r_out: float) -> np.ndarray:
    """Uniform samples (area measure) from an annulus, shape ``(n, 2)``."""
    r = np.sqrt(rng.uniform(r_in ** 2, r_out ** 2, n))
    th = rng.uniform(0, 2 * np.pi, n)
    return np.stack([r * np.cos(th), r * np.sin(th)], axis=-1)


def sample_sector_annulus(rng: np.random.Generator, n: int, r_in: float, r_out: float,
                          tan_lo: float, tan_hi: float, axis: str = "x") -> np.ndarray:
    """Uniform samples from the part of an annulus with ``tan_lo <= |v_other|/|v_axis| <= tan_hi``.

    All four symmetric sectors are used.
    """
    r = np.sqrt(rng.uniform(r_in ** 2, r_out ** 2, n))
    th = rng.uniform(np.arctan(tan_lo), np.arctan(tan_hi), n)
    a = r * np.cos(th) * rng.choice([-1.0, 1.0], n)
    b = r * np.sin(th) * rng.choice([-1.0, 1.0], n)
    return np.stack([a, b], axis=-1) if axis == "x" else np.stack([b, a], axis=-1)


# ---------------------------------------------------------------------------
# volumes of the bilinear interaction sets
# ---------------------------------------------------------------------------

def _pair_overlap(phi: np.ndarray, mf: tuple[float, float], mg: tuple[float, float]) -> np.ndarray:
    """Length of ``{s : |s| in mf, |phi - s| in mg}`` for modulation annuli ``mf``, ``mg``."""
    af, bf = mf
    ag, bg = mg
    tot = np.zeros_like(phi)
    for lo_f, hi_f in ((-bf, -af), (af, bf)):
        for lo_g, hi_g in ((-bg, -ag), (ag, bg)):
            lo = np.maximum(lo_f, phi - hi_g)
            hi = np.minimum(hi_f, phi - lo_g)
            tot = tot + np.maximum(hi - lo, 0.0)
    return tot


def _inner_axis(xi: float, mu: float) -> str:
    px, pm = dispersion_gradient(xi, mu)
    return "x" if abs(px) >= abs(pm) else "y"


@dataclass(frozen=True)
class PairVolumes:
    """Volumes of the interaction sets at one output point.

    ``a_volume`` is the measure of pairs ``(tau_1, xi_1)`` with both
    frequencies and both modulations in their dyadic sets;
    ``b_volume`` is the area of frequencies ``xi_1`` in their dyadic sets
    with ``|tau - P(xi_1) - P(xi - xi_1)| <= width``.
    """

    tau: float
    xi: float
    mu: float
    a_volume: float
    b_volume: float
    a_stderr: float
    b_stderr: float


def pair_set_volumes(tau: float, xi: float, mu: float, k_f: int, k_g: int, l_f: int, l_g: int,
                     rng: np.random.Generator, n_strata: int = 2 ** 16,
                     sets: DyadicSets = DyadicSets(), width: float | None = None,
                     chunk: int = 8192) -> PairVolumes:
    """Stratified Monte Carlo volumes of the A and B sets at ``(tau, xi, mu)``.

    The low-frequency variable ``xi_2 = xi - xi_1`` is integrated by
    stratified sampling of one coordinate; the other coordinate is integrated
    exactly on every stratum (interval lengths for B, a piecewise-quadratic
    integrand handled by 3-point Gauss-Legendre for A).

    Parameters
    ----------
    width : float, optional
        Half-width of the B band; defaults to ``max(2^l_f, 2^l_g)``.
    """
    if n_strata < 2:
        raise ValueError("need at least two strata")
    ri_f, ro_f = sets.radii(k_f)
    ri_g, ro_g = sets.radii(k_g)
    mf = sets.radii(l_f)
    mg = sets.radii(l_g)
    W = float(max(2.0 ** l_f, 2.0 ** l_g)) if width is None else float(width)
    axis = _inner_axis(xi, mu)
    centre_in, centre_out = (xi, mu) if axis == "x" else (mu, xi)
    corners = sorted({sf + sg for sf in (-mf[1], -mf[0], mf[0], mf[1])
                      for sg in (-mg[1], -mg[0], mg[0], mg[1])})
    v = np.array(corners)
    gx, gw = gauss_nodes(3)
    h = 2.0 * ro_g / n_strata
    a_vals = np.empty(n_strata)
    b_vals = np.empty(n_strata)
    for start in range(0, n_strata, chunk):
        idx = np.arange(start, min(start + chunk, n_strata))
        y = -ro_g + h * (idx + rng.uniform(size=idx.size))
        A, B, C = phase_quadratic(tau, xi, mu, y, axis)
        g_ch = annulus_chord(y, ri_g, ro_g)
        f_ch = annulus_chord(y, ri_f, ro_f, cx=centre_in, cy=centre_out)
        dom = intersect(g_ch, f_ch)                                    # (n, 4, 2)
        band = quadratic_band(A, B, C, -W, W, -ro_g, ro_g)             # (n, 2, 2)
        b_vals[idx] = interval_lengths(intersect(band, dom))
        bands = quadratic_band(A[:, None], B[:, None], C[:, None], v[None, :-1], v[None, 1:],
                               -ro_g, ro_g)                            # (n, nb, 2, 2)
        pieces = intersect(bands.reshape(idx.size, -1, 2), dom)        # (n, nb*2*4, 2)
        lo = pieces[..., 0]
        ln = np.maximum(pieces[..., 1] - lo, 0.0)
        xs = lo[..., None] + ln[..., None] * gx
        phi = (A[:, None, None] * xs + B[:, None, None]) * xs + C[:, None, None]
        a_vals[idx] = np.sum(ln[..., None] * gw * _pair_overlap(phi, mf, mg), axis=(-1, -2))
    def _est(vals):
        tot = h * vals.sum()
        m = n_strata // 2
        d = vals[0:2 * m:2] - vals[1:2 * m:2]
        se = h * np.sqrt(0.5 * np.sum(d ** 2))
        return float(tot), float(se)
    a, a_se = _est(a_vals)
    b, b_se = _est(b_vals)
    return PairVolumes(float(tau), float(xi), float(mu), a, b, a_se, b_se)


def sample_admissible_output(rng: np.random.Generator, k_f: int, k_g: int, l_f: int, l_g: int,
                             sets: DyadicSets = DyadicSets()) -> tuple[float, float, float]:
    """An output ``(tau, xi, mu)`` reached by an admissible interacting pair."""
    ri_f, ro_f = sets.radii(k_f)
    ri_g, ro_g = sets.radii(k_g)
    x1 = sample_annulus(rng, 1, ri_f, ro_f)[0]
    x2 = sample_annulus(rng, 1, ri_g, ro_g)[0]
    mf = sets.radii(l_f)
    mg = sets.radii(l_g)
    s1 = rng.uniform(*mf) * rng.choice([-1.0, 1.0])
    s2 = rng.uniform(*mg) * rng.choice([-1.0, 1.0])
    xi, mu = x1 + x2
    tau = dispersion_symbol(*x1) + dispersion_symbol(*x2) + s1 + s2
    return float(tau), float(xi), float(mu)


# ---------------------------------------------------------------------------
# regime samplers for the derivative lower bounds
# ---------------------------------------------------------------------------

def sample_regime(rng: np.random.Generator, n: int, k_f: int, k_g_max: int | None = None,
                  regime: str = "xi-dominant", sets: DyadicSets = DyadicSets()):
    """Frequency pairs for the lower bounds on the resonance derivatives.

    Parameters
    ----------
    regime : {"xi-dominant", "mu-dominant", "comparable"}
        ``|xi_1| >= 8 |mu_1|``, ``|mu_1| >= 8 |xi_1|`` or
        ``1/2 <= |xi_1| / |mu_1| <= 2``.
    k_g_max : int, optional
        Largest low-frequency index (default ``k_f - 2``); each sample draws
        ``k_g`` uniformly from ``0..k_g_max``.

    Returns
    -------
    xi, xi1, mu, mu1 : ndarray
        Output frequency and high-frequency component for each sample.
    """
    if k_g_max is None:
        k_g_max = k_f - 2
    if k_g_max < 0 or k_g_max > k_f - 2:
        raise ValueError("need 0 <= k_g <= k_f - 2")
    ri_f, ro_f = sets.radii(k_f)
    if regime == "xi-dominant":
        hi = sample_sector_annulus(rng, n, ri_f, ro_f, 0.0, 1.0 / 8.0, axis="x")
    elif regime == "mu-dominant":
        hi = sample_sector_annulus(rng, n, ri_f, ro_f, 0.0, 1.0 / 8.0, axis="y")
    elif regime == "comparable":
        hi = sample_sector_annulus(rng, n, ri_f, ro_f, 0.5, 2.0, axis="x")
    else:
        raise ValueError(f"unknown regime {regime!r}")
    kg = rng.integers(0, k_g_max + 1, n)
    lo = np.empty_like(hi)
    for k in np.unique(kg):
        sel = kg == k
        lo[sel] = sample_annulus(rng, int(sel.sum()), *sets.radii(int(k)))
    xi = hi[:, 0] + lo[:, 0]
    mu = hi[:, 1] + lo[:, 1]
    return xi, hi[:, 0], mu, hi[:, 1]
