"""Numerical checks of the linear, bilinear and trilinear estimates.

Every check returns an :class:`EstimateReport` holding one row per trial,
summary statistics and a verdict.  Because the estimates hide their
constants, verdicts are based on growth rates: a fitted log-slope of the
ratio ``LHS / RHS`` against the swept dyadic parameter, or the stability of
the largest ratio under refinement and rescaling.

Conventions
-----------
* Linear-flow checks run on large periodic boxes with data localized in
  space, so the flow disperses without wrapping around during the time
  window.  ``L^p_t`` norms are truncated to ``[0, t_max]`` and integrated by
  the trapezoid rule.
* Dyadic product checks (:func:`bilinear_test`, :func:`trilinear_test`) use
  the frequency-side engine of :mod:`nvlab.multilinear` on ``R x R^2``.
* ``X^{s,b}`` checks use random space-time fields on a periodic space-time
  lattice whose time sampling is fine enough that the products are free of
  temporal aliasing.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.fft as sfft

from .littlewood_paley import CUTOFFS, NormSpec, ring, shell_support, window_in_time, xsb_norm
from .multilinear import LocalizedPiece, bilinear_product_norm, trilinear_product_norm
from .operators import (_Ops, dispersion_symbol, mnl1_trilinear_coeffs, nl1_bilinear_coeffs)
from .resonance import DyadicSets, pair_set_volumes, sample_admissible_output
from .spectral import (GridSpec, SpaceTimeField, SpaceTimeGridSpec, SpectralField, fft_workers,
                       lp_norm, sobolev_norm)
from .timestepper import Trajectory

__all__ = [
    "TrialRecord",
    "EstimateReport",
    "log2_slope",
    "shell_datum",
    "linear_samples",
    "strichartz_ratio",
    "dispersive_decay_test",
    "strichartz_test",
    "ckz_l4_test",
    "bilinear_test",
    "trilinear_test",
    "lattice_product_norm",
    "random_spacetime_field",
    "xsb_bilinear_test",
    "xsb_trilinear_test",
    "l6_shell_sweep",
    "measure_bound_check",
]


# ---------------------------------------------------------------------------
# reports
# ---------------------------------------------------------------------------

@dataclass
class TrialRecord:
    """One trial: swept parameter value, both sides and their ratio.

    A skipped trial (right-hand side zero) has ``ratio = nan``.
    """

    parameter: float
    trial: int
    lhs: float
    rhs: float
    ratio: float
    skipped: bool = False
    extra: dict = field(default_factory=dict)

    @classmethod
    def make(cls, parameter: float, trial: int, lhs: float, rhs: float, **extra) -> "TrialRecord":
        if rhs == 0:
            return cls(float(parameter), trial, float(lhs), 0.0, float("nan"), True, extra)
        return cls(float(parameter), trial, float(lhs), float(rhs), float(lhs / rhs), False, extra)


@dataclass
class EstimateReport:
    """Result of one estimate check.

    Attributes
    ----------
    estimate : str
        Identifier of the check.
    parameters : dict
        Inputs, including the seed.
    trials : list of TrialRecord
        One row per trial.
    summary : dict
        Derived statistics (max and median ratio, fitted slopes, ...).
    verdict : bool
        Whether the pass rule of the check holds.
    """

    estimate: str
    parameters: dict
    trials: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)
    verdict: bool = False

    def ratios(self, parameter: Optional[float] = None) -> np.ndarray:
        rows = [t for t in self.trials if not t.skipped
                and (parameter is None or t.parameter == parameter)]
        return np.array([t.ratio for t in rows])

    def sweep_values(self) -> list:
        return sorted({t.parameter for t in self.trials if not t.skipped})

    def per_point(self, stat=np.max) -> tuple[np.ndarray, np.ndarray]:
        xs = np.array(self.sweep_values(), dtype=float)
        ys = np.array([stat(self.ratios(x)) for x in xs])
        return xs, ys

    def as_dict(self) -> dict:
        return {"estimate": self.estimate, "parameters": self.parameters,
                "trials": [asdict(t) for t in self.trials], "summary": self.summary,
                "verdict": self.verdict}


def log2_slope(x: Sequence[float], y: Sequence[float]) -> float:
    """Least-squares slope of ``log2 y`` against ``x``.

    Raises
    ------
    ValueError
        With fewer than two points or nonpositive ``y``.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size < 2 or x.size != y.size:
        raise ValueError("need at least two matching points")
    if np.any(y <= 0) or not np.all(np.isfinite(y)):
        raise ValueError("slope needs positive finite values")
    return float(np.polyfit(x, np.log2(y), 1)[0])


def _sweep_summary(report: EstimateReport, tolerance: float = 0.1) -> None:
    xs, mx = report.per_point(np.max)
    _, md = report.per_point(np.median)
    report.summary.update({
        "sweep": xs.tolist(), "max_ratio": mx.tolist(), "median_ratio": md.tolist(),
        "slope_max": log2_slope(xs, mx), "slope_median": log2_slope(xs, md),
        "slope_tolerance": tolerance,
    })
    report.verdict = bool(report.summary["slope_max"] <= tolerance)


# ---------------------------------------------------------------------------
# linear flow helpers
# ---------------------------------------------------------------------------

def shell_datum(grid: GridSpec, k: int, rng: Optional[np.random.Generator] = None,
                scale: float = 1.0, spread: float = 4.0, terms: int = 4) -> SpectralField:
    """Datum with Fourier transform on the annulus ``2^{k-1} <= |xi| <= 2^{k+1}``.

    Without ``rng`` the datum is the radial bump ``ring(|xi| / 2^k)``.  With
    ``rng`` it is a sum of ``terms`` translated, phase-rotated copies of the
    bump with centres of spread ``scale * spread``.  ``scale`` rescales the
    datum in space, ``phi(x) -> phi(x / scale)``, which moves the annulus to
    ``|xi| ~ 2^k / scale``.
    """
    xi, mu = grid.wavenumbers()
    xs, ms = scale * xi, scale * mu
    shape = ring(np.hypot(xs, ms) / 2.0 ** k)
    if rng is None:
        profile = np.ones_like(shape)
    else:
        centres = rng.normal(size=(terms, 2)) * spread
        amps = (rng.normal(size=terms) + 1j * rng.normal(size=terms)) / np.sqrt(2 * terms)
        profile = sum(a * np.exp(-1j * (c[0] * xs + c[1] * ms)) for c, a in zip(centres, amps))
    c = scale ** 2 * shape * profile / grid.area
    c = np.broadcast_to(c, grid.shape).astype(complex)
    c[grid.nyquist_mask()] = 0.0
    if 2.0 ** (k + 1) / scale > grid.band_edge():
        raise ValueError("shell reaches beyond the dealiased band edge")
    return SpectralField(grid, c, False)


def linear_samples(phi: SpectralField, times: np.ndarray, weight: Optional[np.ndarray] = None):
    """Yield physical samples of ``weight(D) e^{itP} phi`` at each time."""
    xi, mu = phi.grid.wavenumbers()
    p = dispersion_symbol(xi, mu)
    base = phi.coeffs if weight is None else phi.coeffs * weight
    n = phi.grid.nx * phi.grid.ny
    for t in times:
        yield sfft.ifft2(base * np.exp(1j * t * p), workers=fft_workers()) * n


def _mixed_norm(phi: SpectralField, p: float, q: float, times: np.ndarray,
                weight: Optional[np.ndarray] = None) -> float:
    vals = np.array([lp_norm(u, phi.grid, q) for u in linear_samples(phi, times, weight)])
    return float(np.trapezoid(vals ** p, times) ** (1.0 / p))


def _check_admissible(p: float, q: float, gamma: float) -> None:
    if not (p > 3 and np.isfinite(q) and q >= 2 and gamma >= 0):
        raise ValueError(f"inadmissible exponents (p, q, gamma) = ({p}, {q}, {gamma})")
    if abs(3.0 / p + 2.0 / q - (1.0 - gamma)) > 1e-12:
        raise ValueError(f"3/p + 2/q = {3 / p + 2 / q:.6g} differs from 1 - gamma = {1 - gamma:.6g}")


def strichartz_ratio(phi: SpectralField, p: float, q: float, gamma: float, t_max: float,
                     n_times: int) -> tuple[float, float]:
    """``(||e^{itP} phi||_{L^p_t([0, t_max]) L^q_x}, ||phi||_{dot H^gamma})``."""
    _check_admissible(p, q, gamma)
    times = np.linspace(0.0, t_max, n_times)
    rhs = sobolev_norm(phi, gamma, homogeneous=True) if gamma != 0 else phi.l2_norm()
    if rhs == 0:
        return 0.0, 0.0
    return _mixed_norm(phi, p, q, times), rhs


# ---------------------------------------------------------------------------
# dispersive decay
# ---------------------------------------------------------------------------

def _sup_decay(k: int, t_list: np.ndarray, box_factor: float, nx: int) -> tuple[np.ndarray, float]:
    """Sup norms of ``e^{itP}`` applied to the radial bump ``ring(|xi| / 2^k)``.

    The bump is real and even and ``P`` is odd, so the flow stays real: a
    real transform in single precision keeps large boxes affordable.  The
    phase ``t P`` is reduced modulo ``2 pi`` in double precision first.
    """
    grid = GridSpec(nx, nx, 2 * np.pi * box_factor, 2 * np.pi * box_factor)
    if 2.0 ** (k + 1) > grid.band_edge():
        raise ValueError("shell reaches beyond the dealiased band edge")
    kx = 2 * np.pi * sfft.fftfreq(nx, grid.dx)[:, None]
    ky = 2 * np.pi * sfft.rfftfreq(nx, grid.dy)[None, :]
    c = ring(np.hypot(kx, ky) / 2.0 ** k) / grid.area
    p = dispersion_symbol(kx, ky)
    n = nx * nx
    u0 = sfft.irfft2(c.astype(np.complex64), s=grid.shape, workers=fft_workers()) * n
    l1 = float(np.sum(np.abs(u0), dtype=float) * grid.dx * grid.dy)
    sups = []
    for t in t_list:
        phase = np.mod(t * p, 2 * np.pi).astype(np.float32)
        u = sfft.irfft2(c.astype(np.float32) * np.exp(1j * phase), s=grid.shape,
                        workers=fft_workers()) * n
        sups.append(float(np.max(np.abs(u))))
    return np.array(sups), l1


def dispersive_decay_test(k: int = 1, t_list: Sequence[float] = tuple(2.0 ** np.arange(7)),
                          box_factor: float = 256, nx: int = 4096, check_box: bool = True,
                          tolerance: float = 0.15) -> EstimateReport:
    """Decay of ``sup |e^{itP} phi|`` for the shell bump ``ring(|xi| / 2^k)``.

    The fitted slope of ``log sup`` against ``log t`` should be ``-1``.  With
    ``check_box`` the fit is repeated on a box twice as large (same
    resolution) and the slopes must agree within 0.05.  Since ``P`` is
    homogeneous of degree 3, shell ``k`` on ``[1, 64]`` is shell 0 on
    ``[8^k, 64 8^k]``; the shell-0 bump is still pre-asymptotic at ``t = 1``.

    Raises
    ------
    ValueError
        If ``t_list`` is not increasing with entries ``>= 1``, or the shell
        leaves the band.
    """
    t = np.asarray(t_list, dtype=float)
    if t.size < 4 or np.any(t < 1) or np.any(np.diff(t) <= 0):
        raise ValueError("t_list needs >= 4 increasing times, all >= 1")
    sups, l1 = _sup_decay(k, t, box_factor, nx)
    rep = EstimateReport("dispersive_decay", {"k": k, "t_list": t.tolist(), "box_factor": box_factor,
                                               "nx": nx})
    for i, (ti, s) in enumerate(zip(t, sups)):
        rep.trials.append(TrialRecord.make(ti, i, s, l1 / np.sqrt(1 + ti ** 2)))
    slope = float(np.polyfit(np.log(t), np.log(sups), 1)[0])
    rep.summary = {"slope": slope, "l1_norm": l1, "tolerance": tolerance}
    ok = abs(slope + 1.0) <= tolerance
    if check_box:
        sups2, _ = _sup_decay(k, t, 2 * box_factor, 2 * nx)
        slope2 = float(np.polyfit(np.log(t), np.log(sups2), 1)[0])
        rep.summary.update({"slope_double_box": slope2, "box_change": abs(slope2 - slope)})
        ok = ok and abs(slope2 - slope) < 0.05
    rep.verdict = bool(ok)
    return rep


# ---------------------------------------------------------------------------
# Strichartz family
# ---------------------------------------------------------------------------

def strichartz_test(p: float, q: float, gamma: float = 0.0, trials: int = 4,
                    lambdas: Sequence[float] = (1, 2, 4), t_max: float = 64.0, n_times: int = 257,
                    box: float = 512.0, nx: int = 512, seed: int = 0, refine: bool = True,
                    zero_data: bool = False) -> EstimateReport:
    """Scale-invariance witness for ``||e^{itP} phi||_{L^p_t L^q_x} <~ ||phi||_{dot H^gamma}``.

    Each trial draws a localized datum on the shell ``1/2 <= |xi| <= 2`` and
    evaluates the ratio for the rescalings ``phi(x / lambda)``.  The verdict
    needs ``max / min`` of the ratio across ``lambda`` to stay within 3 for
    every trial, and (with ``refine``) the ratio of the first trial to grow
    by less than 10% when the grid spacing and time step are halved.

    Raises
    ------
    ValueError
        For an inadmissible triple.
    """
    _check_admissible(p, q, gamma)
    rng = np.random.default_rng(seed)
    grid = GridSpec(nx, nx, box, box)
    rep = EstimateReport("strichartz", {"p": p, "q": q, "gamma": gamma, "trials": trials,
                                         "lambdas": list(lambdas), "t_max": t_max,
                                         "n_times": n_times, "box": box, "nx": nx, "seed": seed})
    spreads = []
    for tr in range(trials):
        state = rng.bit_generator.state
        vals = []
        for lam in lambdas:
            rng.bit_generator.state = state
            phi = shell_datum(grid, 0, rng, scale=float(lam))
            if zero_data:
                phi = phi * 0.0
            lhs, rhs = strichartz_ratio(phi, p, q, gamma, t_max, n_times)
            rec = TrialRecord.make(lam, tr, lhs, rhs)
            rep.trials.append(rec)
            vals.append(rec.ratio)
        vals = np.array(vals)
        if np.all(np.isfinite(vals)):
            spreads.append(float(vals.max() / vals.min()))
    rep.summary = {"lambda_spread": spreads, "max_lambda_spread": max(spreads) if spreads else None}
    ok = bool(spreads) and max(spreads) <= 3.0
    if refine and spreads:
        rng2 = np.random.default_rng(seed)
        fine = grid.refined(2)
        phi_c = shell_datum(grid, 0, rng2, scale=float(lambdas[0]))
        rng2 = np.random.default_rng(seed)
        phi_f = shell_datum(fine, 0, rng2, scale=float(lambdas[0]))
        a = np.divide(*strichartz_ratio(phi_c, p, q, gamma, t_max, n_times))
        b = np.divide(*strichartz_ratio(phi_f, p, q, gamma, t_max, 2 * n_times - 1))
        rep.summary.update({"refine_ratio_coarse": float(a), "refine_ratio_fine": float(b)})
        ok = ok and b <= 1.1 * a
    rep.verdict = bool(ok)
    return rep


# ---------------------------------------------------------------------------
# CKZ L^4
# ---------------------------------------------------------------------------

def _ckz_ratio(phi: SpectralField, t_max: float, n_times: int) -> float:
    if phi.l2_norm() == 0:
        return float("nan")
    xi, mu = phi.grid.wavenumbers()
    w = np.hypot(xi, mu) ** 0.25
    return _mixed_norm(phi, 4.0, 4.0, np.linspace(0.0, t_max, n_times), w) / phi.l2_norm()


def _transfer_ratio(rng: np.random.Generator, b: float) -> float:
    """``||D|^{1/4} u||_{L^4} / ||u||_{X^{0,b}}`` for a windowed linear flow ``u``."""
    grid = GridSpec(64, 64, 2 * np.pi * 8, 2 * np.pi * 8)
    st = SpaceTimeGridSpec(grid, 64, 16.0)
    phi = shell_datum(grid, 0, rng, spread=2.0)
    times = st.times()
    p = dispersion_symbol(*grid.wavenumbers())
    traj = Trajectory(grid, times, phi.coeffs[None] * np.exp(1j * times[:, None, None] * p[None]), False)
    U = window_in_time(traj)
    xi, mu = grid.wavenumbers()
    Dq = SpaceTimeField(st, U.coeffs * np.hypot(xi, mu)[None] ** 0.25, False).physical()
    lhs = float((np.sum(np.abs(Dq) ** 4) * st.dt * grid.dx * grid.dy) ** 0.25)
    return lhs / xsb_norm(U, NormSpec(0.0, b))


def ckz_l4_test(trials: int = 50, k: int = 0, box: float = 128.0, nx: int = 256, t_max: float = 4.0,
                n_times: int = 65, seed: int = 0, transfer_trials: int = 5, b: float = 0.6,
                zero_data: bool = False) -> EstimateReport:
    """``||D|^{1/4} e^{itP} phi||_{L^4_{t,x,y}} / ||phi||_{L^2}`` over random shell data.

    Rows carry the ratio at the base resolution (parameter 0), on the grid
    with halved spacing and time step (parameter 1) and for the datum
    rescaled to the next shell (parameter 2).  The verdict needs the
    largest ratio to change by less than 10% under refinement and every
    per-datum rescaling change to stay within a factor 2.  The transfer form
    ``||D|^{1/4} u||_{L^4} / ||u||_{X^{0,b}}`` for windowed linear flows is
    recorded in the summary.
    """
    rng = np.random.default_rng(seed)
    grid = GridSpec(nx, nx, box, box)
    fine = grid.refined(2)
    rep = EstimateReport("ckz_l4", {"trials": trials, "k": k, "box": box, "nx": nx, "t_max": t_max,
                                     "n_times": n_times, "seed": seed, "b": b})
    changes = []
    for tr in range(trials):
        state = rng.bit_generator.state
        rng.bit_generator.state = state
        phi = shell_datum(grid, k, rng)
        rng.bit_generator.state = state
        phi_f = shell_datum(fine, k, rng)
        rng.bit_generator.state = state
        phi_r = shell_datum(grid, k, rng, scale=0.5)
        if zero_data:
            phi, phi_f, phi_r = phi * 0.0, phi_f * 0.0, phi_r * 0.0
        r0 = _ckz_ratio(phi, t_max, n_times)
        r1 = _ckz_ratio(phi_f, t_max, 2 * n_times - 1)
        r2 = _ckz_ratio(phi_r, t_max, n_times)
        for par, r in ((0, r0), (1, r1), (2, r2)):
            l2 = (phi if par != 1 else phi_f).l2_norm()
            rep.trials.append(TrialRecord.make(par, tr, r * l2 if np.isfinite(r) else 0.0, l2))
        if np.isfinite(r0) and np.isfinite(r2):
            changes.append(float(max(r2 / r0, r0 / r2)))
    base = rep.ratios(0)
    finer = rep.ratios(1)
    transfer = [_transfer_ratio(rng, b) for _ in range(transfer_trials)]
    rep.summary = {"max_ratio": float(base.max()) if base.size else None,
                   "max_ratio_refined": float(finer.max()) if finer.size else None,
                   "max_rescale_change": max(changes) if changes else None,
                   "transfer_max": max(transfer) if transfer else None,
                   "transfer_ratios": transfer}
    if base.size and finer.size:
        rel = abs(finer.max() / base.max() - 1.0)
        rep.summary["refinement_change"] = float(rel)
        rep.verdict = bool(rel < 0.1 and max(changes) <= 2.0)
    return rep


# ---------------------------------------------------------------------------
# dyadic bilinear and trilinear estimates
# ---------------------------------------------------------------------------

def bilinear_test(k_f_list: Sequence[int] = (3, 4, 5, 6, 7), k_g: int = 1, l_cap: int = 3,
                  trials: int = 20, n_samples: int = 400, seed: int = 0,
                  amplitude: float = 1.0) -> EstimateReport:
    """Ratio ``||f g|| / (2^{k_g/2} 2^{-k_f} 2^{(l_f+l_g)/2} ||f|| ||g||)`` swept over ``k_f``.

    ``f`` and ``g`` are random nonnegative localized pieces with modulation
    levels drawn from ``0..l_cap``.  Verdict: fitted slope of the largest
    ratio per sweep point is at most 0.1.

    Raises
    ------
    ValueError
        Unless ``k_f >= 2`` and ``k_g <= k_f - 2`` for every sweep point.
    """
    if len(k_f_list) < 4:
        raise ValueError("a sweep needs at least four points")
    for kf in k_f_list:
        if kf < 2 or k_g > kf - 2 or k_g < 0:
            raise ValueError(f"need k_f >= 2 and 0 <= k_g <= k_f - 2, got ({kf}, {k_g})")
    rng = np.random.default_rng(seed)
    rep = EstimateReport("bilinear", {"k_f_list": list(k_f_list), "k_g": k_g, "l_cap": l_cap,
                                       "trials": trials, "n_samples": n_samples, "seed": seed})
    for kf in k_f_list:
        for tr in range(trials):
            lf, lg = (int(v) for v in rng.integers(0, l_cap + 1, 2))
            f = LocalizedPiece.draw(rng, kf, lf).scaled(amplitude)
            g = LocalizedPiece.draw(rng, k_g, lg).scaled(amplitude)
            est = bilinear_product_norm(f, g, rng, n_samples)
            rhs = 2 ** (k_g / 2) / 2 ** kf * 2 ** ((lf + lg) / 2) * f.norm * g.norm
            rep.trials.append(TrialRecord.make(kf, tr, est.norm, rhs, l_f=lf, l_g=lg,
                                               stderr_sq=est.norm_sq_stderr))
    if amplitude != 0:
        _sweep_summary(rep)
    return rep


def trilinear_test(variant: int, k_list: Optional[Sequence[int]] = None, k_fixed: Optional[int] = None,
                   l_cap: int = 2, trials: int = 8, n_samples: int = 200, n_third: int = 12,
                   seed: int = 0, amplitude: float = 1.0) -> EstimateReport:
    """Trilinear products against the two dyadic bounds.

    Variant 1 sweeps ``k_g`` over ``k_list`` (default 5..8) with
    ``k_f = k_h = k_fixed`` (default 3) and divides by
    ``2^{3 k_f / 2} 2^{-k_g}``; variant 2 sweeps ``k_g`` over 1..4 with
    ``k_f = k_h = 7`` and divides by ``2^{k_g / 2}``.  Both also divide by
    ``2^{(l_f + l_g + l_h)/2} ||f|| ||g|| ||h||``.  Verdict as in
    :func:`bilinear_test`.
    """
    if variant == 1:
        k_list = list(range(5, 9)) if k_list is None else list(k_list)
        kf = 3 if k_fixed is None else k_fixed
        bad = [kg for kg in k_list if not (kf >= 2 and kg >= kf + 2)]
    elif variant == 2:
        k_list = list(range(1, 5)) if k_list is None else list(k_list)
        kf = 7 if k_fixed is None else k_fixed
        bad = [kg for kg in k_list if not (kf >= 2 and 0 <= kg <= kf - 2)]
    else:
        raise ValueError("variant must be 1 or 2")
    if bad:
        raise ValueError(f"index pattern violated for k_g in {bad} (k_f = k_h = {kf})")
    if len(k_list) < 4:
        raise ValueError("a sweep needs at least four points")
    rng = np.random.default_rng(seed)
    rep = EstimateReport(f"trilinear_{variant}", {"variant": variant, "k_list": k_list, "k_f": kf,
                                                   "k_h": kf, "l_cap": l_cap, "trials": trials,
                                                   "n_samples": n_samples, "n_third": n_third,
                                                   "seed": seed})
    for kg in k_list:
        for tr in range(trials):
            lf, lg, lh = (int(v) for v in rng.integers(0, l_cap + 1, 3))
            f = LocalizedPiece.draw(rng, kf, lf).scaled(amplitude)
            g = LocalizedPiece.draw(rng, kg, lg).scaled(amplitude)
            h = LocalizedPiece.draw(rng, kf, lh).scaled(amplitude)
            if variant == 1:
                est = trilinear_product_norm(g, f, h, rng, n_samples, n_third)
                pref = 2 ** (1.5 * kf) / 2 ** kg
            else:
                est = trilinear_product_norm(f, g, h, rng, n_samples, n_third)
                pref = 2 ** (kg / 2)
            rhs = pref * 2 ** ((lf + lg + lh) / 2) * f.norm * g.norm * h.norm
            rep.trials.append(TrialRecord.make(kg, tr, est.norm, rhs, l_f=lf, l_g=lg, l_h=lh,
                                               stderr_sq=est.norm_sq_stderr))
    if amplitude != 0:
        _sweep_summary(rep)
    return rep


def lattice_product_norm(*fields: SpaceTimeField) -> float:
    """``||f_1 f_2 ...||_{L^2}`` over the space-time box, from physical samples."""
    st = fields[0].stgrid
    prod = np.ones(fields[0].coeffs.shape, dtype=complex)
    for F in fields:
        if F.stgrid != st:
            raise ValueError("fields live on different lattices")
        prod = prod * F.physical()
    return float(np.sqrt(np.sum(np.abs(prod) ** 2) * st.dt * st.grid.dx * st.grid.dy))


# ---------------------------------------------------------------------------
# X^{s,b} estimates
# ---------------------------------------------------------------------------

def _xsb_lattice(band: int, order: int, modulation_cap: float) -> SpaceTimeGridSpec:
    """Space-time lattice for products of ``order`` fields populated on ``|xi| < band``."""
    n = 4 * band
    grid = GridSpec(n, n, 2 * np.pi, 2 * np.pi)
    pmax = 0.25 * band ** 3
    t_window = 2 * np.pi / 16.0
    reach = order * (pmax + modulation_cap)
    nt = int(np.ceil(reach * t_window / np.pi / 16.0)) * 16
    return SpaceTimeGridSpec(grid, nt, t_window)


def random_spacetime_field(st: SpaceTimeGridSpec, rng: np.random.Generator, s: float, b: float,
                           band: float, kind: str = "modulation", decay: float = 0.5,
                           modulation_cap: float = 64.0) -> SpaceTimeField:
    """Random field with ``|c| ~ <xi>^{-s-1-decay} <tau - P>^{-b-1/2-decay}``.

    ``kind = "modulation"`` draws independent complex Gaussians on the
    lattice points with ``|tau - P| <= modulation_cap``; ``kind = "flow"``
    builds a windowed linear flow ``rho(t) e^{itP} phi`` with random
    ``phi``.  Both are populated on ``|xi| < band``.
    """
    grid = st.grid
    xi, mu = grid.wavenumbers()
    r = np.hypot(xi, mu)
    inside = (r < band) & ~grid.nyquist_mask()
    amp = (1 + r ** 2) ** (-(s + 1 + decay) / 2) * inside
    if kind == "modulation":
        w = st.tau_1d()[:, None, None] - dispersion_symbol(xi, mu)[None]
        mod = (1 + w ** 2) ** (-(b + 0.5 + decay) / 2) * (np.abs(w) <= modulation_cap)
        z = (rng.normal(size=w.shape) + 1j * rng.normal(size=w.shape)) / np.sqrt(2)
        return SpaceTimeField(st, amp[None] * mod * z, False)
    if kind == "flow":
        z = (rng.normal(size=grid.shape) + 1j * rng.normal(size=grid.shape)) / np.sqrt(2)
        phi = amp * z
        p = dispersion_symbol(xi, mu)
        times = st.times()
        traj = Trajectory(grid, times, phi[None] * np.exp(1j * times[:, None, None] * p[None]), False)
        return window_in_time(traj)
    raise ValueError(f"unknown field kind {kind!r}")


def _truncate(U: SpaceTimeField, band: float) -> SpaceTimeField:
    xi, mu = U.grid.wavenumbers()
    keep = np.hypot(xi, mu) < band
    return SpaceTimeField(U.stgrid, U.coeffs * keep[None], U.real)


def _slices(U: SpaceTimeField) -> np.ndarray:
    return sfft.ifft(U.coeffs, axis=0, workers=fft_workers()) * U.stgrid.nt


def _from_slices(st: SpaceTimeGridSpec, c: np.ndarray) -> SpaceTimeField:
    return SpaceTimeField(st, sfft.fft(c, axis=0, workers=fft_workers()) / st.nt, False,
                          check_band=False)


def _xsb_bilinear_ratio(U: SpaceTimeField, V: SpaceTimeField, s: float, eps: float) -> tuple[float, float]:
    out = _from_slices(U.stgrid, nl1_bilinear_coeffs(_slices(U), _slices(V), U.grid))
    lhs = xsb_norm(out, NormSpec(s, -0.5 + 2 * eps))
    rhs = xsb_norm(U, NormSpec(s, 0.5 + eps)) * xsb_norm(V, NormSpec(s, 0.5 + eps))
    return lhs, rhs


def _xsb_trilinear_ratio(U, V, W, s: float, eps: float) -> tuple[float, float]:
    out = _from_slices(U.stgrid, mnl1_trilinear_coeffs(_slices(U), _slices(V), _slices(W), U.grid))
    lhs = xsb_norm(out, NormSpec(s, -0.5 + 2 * eps))
    rhs = np.prod([xsb_norm(F, NormSpec(s, 0.5 + eps)) for F in (U, V, W)])
    return lhs, float(rhs)


def _check_xsb_params(s: float, eps: float, s_min: float) -> None:
    if not s > s_min:
        raise ValueError(f"need s > {s_min}, got {s}")
    if not 0 < eps < 0.25:
        raise ValueError(f"need 0 < eps < 1/4, got {eps}")


def _xsb_sweep(name: str, order: int, s: float, eps: float, trials: int, band: int, seed: int,
               amplitude: float, modulation_cap: float = 64.0) -> EstimateReport:
    rng = np.random.default_rng(seed)
    st = _xsb_lattice(2 * band, order, modulation_cap)
    b = 0.5 + eps
    rep = EstimateReport(name, {"s": s, "eps": eps, "trials": trials, "band": band, "seed": seed,
                                "nt": st.nt, "n": st.grid.nx, "t_window": st.t_window,
                                "modulation_cap": modulation_cap})
    for tr in range(trials):
        kind = "flow" if tr % 2 else "modulation"
        fields = [random_spacetime_field(st, rng, s, b, 2 * band, kind, modulation_cap=modulation_cap)
                  for _ in range(order)]
        fields = [SpaceTimeField(st, F.coeffs * amplitude, False) for F in fields]
        for par, K in ((band, band), (2 * band, 2 * band)):
            Fs = [_truncate(F, K) for F in fields]
            lhs, rhs = (_xsb_bilinear_ratio(*Fs, s, eps) if order == 2
                        else _xsb_trilinear_ratio(*Fs, s, eps))
            rep.trials.append(TrialRecord.make(par, tr, lhs, rhs, kind=kind))
    lo, hi = rep.ratios(band), rep.ratios(2 * band)
    if lo.size and hi.size:
        change = float(hi.max() / lo.max() - 1.0)
        rep.summary = {"max_ratio_band": float(lo.max()), "max_ratio_double_band": float(hi.max()),
                       "relative_change": change}
        rep.verdict = bool(abs(change) <= 0.25)
    return rep


def xsb_bilinear_test(s: float = 0.75, eps: float = 0.1, trials: int = 100, band: int = 8,
                      seed: int = 0, amplitude: float = 1.0, contrast: bool = False,
                      contrast_n: Sequence[int] = (16, 32, 64, 128)) -> EstimateReport:
    """``||NL1(u, v)||_{X^{s,-1/2+2eps}} / (||u||_{X^{s,1/2+eps}} ||v||_{X^{s,1/2+eps}})``.

    Fields are drawn on the band ``|xi| < 2 band`` and truncated to
    ``|xi| < band`` for the first evaluation, so both evaluations share the
    same random draws.  Verdict: the largest ratio changes by at most 25%
    between the two bands.  With ``contrast`` the summary also records the
    homogeneous ratio on the counterexample data at ``s = -1.5`` for each
    ``N`` in ``contrast_n`` (see :func:`nvlab.illposed.xdot_contrast_ratio`).
    """
    _check_xsb_params(s, eps, 0.5)
    rep = _xsb_sweep("xsb_bilinear", 2, s, eps, trials, band, seed, amplitude)
    if contrast:
        from .illposed import xdot_contrast_ratio
        vals = [xdot_contrast_ratio(int(N)) for N in contrast_n]
        rep.summary["contrast_N"] = list(contrast_n)
        rep.summary["contrast_ratio"] = vals
        rep.summary["contrast_slope"] = log2_slope(np.log2(contrast_n), vals)
    return rep


def l6_shell_sweep(k_list: Sequence[int] = (2, 3, 4, 5, 6), n: int = 512, random_data: int = 3,
                   t_max: float = 0.125, per_octave: int = 4, seed: int = 0) -> EstimateReport:
    """``||e^{itP} P_k phi||_{L^6_{t,x,y}} / (2^{k/6} ||phi||_{L^2})`` on the ``2 pi`` torus.

    Data per shell: the concentrated bump ``ring(|xi| / 2^k)`` and
    ``random_data`` fields with independent Gaussian coefficients on the
    shell.  Time nodes are geometric from ``2^{-3k-4}`` to ``t_max`` (plus 0)
    so the initial concentration of the bump is resolved.  Verdict: fitted
    slope of the largest ratio per shell at most 0.1.
    """
    rng = np.random.default_rng(seed)
    grid = GridSpec(n, n, 2 * np.pi, 2 * np.pi)
    rep = EstimateReport("l6_surrogate", {"k_list": list(k_list), "n": n, "random_data": random_data,
                                           "t_max": t_max, "per_octave": per_octave, "seed": seed})
    xi, mu = grid.wavenumbers()
    for k in k_list:
        if 2.0 ** (k + 1) > grid.band_edge():
            raise ValueError(f"shell {k} reaches beyond the band edge")
        shape = np.broadcast_to(ring(np.hypot(xi, mu) / 2.0 ** k), grid.shape)
        t0 = 2.0 ** (-3 * k - 4)
        m = int(np.ceil(per_octave * np.log2(t_max / t0)))
        times = np.concatenate([[0.0], t0 * (t_max / t0) ** (np.arange(m + 1) / m)])
        data = [shape.astype(complex)]
        for _ in range(random_data):
            z = (rng.normal(size=grid.shape) + 1j * rng.normal(size=grid.shape)) / np.sqrt(2)
            data.append(shape * z)
        for tr, c in enumerate(data):
            c = c.copy()
            c[grid.nyquist_mask()] = 0.0
            phi = SpectralField(grid, c, False)
            lhs = _mixed_norm(phi, 6.0, 6.0, times)
            rep.trials.append(TrialRecord.make(k, tr, lhs, 2 ** (k / 6) * phi.l2_norm(),
                                               kind="bump" if tr == 0 else "random"))
    _sweep_summary(rep)
    return rep


def xsb_trilinear_test(s: float = 1.25, eps: float = 0.1, trials: int = 100, band: int = 8,
                       seed: int = 0, amplitude: float = 1.0, l6: bool = True) -> EstimateReport:
    """``||mNL1(u, v, w)||_{X^{s,-1/2+2eps}} / prod ||.||_{X^{s,1/2+eps}}`` with band doubling.

    With ``l6`` the report also carries the ``L^6`` surrogate sweep of
    :func:`l6_shell_sweep`; the verdict needs both parts to pass.
    """
    _check_xsb_params(s, eps, 1.0)
    rep = _xsb_sweep("xsb_trilinear", 3, s, eps, trials, band, seed, amplitude)
    if l6:
        sweep = l6_shell_sweep(seed=seed)
        rep.summary["l6_slope_max"] = sweep.summary["slope_max"]
        rep.summary["l6_max_ratio"] = sweep.summary["max_ratio"]
        rep.verdict = bool(rep.verdict and sweep.verdict)
    return rep


# ---------------------------------------------------------------------------
# interaction-set volumes
# ---------------------------------------------------------------------------

def measure_bound_check(k_f: int, k_g: int, l_f: int = 0, l_g: int = 0, trials: int = 16,
                        n_strata: int = 2 ** 16, seed: int = 0,
                        sets: DyadicSets = DyadicSets()) -> EstimateReport:
    """Volumes of the interaction sets against their dyadic bounds.

    At ``trials`` random admissible outputs, rows record
    ``|B| / (max(2^l_f, 2^l_g) 2^{k_g} 2^{-2 k_f})`` with
    ``|A| / (min(2^l_f, 2^l_g) |B|)`` as an extra column.  Verdict: both
    ratios stay at most 10 in every trial.

    Raises
    ------
    ValueError
        Unless ``k_f >= 2`` and ``k_g <= k_f - 2``.
    """
    if k_f < 2 or k_g > k_f - 2 or k_g < 0:
        raise ValueError("need k_f >= 2 and 0 <= k_g <= k_f - 2")
    rng = np.random.default_rng(seed)
    bound = max(2.0 ** l_f, 2.0 ** l_g) * 2.0 ** k_g / 4.0 ** k_f
    rep = EstimateReport("measure_bound", {"k_f": k_f, "k_g": k_g, "l_f": l_f, "l_g": l_g,
                                            "trials": trials, "n_strata": n_strata, "seed": seed,
                                            "convention": sets.convention})
    a_ratios = []
    for tr in range(trials):
        tau, xi, mu = sample_admissible_output(rng, k_f, k_g, l_f, l_g, sets)
        vol = pair_set_volumes(tau, xi, mu, k_f, k_g, l_f, l_g, rng, n_strata, sets)
        ar = vol.a_volume / (min(2.0 ** l_f, 2.0 ** l_g) * vol.b_volume) if vol.b_volume > 0 else 0.0
        a_ratios.append(ar)
        rep.trials.append(TrialRecord.make(tr, tr, vol.b_volume, bound, a_volume=vol.a_volume,
                                           a_over_min_b=ar, b_stderr=vol.b_stderr,
                                           tau=tau, xi=xi, mu=mu))
    r = rep.ratios()
    rep.summary = {"max_b_ratio": float(r.max()), "median_b_ratio": float(np.median(r)),
                   "max_a_ratio": float(max(a_ratios)), "threshold": 10.0}
    rep.verdict = bool(r.max() <= 10.0 and max(a_ratios) <= 10.0)
    return rep
