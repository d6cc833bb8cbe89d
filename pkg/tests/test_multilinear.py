import numpy as np
import pytest

from nvlab.littlewood_paley import CUTOFFS
from nvlab.multilinear import (LocalizedPiece, Quadrature, _convolved_modulation,
                               bilinear_product_norm, pair_density, trilinear_product_norm)
from nvlab.operators import dispersion_symbol


def brute_pair_density(tau, xi, mu, hi, lo, rng, n=400_000):
    """Plain Monte Carlo over (xi_2, modulation of the low piece); no phase algebra."""
    ro = lo.radii[1]
    b = lo.modulation_radii[1]
    x = rng.uniform(-ro, ro, (n, 2))
    s2 = rng.uniform(-b, b, n)
    p2 = dispersion_symbol(x[:, 0], x[:, 1])
    p1 = dispersion_symbol(xi - x[:, 0], mu - x[:, 1])
    vals = (lo.alpha(x[:, 0], x[:, 1]) * lo.beta(s2)
            * hi.alpha(xi - x[:, 0], mu - x[:, 1]) * hi.beta(tau - s2 - p2 - p1))
    vol = 4 * ro * ro * 2 * b
    return vals.mean() * vol, vals.std() / np.sqrt(n) * vol


def test_pair_density_matches_brute_force(rng):
    hi = LocalizedPiece.draw(rng, 4, 1)
    lo = LocalizedPiece.draw(rng, 1, 0)
    t1, x1, y1, _ = hi.sample(rng, 3)
    t2, x2, y2, _ = lo.sample(rng, 3)
    cmod = _convolved_modulation([hi, lo])
    H = pair_density(t1 + t2, x1 + x2, y1 + y2, hi, lo, cmod)
    for i in range(3):
        ref, se = brute_pair_density(t1[i] + t2[i], x1[i] + x2[i], y1[i] + y2[i], hi, lo, rng)
        assert abs(H[i] - ref) < 4 * se + 0.01 * ref


def test_piece_norm_matches_riemann_sum(rng):
    f = LocalizedPiece.draw(rng, 3, 2)
    h = 0.01
    g = np.arange(-16, 16, h) + h / 2
    X, Y = np.meshgrid(g, g, indexing="ij")
    a2 = np.sum(f.alpha(X, Y) ** 2) * h * h
    w = np.arange(-8, 8, h / 4) + h / 8
    b2 = np.sum(f.beta(w) ** 2) * h / 4
    assert f.alpha_norm_sq == pytest.approx(a2, rel=1e-4)
    assert f.beta_norm_sq == pytest.approx(b2, rel=1e-4)


def test_importance_weights_are_unbiased(rng):
    f = LocalizedPiece.draw(rng, 2, 1)
    h = 0.01
    g = np.arange(-8, 8, h) + h / 2
    X, Y = np.meshgrid(g, g, indexing="ij")
    w = np.arange(-4, 4, h) + h / 2
    total = np.sum(f.alpha(X, Y)) * h * h * np.sum(f.beta(w)) * h
    *_, wts = f.sample(rng, 200_000)
    assert abs(wts.mean() - total) < 4 * wts.std() / np.sqrt(wts.size)
    # accepted samples stay inside the cutoff supports
    tau, xi, mu, _ = f.sample(rng, 2000)
    assert np.all(CUTOFFS.phi(f.k, xi, mu) > 0)
    assert np.all(CUTOFFS.psi(f.l, tau - dispersion_symbol(xi, mu)) > 0)


def test_bilinear_estimator_matches_density_square_integral(rng):
    # ||f~ * g~||^2 = int H(z)^2 dz, sampled uniformly over a box covering the output support
    f = LocalizedPiece.draw(rng, 3, 0)
    g = LocalizedPiece.draw(rng, 1, 0)
    est = bilinear_product_norm(f, g, np.random.default_rng(1), n_samples=1500)
    cmod = _convolved_modulation([f, g])
    n = 6000
    R = f.radii[1] + g.radii[1]
    xi = rng.uniform(-R, R, n)
    mu = rng.uniform(-R, R, n)
    # the product's modulation w.r.t. P(xi) stays within reach of the pair resonance
    reach = cmod.half_width + 0.75 * R ** 2 * g.radii[1] + 0.75 * R * g.radii[1] ** 2
    w = rng.uniform(-reach, reach, n)
    H = pair_density(dispersion_symbol(xi, mu) + w, xi, mu, f, g, cmod)
    vol = 4 * R * R * 2 * reach
    ref = np.mean(H ** 2) * vol
    se = np.std(H ** 2) / np.sqrt(n) * vol
    assert abs(est.norm ** 2 - ref) < 4 * (se + est.norm_sq_stderr)


def test_zero_inputs_give_zero(rng):
    f = LocalizedPiece.draw(rng, 3, 0)
    g = LocalizedPiece.draw(rng, 1, 0).scaled(0.0)
    assert bilinear_product_norm(f, g, rng, n_samples=10).norm == 0.0
    assert trilinear_product_norm(f, g, f, rng, n_samples=10).norm == 0.0


def test_amplitude_scaling_is_exact(rng):
    f = LocalizedPiece.draw(rng, 4, 1)
    g = LocalizedPiece.draw(rng, 1, 0)
    a = bilinear_product_norm(f, g, np.random.default_rng(7), n_samples=50)
    b = bilinear_product_norm(f.scaled(3.0), g.scaled(0.5), np.random.default_rng(7), n_samples=50)
    ra = a.norm / (f.norm * g.norm)
    rb = b.norm / (f.scaled(3.0).norm * g.scaled(0.5).norm)
    assert abs(ra - rb) < 1e-12 * ra


def test_quadrature_refinement_is_stable(rng):
    hi = LocalizedPiece.draw(rng, 5, 0)
    lo = LocalizedPiece.draw(rng, 2, 1)
    t1, x1, y1, _ = hi.sample(rng, 8)
    t2, x2, y2, _ = lo.sample(rng, 8)
    cmod = _convolved_modulation([hi, lo])
    H = pair_density(t1 + t2, x1 + x2, y1 + y2, hi, lo, cmod)
    Hf = pair_density(t1 + t2, x1 + x2, y1 + y2, hi, lo, cmod, Quadrature(24, 6, 8, 8))
    assert np.max(np.abs(H - Hf)) < 0.02 * np.max(Hf)
