import numpy as np
import pytest

from nvlab.operators import dispersion_symbol
from nvlab.resonance import (DyadicSets, annulus_chord, disk_chord, intersect, interval_lengths,
                             pair_set_volumes, phase_quadratic, quadratic_band, resonance,
                             resonance_grad, sample_admissible_output, sample_regime)


def brute_resonance(xi, xi1, mu, mu1):
    return (dispersion_symbol(xi, mu) - dispersion_symbol(xi1, mu1)
            - dispersion_symbol(xi - xi1, mu - mu1))


def test_resonance_hand_value():
    assert resonance(2.0, 1.0, 0.0, 0.0) == pytest.approx(1.5, abs=0)
    assert resonance(3.7, 0.0, -1.2, 0.0) == 0.0


def test_resonance_identity_random_points(rng):
    xi, xi1, mu, mu1 = rng.normal(size=(4, 100_000)) * 20
    lhs = resonance(xi, xi1, mu, mu1)
    rhs = brute_resonance(xi, xi1, mu, mu1)
    scale = (np.abs(dispersion_symbol(xi, mu)) + np.abs(dispersion_symbol(xi1, mu1))
             + np.abs(dispersion_symbol(xi - xi1, mu - mu1)))
    assert np.max(np.abs(lhs - rhs) / scale) < 1e-12
    assert np.max(np.abs(np.abs(lhs) - np.abs(rhs)) / scale) < 1e-12


def test_resonance_grad_finite_difference(rng):
    xi, xi1, mu, mu1 = rng.normal(size=(4, 1000)) * 5
    h = 1e-4
    fd_xi = (resonance(xi, xi1 + h, mu, mu1) - resonance(xi, xi1 - h, mu, mu1)) / (2 * h)
    fd_mu = (resonance(xi, xi1, mu, mu1 + h) - resonance(xi, xi1, mu, mu1 - h)) / (2 * h)
    d_xi, d_mu = resonance_grad(xi, xi1, mu, mu1)
    scale = 1.0 + np.abs(d_xi) + np.abs(d_mu)
    assert np.max(np.abs(d_xi - fd_xi) / scale) < 1e-7
    assert np.max(np.abs(d_mu - fd_mu) / scale) < 1e-7


def test_mu_derivative_matches_expanded_form(rng):
    xi, xi1, mu, mu1 = rng.normal(size=(4, 200)) * 3
    expanded = 1.5 * (xi * mu1 - xi * (mu - mu1) - (xi - xi1) * mu1 + xi1 * (mu - mu1))
    _, d_mu = resonance_grad(xi, xi1, mu, mu1)
    np.testing.assert_allclose(np.abs(d_mu), np.abs(expanded), rtol=1e-12, atol=1e-12)


@pytest.mark.parametrize("k_f", [3, 5, 8])
def test_derivative_lower_bounds(rng, k_f):
    for regime in ("xi-dominant", "mu-dominant"):
        xi, xi1, mu, mu1 = sample_regime(rng, 10_000, k_f, regime=regime)
        d_xi, _ = resonance_grad(xi, xi1, mu, mu1)
        assert np.min(np.abs(d_xi)) / 4.0 ** k_f >= 0.1
    xi, xi1, mu, mu1 = sample_regime(rng, 10_000, k_f, regime="comparable")
    _, d_mu = resonance_grad(xi, xi1, mu, mu1)
    assert np.min(np.abs(d_mu)) / 4.0 ** k_f >= 0.1


def test_regime_samples_respect_constraints(rng):
    sets = DyadicSets()
    xi, xi1, mu, mu1 = sample_regime(rng, 2000, 6, regime="comparable", sets=sets)
    r1 = np.hypot(xi1, mu1)
    lo, hi = sets.radii(6)
    assert np.all((r1 >= lo) & (r1 <= hi))
    q = np.abs(xi1) / np.abs(mu1)
    assert np.all((q >= 0.5 - 1e-12) & (q <= 2 + 1e-12))
    r2 = np.hypot(xi - xi1, mu - mu1)
    assert np.all(r2 <= sets.radii(4)[1] + 1e-12)
    with pytest.raises(ValueError):
        sample_regime(rng, 10, 3, k_g_max=2)


def test_phase_is_exact_quadratic(rng):
    tau, xi, mu, x, y = rng.normal(size=(5, 500)) * 6
    truth = tau - dispersion_symbol(xi - x, mu - y) - dispersion_symbol(x, y)
    A, B, C = phase_quadratic(tau, xi, mu, y, "x")
    np.testing.assert_allclose(A * x * x + B * x + C, truth, atol=1e-9 * (1 + np.abs(truth)).max())
    A, B, C = phase_quadratic(tau, xi, mu, x, "y")
    np.testing.assert_allclose(A * y * y + B * y + C, truth, atol=1e-9 * (1 + np.abs(truth)).max())


def test_quadratic_band_matches_dense_sampling(rng):
    xs = np.linspace(-2.0, 3.0, 400_001)
    for trial in range(300):
        A, B, C = rng.normal(size=3) * [1.0, 3.0, 2.0]
        if trial % 7 == 0:
            A = 0.0
        vlo = rng.normal()
        vhi = vlo + 2 * abs(rng.normal())
        f = A * xs * xs + B * xs + C
        inside = (f >= vlo) & (f <= vhi)
        I = quadratic_band(A, B, C, vlo, vhi, -2.0, 3.0)
        assert interval_lengths(I) == pytest.approx(inside.mean() * 5.0, abs=2e-4)
        # every returned interval lies in the band
        for lo, hi in I:
            if hi > lo:
                mid = np.linspace(lo, hi, 11)
                fm = A * mid * mid + B * mid + C
                assert np.all(fm >= vlo - 1e-9) and np.all(fm <= vhi + 1e-9)


def test_chords_and_intersection():
    I = disk_chord(0.6, 1.0)
    assert interval_lengths(I) == pytest.approx(1.6)
    J = annulus_chord(0.0, 1.0, 2.0)
    assert interval_lengths(J) == pytest.approx(2.0)
    assert interval_lengths(annulus_chord(3.0, 1.0, 2.0)) == 0.0
    K = intersect(I, J)
    assert interval_lengths(K) == pytest.approx(0.0)
    K = intersect(disk_chord(0.0, 1.5), J)
    assert interval_lengths(K) == pytest.approx(1.0)


def test_pair_volumes_against_brute_force(rng):
    sets = DyadicSets()
    k_f, k_g, l_f, l_g = 4, 1, 1, 0
    tau, xi, mu = sample_admissible_output(rng, k_f, k_g, l_f, l_g)
    vol = pair_set_volumes(tau, xi, mu, k_f, k_g, l_f, l_g, rng, n_strata=2 ** 13)
    n = 2_000_000
    ro = sets.radii(k_g)[1]
    x = rng.uniform(-ro, ro, (n, 2))
    r2 = np.hypot(x[:, 0], x[:, 1])
    r1 = np.hypot(xi - x[:, 0], mu - x[:, 1])
    inset = ((r2 >= sets.radii(k_g)[0]) & (r2 <= ro)
             & (r1 >= sets.radii(k_f)[0]) & (r1 <= sets.radii(k_f)[1]))
    phi = tau - dispersion_symbol(xi - x[:, 0], mu - x[:, 1]) - dispersion_symbol(x[:, 0], x[:, 1])
    hits = inset & (np.abs(phi) <= 2.0)
    b_brute = hits.mean() * 4 * ro * ro
    se = np.sqrt(hits.mean() / n) * 4 * ro * ro
    assert abs(vol.b_volume - b_brute) < 4 * se + 4 * vol.b_stderr
    af, bf = sets.radii(l_f)
    ag, bg = sets.radii(l_g)
    s1 = rng.uniform(-bf, bf, n)
    ok = inset & (np.abs(s1) >= af) & (np.abs(phi - s1) >= ag) & (np.abs(phi - s1) <= bg)
    a_brute = ok.mean() * 4 * ro * ro * 2 * bf
    se = np.sqrt(ok.mean() / n) * 4 * ro * ro * 2 * bf
    assert abs(vol.a_volume - a_brute) < 4 * se + 4 * vol.a_stderr


def test_pair_volumes_vanish_far_from_resonance(rng):
    vol = pair_set_volumes(1e9, 16.0, 3.0, 4, 1, 0, 0, rng, n_strata=256)
    assert vol.a_volume == 0.0 and vol.b_volume == 0.0
