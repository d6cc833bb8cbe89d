import itertools

import numpy as np
import pytest

from nvlab.operators import (beurling_ratio, dealias, dispersion_symbol, hessian_det,
                             linear_propagate, nl_mnv, nl_nv, ratio_symbol, reflect, wirtinger)
from nvlab.spectral import GridSpec, SpectralField, apply_multiplier, random_field


def test_symbol_values():
    assert dispersion_symbol(2.0, 0.0) == 2.0
    assert dispersion_symbol(1.0, 1.0) == -0.5
    assert np.all(dispersion_symbol(0.0, np.linspace(-3, 3, 7)) == 0)
    assert hessian_det(0.0, 0.0) == 0.0
    assert hessian_det(1.0, 1.0) == -4.5
    # three times the displayed closed form -3/4 (xi^2 + mu^2)
    assert hessian_det(1.0, 1.0) == 3 * (-0.75 * 2)


def test_hessian_finite_difference(rng):
    h = 1e-2   # central differences are exact on cubics up to rounding
    pts = rng.uniform(-5, 5, size=(1000, 2))
    for x, y in pts:
        P = dispersion_symbol
        pxx = (P(x + h, y) - 2 * P(x, y) + P(x - h, y)) / h ** 2
        pyy = (P(x, y + h) - 2 * P(x, y) + P(x, y - h)) / h ** 2
        pxy = (P(x + h, y + h) - P(x + h, y - h) - P(x - h, y + h) + P(x - h, y - h)) / (4 * h * h)
        det = pxx * pyy - pxy ** 2
        assert det == pytest.approx(hessian_det(x, y), rel=1e-6)


def test_propagator(rng):
    g = GridSpec(32, 32, 2 * np.pi, 2 * np.pi)
    F = random_field(g, rng)
    assert np.array_equal(linear_propagate(F, 0.0).coeffs, F.coeffs)
    c = np.zeros(g.shape, complex)
    c[2, 0] = 1.0
    out = linear_propagate(SpectralField(g, c), 1.0)
    assert out.coeffs[2, 0] == pytest.approx(np.exp(2j))
    for t in (0.3, -2.0, 17.0):
        G = linear_propagate(F, t)
        assert abs(G.l2_norm() - F.l2_norm()) < 1e-13 * F.l2_norm()
        assert G.real
    a = linear_propagate(linear_propagate(F, 0.7), 1.9)
    b = linear_propagate(F, 2.6)
    assert np.max(np.abs(a.coeffs - b.coeffs)) < 1e-12 * np.max(np.abs(F.coeffs))


def test_reflection_reverses_time(rng):
    g = GridSpec(32, 32, 2 * np.pi, 2 * np.pi)
    F = random_field(g, rng)
    back = reflect(linear_propagate(reflect(F), 1.3))
    assert np.allclose(back.coeffs, linear_propagate(F, -1.3).coeffs, atol=1e-14)


def test_wirtinger(rng):
    g = GridSpec(32, 32, 2 * np.pi, 4 * np.pi)
    const = SpectralField.zeros(g)
    const.coeffs[0, 0] = 2.0
    assert np.all(wirtinger(const, "d").coeffs == 0)
    c = np.zeros(g.shape, complex)
    c[3, 5] = 1.0
    xi0, mu0 = 3.0, 2.5
    assert wirtinger(SpectralField(g, c), "d").coeffs[3, 5] == pytest.approx(0.5 * (1j * xi0 + mu0))
    F = random_field(g, rng)
    s = wirtinger(F, "d") + wirtinger(F, "dbar")
    dx = apply_multiplier(F, lambda xi, mu: 1j * xi + 0 * mu)
    assert np.max(np.abs(s.coeffs - dx.coeffs)) < 1e-12 * np.max(np.abs(dx.coeffs))
    with pytest.raises(ValueError):
        wirtinger(F, "dx")


def test_beurling(rng):
    g = GridSpec(32, 32, 2 * np.pi, 2 * np.pi)
    F = random_field(g, rng, mean_zero=True)
    assert beurling_ratio(F).l2_norm() == pytest.approx(F.l2_norm(), rel=1e-13)
    assert ratio_symbol(1.0, 0.0) == 1.0
    assert ratio_symbol(0.0, 1.0) == -1.0
    assert ratio_symbol(0.0, 0.0) == 0.0
    # factorisation: dbar (dbar^{-1} d) = d on mean-zero fields
    lhs = wirtinger(beurling_ratio(F), "dbar")
    rhs = wirtinger(F, "d")
    assert np.max(np.abs(lhs.coeffs - rhs.coeffs)) < 1e-12 * np.max(np.abs(rhs.coeffs))


# ---------------------------------------------------------------------------
# brute-force convolution oracles on integer mode indices
# ---------------------------------------------------------------------------

def _modes(F):
    g = F.grid
    j, m = g.index_1d()
    out = {}
    for a in range(g.nx):
        for b in range(g.ny):
            if F.coeffs[a, b] != 0:
                out[(int(j[a]), int(m[b]))] = F.coeffs[a, b]
    return out


def _syms(g, k):
    xi = 2 * np.pi * k[0] / g.lx
    mu = 2 * np.pi * k[1] / g.ly
    return xi, mu


def _to_field(g, d, band):
    c = np.zeros(g.shape, complex)
    for (j, m), v in d.items():
        if abs(j) < band * g.nx / 2 and abs(m) < band * g.ny / 2:
            c[j % g.nx, m % g.ny] += v
    return c


def _conv(a, b):
    out = {}
    for (p, x), (q, y) in itertools.product(a.items(), b.items()):
        k = (p[0] + q[0], p[1] + q[1])
        out[k] = out.get(k, 0) + x * y
    return out


def _mult(g, d, fn):
    return {k: v * fn(*_syms(g, k)) for k, v in d.items()}


def _dsym(xi, mu):
    return 0.5 * (1j * xi + mu)


def _dbsym(xi, mu):
    return 0.5 * (1j * xi - mu)


def _B(xi, mu):
    return 0 if xi == 0 and mu == 0 else (1j * xi + mu) / (1j * xi - mu)


def _Bb(xi, mu):
    return 0 if xi == 0 and mu == 0 else (1j * xi - mu) / (1j * xi + mu)


def _conj_modes(d):
    return {(-k[0], -k[1]): np.conj(v) for k, v in d.items()}


def nv_oracle(F):
    g = F.grid
    u = _modes(F)
    p1 = _conv(u, _mult(g, u, _B))
    p2 = _conv(u, _mult(g, u, _Bb))
    nl = {}
    for k, v in p1.items():
        nl[k] = nl.get(k, 0) + 0.75 * _dsym(*_syms(g, k)) * v
    for k, v in p2.items():
        nl[k] = nl.get(k, 0) + 0.75 * _dbsym(*_syms(g, k)) * v
    return _to_field(g, nl, 2 / 3)


def mnv_oracle(F):
    g = F.grid
    u = _modes(F)
    ub = _conj_modes(u)
    du = _mult(g, u, _dsym)
    dbu = _mult(g, u, _dbsym)
    mod2 = _conv(u, ub)
    terms = [
        _conv(du, _mult(g, mod2, _B)),
        _conv(dbu, _mult(g, mod2, _Bb)),
        _conv(u, _mult(g, _conv(ub, du), _B)),
        _conv(u, _mult(g, _conv(ub, dbu), _Bb)),
    ]
    tot = {}
    for t in terms:
        for k, v in t.items():
            tot[k] = tot.get(k, 0) + 0.75 * v
    return _to_field(g, tot, 1 / 2)


def test_nl_nv_zero_and_realness():
    g = GridSpec(16, 16, 2 * np.pi, 2 * np.pi)
    assert np.all(nl_nv(SpectralField.zeros(g)).coeffs == 0)
    with pytest.raises(ValueError):
        nl_nv(SpectralField.zeros(g, real=False))


def test_nl_nv_cosine_oracle():
    g = GridSpec(16, 16, 2 * np.pi, 2 * np.pi)
    c = np.zeros(g.shape, complex)
    c[1, 2] = c[-1, -2] = 0.5
    F = SpectralField(g, c, True)
    out = nl_nv(F).coeffs
    ref = nv_oracle(F)
    assert np.max(np.abs(out - ref)) < 1e-12 * max(1.0, np.max(np.abs(ref)))


def test_nl_nv_random_band_oracle(rng):
    g = GridSpec(24, 24, 2 * np.pi, 2 * np.pi * 1.5)
    F = dealias(random_field(g, rng, band=g.band_mask(0.5)))
    out = nl_nv(F).coeffs
    ref = nv_oracle(F)
    assert np.max(np.abs(out - ref)) < 1e-12 * np.max(np.abs(ref))
    assert out[0, 0] == 0


def test_nl_nv_homogeneity(rng):
    g = GridSpec(32, 32, 2 * np.pi * 2, 2 * np.pi * 2)
    for _ in range(20):
        F = dealias(random_field(g, rng))
        a = rng.uniform(-3, 3)
        lhs = nl_nv(a * F).coeffs
        rhs = a ** 2 * nl_nv(F).coeffs
        assert np.max(np.abs(lhs - rhs)) < 1e-12 * np.max(np.abs(rhs))


def test_nl_mnv_oracles(rng):
    g = GridSpec(16, 16, 2 * np.pi, 2 * np.pi)
    assert np.all(nl_mnv(SpectralField.zeros(g)).coeffs == 0)
    c = np.zeros(g.shape, complex)
    c[1, 1] = c[-1, -1] = 0.5
    F = SpectralField(g, c, True)
    out = nl_mnv(F)
    assert out.real
    ref = mnv_oracle(F)
    assert np.max(np.abs(out.coeffs - ref)) < 1e-11 * np.max(np.abs(ref))
    # complex data on an 8x8 band (|j|, |m| < 4 on a 16 grid)
    gc = GridSpec(16, 16, 2 * np.pi, 2 * np.pi)
    Fc = random_field(gc, rng, band=gc.band_mask(0.5), real=False)
    assert np.max(np.abs(nl_mnv(Fc).coeffs - mnv_oracle(Fc))) < 1e-11 * np.max(np.abs(mnv_oracle(Fc)))
    with pytest.raises(ValueError):
        nl_mnv(Fc, require_real=True)


def test_nl_mnv_homogeneity(rng):
    g = GridSpec(32, 32)
    F = random_field(g, rng, band=g.band_mask(0.5))
    for a in (0.5, -1.7, 3.0):
        lhs = nl_mnv(a * F).coeffs
        rhs = a ** 3 * nl_mnv(F).coeffs
        assert np.max(np.abs(lhs - rhs)) < 1e-12 * np.max(np.abs(rhs))
