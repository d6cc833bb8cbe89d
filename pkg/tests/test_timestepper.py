import json

import numpy as np
import pytest

from nvlab.fieldio import read_fields, validate_manifest
from nvlab.operators import linear_propagate, reflect
from nvlab.spectral import GridSpec, SpectralField, random_field
from nvlab.timestepper import (EvolutionConfig, EvolutionError, PicardConfig, Trajectory,
                               duhamel_map, dump_trajectory, etdrk4_coefficients, evolve,
                               picard_iterate)

GRID = GridSpec(32, 32, 2 * np.pi, 2 * np.pi)


def smooth_datum(rng, amp=1.0, radius=4.0, grid=GRID):
    xi, mu = grid.wavenumbers()
    band = (xi ** 2 + mu ** 2 <= radius ** 2) & (xi ** 2 + mu ** 2 > 0)
    F = random_field(grid, rng, band=band)
    sup = np.abs(np.fft.ifft2(F.coeffs) * grid.nx * grid.ny).max()
    return F * (amp / sup)


def test_config_validation():
    with pytest.raises(ValueError):
        EvolutionConfig(dt=0.0)
    with pytest.raises(ValueError):
        EvolutionConfig(t_end=-1.0)
    with pytest.raises(ValueError):
        PicardConfig(delta=1.5)
    with pytest.raises(ValueError):
        PicardConfig(n_iter=0)


def test_phase_guard(rng):
    F = smooth_datum(rng)
    with pytest.raises(ValueError):
        evolve(F, EvolutionConfig(dt=0.5, t_end=1.0))


def test_etdrk4_coefficients_small_argument():
    # for L = 0 the phi functions reduce to dt/2, dt/6, dt/3, dt/6
    E, E2, Q, f1, f2, f3 = etdrk4_coefficients(np.zeros(1), 0.1)
    assert Q[0] == pytest.approx(0.05, rel=1e-13)
    assert f1[0] == pytest.approx(0.1 / 6, rel=1e-13)
    assert f2[0] == pytest.approx(0.1 / 3 / 2, rel=1e-13)
    assert f3[0] == pytest.approx(0.1 / 6, rel=1e-13)


@pytest.mark.parametrize("integrator", ["ETDRK4", "IFRK4"])
def test_linear_run_matches_propagator(rng, integrator):
    F = smooth_datum(rng, radius=8.0)
    cfg = EvolutionConfig(dt=0.002, t_end=0.7, nonlinear=False, integrator=integrator)
    tr = evolve(F, cfg)
    ref = linear_propagate(F, 0.7)
    assert np.max(np.abs(tr.final.coeffs - ref.coeffs)) < 1e-10 * np.max(np.abs(F.coeffs))


def test_zero_datum():
    tr = evolve(SpectralField.zeros(GRID), EvolutionConfig(dt=0.002, t_end=0.1))
    assert np.all(tr.coeffs == 0)


def test_time_reversal_linear(rng):
    F = smooth_datum(rng, radius=8.0)
    cfg = EvolutionConfig(dt=0.002, t_end=1.0, nonlinear=False)
    fwd = evolve(F, cfg).final
    back = reflect(evolve(reflect(fwd), cfg).final)
    assert np.max(np.abs(back.coeffs - F.coeffs)) < 1e-10 * np.max(np.abs(F.coeffs))


def test_mean_and_realness(rng):
    F = smooth_datum(rng, amp=0.8)
    F.coeffs[0, 0] = 0.37
    tr = evolve(F, EvolutionConfig(dt=2e-3, t_end=0.5))
    assert np.max(np.abs(tr.coeffs[:, 0, 0] - 0.37)) < 1e-10
    vals = np.fft.ifft2(tr.coeffs, axes=(1, 2))
    assert np.max(np.abs(vals.imag)) < 1e-12 * np.max(np.abs(vals.real))


def test_mnv_runs_and_is_cubic(rng):
    F = smooth_datum(rng, amp=0.2, radius=3.0)
    tr = evolve(F, EvolutionConfig(dt=2e-3, t_end=0.2, equation="mNV"))
    dev = (tr.final - linear_propagate(F, 0.2)).l2_norm()
    tr2 = evolve(0.5 * F, EvolutionConfig(dt=2e-3, t_end=0.2, equation="mNV"))
    dev2 = (tr2.final - linear_propagate(0.5 * F, 0.2)).l2_norm()
    assert dev / dev2 == pytest.approx(8.0, rel=0.05)


def test_blowup_guard(rng):
    F = smooth_datum(rng, amp=1e4, radius=4.0)
    with pytest.raises(EvolutionError) as info:
        evolve(F, EvolutionConfig(dt=1e-3, t_end=1.0))
    assert info.value.time > 0


def test_epsilon_squared_scaling(rng):
    F0 = smooth_datum(rng)
    dev = []
    for eps in (0.1, 0.05):
        F = eps * F0
        tr = evolve(F, EvolutionConfig(dt=2e-3, t_end=1.0))
        dev.append((tr.final - linear_propagate(F, 1.0)).l2_norm())
    assert dev[0] / dev[1] == pytest.approx(4.0, abs=0.5)


def test_duhamel_trivial_cases(rng):
    times = np.linspace(0, 0.1, 11)
    zero = Trajectory(GRID, times, np.zeros((11,) + GRID.shape))
    F = smooth_datum(rng)
    out = duhamel_map(zero, F)
    for t, G in out:
        assert np.allclose(G.coeffs, linear_propagate(F, t).coeffs, atol=1e-15)
    out = duhamel_map(zero, SpectralField.zeros(GRID))
    assert np.all(out.coeffs == 0)


def test_duhamel_fixed_point(rng):
    F = smooth_datum(rng, amp=0.5)
    tr = evolve(F, EvolutionConfig(dt=5e-4, t_end=0.1))
    d = duhamel_map(tr, F)
    err = np.sqrt(GRID.area * np.max(np.sum(np.abs(d.coeffs - tr.coeffs) ** 2, axis=(1, 2))))
    assert err < 1e-8 * F.l2_norm()


def test_duhamel_grid_mismatch(rng):
    times = np.linspace(0, 0.1, 5)
    tr = Trajectory(GRID, times, np.zeros((5,) + GRID.shape))
    with pytest.raises(ValueError):
        duhamel_map(tr, SpectralField.zeros(GridSpec(16, 16)))


def test_picard(rng):
    res = picard_iterate(SpectralField.zeros(GRID), PicardConfig(n_iter=3))
    assert np.all(res.differences == 0)
    F = 1e-3 * smooth_datum(rng)
    res = picard_iterate(F, PicardConfig(delta=0.1, n_iter=5))
    assert res.contracted
    r = res.ratios()[1:]
    assert np.all(r[np.isfinite(r)] <= 0.5)
    tr = evolve(F, EvolutionConfig(dt=0.1 / 200, t_end=0.1))
    diff = (tr.final - res.trajectory.final).l2_norm()
    assert diff < 1e-6 * F.l2_norm()


def test_picard_reports_divergence(rng):
    F = 300.0 * smooth_datum(rng, radius=8.0)
    res = picard_iterate(F, PicardConfig(delta=1.0, n_iter=8, n_samples=101))
    assert not res.contracted


def test_dump_round_trip(tmp_path, rng):
    F = smooth_datum(rng)
    tr = evolve(F, EvolutionConfig(dt=0.002, t_end=0.01))
    man = dump_trajectory(tr, tmp_path, {"dt": 0.002})
    assert validate_manifest(man)
    fields = read_fields(tmp_path / "trajectory.nvf")
    assert len(fields) == len(tr)
    assert np.array_equal(fields[-1].coeffs, tr.final.coeffs)
    doc = json.loads(man.read_text())
    assert doc["config"]["grid"]["nx"] == 32
