import numpy as np
import pytest

from nvlab.estimates import (EstimateReport, TrialRecord, _from_slices, _slices, _xsb_lattice,
                             bilinear_test, ckz_l4_test, dispersive_decay_test, lattice_product_norm,
                             log2_slope, measure_bound_check, random_spacetime_field, shell_datum,
                             strichartz_ratio, strichartz_test, trilinear_test, xsb_bilinear_test)
from nvlab.littlewood_paley import NormSpec, xsb_norm
from nvlab.operators import nl1_bilinear_coeffs
from nvlab.spectral import GridSpec, SpaceTimeField, SpaceTimeGridSpec


def test_log2_slope_recovers_exponent():
    x = np.arange(3, 8)
    assert log2_slope(x, 5.0 * 2.0 ** (0.3 * x)) == pytest.approx(0.3, abs=1e-12)
    with pytest.raises(ValueError):
        log2_slope([1.0], [1.0])
    with pytest.raises(ValueError):
        log2_slope([1.0, 2.0], [1.0, 0.0])


def test_zero_rhs_marks_trial_skipped():
    rec = TrialRecord.make(1.0, 0, 0.0, 0.0)
    assert rec.skipped and np.isnan(rec.ratio)
    rep = EstimateReport("x", {}, [rec, TrialRecord.make(1.0, 1, 2.0, 4.0)])
    np.testing.assert_array_equal(rep.ratios(), [0.5])


@pytest.mark.parametrize("p, q, gamma", [(4, 4, 0), (5, 5, 0.1), (3, 1e9, 0), (6, np.inf, 0.5),
                                         (8, 4, -0.125)])
def test_strichartz_rejects_inadmissible(p, q, gamma):
    with pytest.raises(ValueError):
        strichartz_test(p, q, gamma, trials=1)


def test_strichartz_accepts_admissible_pairs():
    # 3/4 + 2/8 = 1: the pair (4, 8) is admissible
    strichartz_ratio(shell_datum(GridSpec(64, 64, 32.0, 32.0), 0), 4, 8, 0.0, 0.5, 3)


def test_strichartz_ratio_is_scale_invariant():
    # phi(x / 2) on a box twice as large, with the time window scaled by 2^3, is an exact rescaling
    g1 = GridSpec(64, 64, 64.0, 64.0)
    g2 = GridSpec(64, 64, 128.0, 128.0)
    phi1 = shell_datum(g1, 0, np.random.default_rng(3))
    phi2 = shell_datum(g2, 0, np.random.default_rng(3), scale=2.0)
    for p, q, gamma in ((5, 5, 0.0), (6, 4, 0.0), (6, 6, 1 / 6)):
        a = np.divide(*strichartz_ratio(phi1, p, q, gamma, 2.0, 33))
        b = np.divide(*strichartz_ratio(phi2, p, q, gamma, 16.0, 33))
        assert a == pytest.approx(b, rel=1e-10)


def test_strichartz_zero_datum_is_skipped():
    rep = strichartz_test(5, 5, trials=1, nx=64, box=64.0, t_max=1.0, n_times=5, zero_data=True)
    assert all(t.skipped for t in rep.trials)
    assert not rep.verdict


def test_ckz_zero_datum_is_skipped():
    rep = ckz_l4_test(trials=1, box=32.0, nx=64, t_max=0.5, n_times=5, transfer_trials=1, zero_data=True)
    assert all(t.skipped for t in rep.trials)


def test_dispersive_preconditions():
    with pytest.raises(ValueError):
        dispersive_decay_test(t_list=(0, 1, 2, 4))
    with pytest.raises(ValueError):
        dispersive_decay_test(t_list=(1, 4, 2, 8))
    with pytest.raises(ValueError):
        dispersive_decay_test(k=3, box_factor=8, nx=64)


def test_index_preconditions():
    with pytest.raises(ValueError):
        bilinear_test(k_f_list=(3, 4, 5, 6), k_g=2)
    with pytest.raises(ValueError):
        trilinear_test(1, k_list=(4, 5, 6, 7), k_fixed=3)
    with pytest.raises(ValueError):
        trilinear_test(2, k_list=(1, 2, 3, 6), k_fixed=7)
    with pytest.raises(ValueError):
        trilinear_test(3)
    with pytest.raises(ValueError):
        measure_bound_check(3, 2)


def test_two_mode_product_on_lattice():
    grid = GridSpec(16, 16, 2 * np.pi, 2 * np.pi)
    st = SpaceTimeGridSpec(grid, 32, 2 * np.pi)
    ca = np.zeros(st_shape := (32, 16, 16), complex)
    cb = np.zeros(st_shape, complex)
    ca[3, 1, 2] = 0.7 - 0.2j
    cb[5, 2, 15] = 1.5j
    a = SpaceTimeField(st, ca, False)
    b = SpaceTimeField(st, cb, False)
    expected = abs(0.7 - 0.2j) * 1.5 * np.sqrt(st.measure)
    assert lattice_product_norm(a, b) == pytest.approx(expected, rel=1e-13)


def test_xsb_lattice_has_no_time_aliasing(rng):
    band = 4
    st = _xsb_lattice(band, 2, 16.0)
    U = random_spacetime_field(st, rng, 0.75, 0.6, band, "modulation", modulation_cap=16.0)
    V = random_spacetime_field(st, rng, 0.75, 0.6, band, "flow", modulation_cap=16.0)
    out = _from_slices(st, nl1_bilinear_coeffs(_slices(U), _slices(V), st.grid))
    # twice as many time samples: the same coefficients padded with zeros
    st2 = SpaceTimeGridSpec(st.grid, 2 * st.nt, st.t_window)

    def pad(F):
        c = np.zeros((st2.nt,) + F.coeffs.shape[1:], complex)
        h = st.nt // 2
        c[:h], c[-h:] = F.coeffs[:h], F.coeffs[-h:]
        return SpaceTimeField(st2, c, False, check_band=False)

    out2 = _from_slices(st2, nl1_bilinear_coeffs(_slices(pad(U)), _slices(pad(V)), st.grid))
    spec = NormSpec(0.75, -0.3)
    # the windowed flow has super-algebraically small (not zero) tails in tau
    assert xsb_norm(out, spec) == pytest.approx(xsb_norm(out2, spec), rel=1e-8)


def test_random_field_band_and_kind(rng):
    st = _xsb_lattice(6, 2, 16.0)
    for kind in ("modulation", "flow"):
        F = random_spacetime_field(st, rng, 0.75, 0.6, 3, kind, modulation_cap=16.0)
        xi, mu = st.grid.wavenumbers()
        outside = np.hypot(xi, mu) >= 3
        assert np.all(F.coeffs[:, outside] == 0)
    with pytest.raises(ValueError):
        random_spacetime_field(st, rng, 0.75, 0.6, 3, "other")


def test_xsb_ratio_is_amplitude_invariant():
    a = xsb_bilinear_test(trials=2, band=4, seed=5)
    b = xsb_bilinear_test(trials=2, band=4, seed=5, amplitude=3.0)
    np.testing.assert_allclose(a.ratios(), b.ratios(), rtol=1e-12)
    with pytest.raises(ValueError):
        xsb_bilinear_test(s=0.5)
    with pytest.raises(ValueError):
        xsb_bilinear_test(eps=0.3)


def test_measure_check_reports_factorization():
    rep = measure_bound_check(5, 2, trials=3, n_strata=2 ** 12, seed=1)
    assert len(rep.trials) == 3
    assert rep.summary["max_a_ratio"] <= 10
    assert all(t.lhs > 0 for t in rep.trials)


def test_xsb_zero_inputs_give_zero():
    rep = xsb_bilinear_test(trials=1, band=4, amplitude=0.0)
    assert all(t.lhs == 0.0 and t.skipped for t in rep.trials)
