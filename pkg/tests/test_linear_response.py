import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nrpolariton import linear_response as lr


def make_params(**kwargs):
    defaults = dict(kappa_mhz=1.0, kappa1_mhz=0.5, kappa2_mhz=0.5,
                    gamma_mhz=1.0, delta_ac_mhz=0.0, c_plus=0.0, c_minus=0.0)
    defaults.update(kwargs)
    return lr.SystemParams(**defaults)


FIG2 = dict(kappa_mhz=3.7, kappa1_mhz=1.85, kappa2_mhz=1.85, gamma_mhz=2.6)


class TestTransmission:
    def test_lossless_empty_cavity_on_resonance(self):
        assert lr.transmission(make_params(), 0.0, "+") == pytest.approx(1.0)

    def test_blocked_at_high_cooperativity(self):
        # direct evaluation of the transmission formula at C = 50
        p = make_params(c_plus=50.0)
        assert lr.transmission(p, 0.0, "+") == pytest.approx(1.0 / 101**2, rel=1e-12)

    def test_far_off_resonance_vanishes(self):
        p = make_params(c_plus=50.0)
        assert lr.transmission(p, 1e6, "+") < 1e-9
        assert lr.transmission(p, -1e6, "-") < 1e-9

    def test_vectorized_matches_scalar(self):
        p = make_params(c_plus=3.0, delta_ac_mhz=1.5)
        grid = np.linspace(-5, 5, 11)
        vec = lr.transmission(p, grid, "+")
        for d, t in zip(grid, vec):
            assert t == pytest.approx(lr.transmission(p, float(d), "+"))

    def test_mirror_exchange_symmetry(self):
        a = lr.SystemParams(kappa_mhz=2.0, kappa1_mhz=0.4, kappa2_mhz=1.1,
                            gamma_mhz=1.0, c_plus=4.0)
        b = lr.SystemParams(kappa_mhz=2.0, kappa1_mhz=1.1, kappa2_mhz=0.4,
                            gamma_mhz=1.0, c_plus=4.0)
        for d in (-3.0, 0.0, 1.7):
            assert lr.transmission(a, d, "+") == pytest.approx(
                lr.transmission(b, d, "+")
            )

    def test_empty_cavity_halfwidth_is_kappa(self):
        # -3 dB full width of the C = 0 Lorentzian equals 2 kappa
        p = make_params(kappa_mhz=2.5, kappa1_mhz=1.25, kappa2_mhz=1.25)
        peak = lr.transmission(p, 0.0, "+")
        assert lr.transmission(p, 2.5, "+") == pytest.approx(peak / 2, rel=1e-12)

    @settings(max_examples=60, deadline=None)
    @given(
        st.floats(0.1, 100), st.floats(0.01, 0.5), st.floats(0.01, 0.5),
        st.floats(0.1, 100), st.floats(-200, 200), st.floats(0, 1000),
        st.floats(-500, 500),
    )
    def test_passivity(self, kappa, f1, f2, gamma, dac, c, delta):
        p = lr.SystemParams(
            kappa_mhz=kappa, kappa1_mhz=f1 * kappa, kappa2_mhz=f2 * kappa,
            gamma_mhz=gamma, delta_ac_mhz=dac, c_plus=c,
        )
        t = lr.transmission(p, delta, "+")
        assert 0.0 <= t <= 1.0

    def test_invariants_enforced(self):
        with pytest.raises(lr.LinearResponseError):
            make_params(kappa_mhz=0.5)  # kappa < kappa1 + kappa2
        with pytest.raises(lr.LinearResponseError):
            make_params(c_plus=-1.0)


class TestIsolation:
    def test_reciprocal_when_balanced(self):
        p = make_params(c_plus=7.0, c_minus=7.0)
        for d in (-2.0, 0.0, 3.3):
            ratio, db = lr.isolation(p, d)
            assert ratio == pytest.approx(1.0, rel=1e-12)
            assert db == pytest.approx(0.0, abs=1e-10)

    def test_thirty_db_threshold_cooperativity(self):
        # (1 + 2 * 15.3)^2 at the dark point
        p = make_params(c_plus=15.3)
        ratio, db = lr.isolation(p, 0.0)
        assert ratio == pytest.approx(31.6**2, rel=1e-12)
        assert db == pytest.approx(10 * math.log10(998.56), abs=1e-9)
        assert db == pytest.approx(30.0, abs=0.01)

    def test_fitted_cooperativity_isolation(self):
        p = make_params(c_plus=33.8)
        ratio, db = lr.isolation(p, 0.0)
        assert ratio == pytest.approx(68.6**2, rel=1e-12)
        assert db == pytest.approx(36.73, abs=0.01)

    def test_swap_inverts_isolation(self):
        p = make_params(c_plus=5.0, c_minus=1.0, delta_ac_mhz=2.0)
        q = make_params(c_plus=1.0, c_minus=5.0, delta_ac_mhz=2.0)
        for d in (-4.0, 0.0, 2.5):
            assert lr.isolation(p, d)[0] == pytest.approx(
                1.0 / lr.isolation(q, d)[0], rel=1e-12
            )

    def test_dark_point_equals_ideal_ratio(self):
        p = make_params(c_plus=8.0, c_minus=2.0)
        ratio, _ = lr.isolation(p, 0.0)
        expected = lr.ideal_isolation(2.0) / lr.ideal_isolation(8.0)
        # I = T-/T+ and each dark-point transmission is 1/(1+2C)^2
        assert ratio == pytest.approx(1.0 / expected, rel=1e-12)


class TestIdealIsolation:
    def test_zero_cooperativity(self):
        assert lr.ideal_isolation(0.0) == 1.0

    def test_paper_threshold(self):
        assert lr.ideal_isolation(15.3) == pytest.approx(998.56, abs=1e-10)

    def test_c50(self):
        assert lr.ideal_isolation(50.0) == 101**2
        assert 10 * math.log10(lr.ideal_isolation(50.0)) == pytest.approx(
            40.09, abs=0.01
        )


class TestSweeps:
    def test_single_point_grid_matches_transmission(self):
        p = make_params(c_plus=3.0)
        res = lr.sweep_1d(p, [0.7])
        assert res.t_plus[0] == pytest.approx(lr.transmission(p, 0.7, "+"))

    def test_sweep2d_minus_branch_ignores_delta_ac(self):
        p = make_params(c_plus=10.0, c_minus=0.0)
        deltas = np.linspace(-5, 5, 21)
        rows = lr.sweep_2d(p, deltas, np.linspace(-10, 10, 5))
        bare = lr.transmission(make_params(), deltas, "+")
        for _, res in rows:
            assert np.allclose(res.t_minus, bare, rtol=1e-12)

    def test_sweep2d_row_order_and_thread_independence(self, monkeypatch):
        p = make_params(c_plus=10.0)
        deltas = np.linspace(-8, 8, 33)
        dacs = np.linspace(-4, 4, 7)
        monkeypatch.setenv(lr.THREADS_ENV, "1")
        serial = lr.sweep_2d(p, deltas, dacs)
        monkeypatch.setenv(lr.THREADS_ENV, "4")
        threaded = lr.sweep_2d(p, deltas, dacs)
        for (d1, r1), (d2, r2) in zip(serial, threaded):
            assert d1 == d2
            assert np.array_equal(r1.t_plus, r2.t_plus)

    def test_non_monotonic_grid_rejected(self):
        with pytest.raises(lr.LinearResponseError):
            lr.sweep_1d(make_params(), [0.0, 1.0, 0.5])

    def test_isolation_underflow_sentinel(self):
        # gigantic cooperativity drives T+ below the underflow guard
        p = make_params(c_plus=1e16)
        res = lr.sweep_1d(p, np.linspace(-0.1, 0.1, 3))
        assert np.isinf(res.isolation_db[1])


class TestPolaritonPeaks:
    def test_bare_cavity_single_peak(self):
        res = lr.sweep_1d(make_params(), np.linspace(-5, 5, 501))
        peaks = lr.find_polariton_peaks(res, "+")
        assert len(peaks) == 1
        assert abs(peaks[0][0]) < 0.01

    def test_fig1_splitting(self):
        # C = 50, kappa = gamma = 1: peaks at +-10
        p = make_params(c_plus=50.0)
        res = lr.sweep_1d(p, np.linspace(-20, 20, 4001))
        peaks = lr.find_polariton_peaks(res, "+")
        assert len(peaks) == 2
        # finite linewidths push the maxima ~0.5% outside +-g_eff
        assert peaks[0][0] == pytest.approx(-10.0, rel=0.01)
        assert peaks[1][0] == pytest.approx(10.0, rel=0.01)

    def test_fig2_splitting(self):
        p = lr.SystemParams(**FIG2, c_plus=33.8)
        res = lr.sweep_1d(p, np.linspace(-60, 60, 6001))
        peaks = lr.find_polariton_peaks(res, "+")
        assert len(peaks) == 2
        splitting = peaks[1][0] - peaks[0][0]
        assert splitting == pytest.approx(
            lr.vacuum_rabi_splitting(3.7, 2.6, 33.8), rel=0.01
        )
        assert lr.vacuum_rabi_splitting(3.7, 2.6, 33.8) == pytest.approx(51.0, abs=0.1)

    def test_splitting_converges_at_large_c(self):
        for c in (30.0, 100.0, 300.0):
            p = make_params(c_plus=c)
            geff = math.sqrt(2 * c)
            res = lr.sweep_1d(p, np.linspace(-3 * geff, 3 * geff, 8001))
            peaks = lr.find_polariton_peaks(res, "+")
            assert len(peaks) == 2
            assert peaks[1][0] - peaks[0][0] == pytest.approx(2 * geff, rel=0.01)

    def test_flat_input_rejected(self):
        res = lr.SpectrumResult(
            deltas_mhz=np.linspace(0, 1, 5), t_plus=np.ones(5),
            t_minus=np.ones(5), isolation_db=np.zeros(5),
        )
        with pytest.raises(lr.LinearResponseError):
            lr.find_polariton_peaks(res, "+")


class TestFitSpectrum:
    def test_noiseless_roundtrip(self):
        truth = lr.SystemParams(**FIG2, c_plus=33.8)
        data = lr.sweep_1d(truth, np.linspace(-50, 50, 201))
        initial = lr.SystemParams(**FIG2, c_plus=20.0)
        fit = lr.fit_spectrum(data, initial, free=("c_plus",))
        assert fit.converged
        assert fit.params.c_plus == pytest.approx(33.8, rel=1e-4)

    def test_noisy_roundtrip_within_3_percent(self):
        truth = lr.SystemParams(**FIG2, c_plus=33.8)
        data = lr.sweep_1d(truth, np.linspace(-50, 50, 201))
        rng = np.random.default_rng(42)
        noisy = lr.SpectrumResult(
            deltas_mhz=data.deltas_mhz,
            t_plus=data.t_plus * (1 + 0.01 * rng.normal(size=data.t_plus.size)),
            t_minus=data.t_minus,
            isolation_db=data.isolation_db,
        )
        initial = lr.SystemParams(**FIG2, c_plus=20.0)
        fit = lr.fit_spectrum(noisy, initial, free=("c_plus",))
        assert abs(fit.params.c_plus - 33.8) / 33.8 < 0.03

    def test_reports_effective_atom_number(self):
        truth = lr.SystemParams(**FIG2, c_plus=34.548)
        data = lr.sweep_1d(truth, np.linspace(-50, 50, 201))
        initial = lr.SystemParams(**FIG2, c_plus=25.0)
        fit = lr.fit_spectrum(data, initial, free=("c_plus",), g0_mhz=1.7)
        assert fit.n_eff == pytest.approx(230.0, rel=1e-3)

    def test_all_zero_spectrum_rejected(self):
        zeros = lr.SpectrumResult(
            deltas_mhz=np.linspace(-5, 5, 50), t_plus=np.zeros(50),
            t_minus=np.zeros(50), isolation_db=np.zeros(50),
        )
        with pytest.raises(lr.LinearResponseError):
            lr.fit_spectrum(zeros, make_params(c_plus=1.0), free=("c_plus",))

    def test_too_few_points_rejected(self):
        truth = make_params(c_plus=2.0)
        data = lr.sweep_1d(truth, np.linspace(-1, 1, 8))
        with pytest.raises(lr.LinearResponseError):
            lr.fit_spectrum(data, truth, free=("c_plus", "gamma_mhz"))


class TestIsolationBandwidth:
    def test_exceeds_ten_mhz_at_fig2_cooperativity(self):
        p = lr.SystemParams(**FIG2, c_plus=33.8, c_minus=0.0)
        width = lr.isolation_bandwidth(p, 20.0)
        assert width > 10.0
        assert width == pytest.approx(14.0, abs=1.5)

    def test_marginal_threshold_narrow_band(self):
        p = lr.SystemParams(**FIG2, c_plus=15.3, c_minus=0.0)
        width = lr.isolation_bandwidth(p, 29.9)
        assert 0.0 < width < 2.0

    def test_threshold_above_peak_rejected(self):
        p = lr.SystemParams(**FIG2, c_plus=15.3, c_minus=0.0)
        with pytest.raises(lr.LinearResponseError):
            lr.isolation_bandwidth(p, 35.0)
