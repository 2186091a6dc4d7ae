import math

import numpy as np
import pytest
from scipy.integrate import quad

from qpa_readout.errors import ConvergenceError, ParameterError
from qpa_readout.params import DriveSpec, PumpSpec
from qpa_readout.rates import drive_for_nbar, efficiency
from qpa_readout.trajectories import (FitModel, ensemble_model,
                                      gamma_meas_from_snr, histogram_rows,
                                      sample_records, snr_curve,
                                      t1_modified_pdf)


@pytest.fixture(scope="module")
def operating_point(device_fig4):
    pump = PumpSpec.from_gain_db(3.0, device_fig4.kappa)
    drive = drive_for_nbar(device_fig4, pump, 2.0, phi=0.0, n_add=0.4)
    return device_fig4, pump, drive


def tint_grid(device, t_max=280e-9, n=12):
    t_min = max(t_max / n, 12.0 / device.kappa)
    return np.linspace(t_min, t_max, n)


class TestT1ModifiedPdf:
    def test_normalization(self):
        mu_e, mu_g, sigma, t_int, t1 = 1.3, -0.7, 0.45, 250e-9, 4.2e-6
        total, _ = quad(lambda y: t1_modified_pdf(y, mu_e, mu_g, sigma, t_int, t1),
                        -8.0, 8.0, limit=200)
        assert total == pytest.approx(1.0, abs=1e-9)

    def test_against_jump_time_quadrature(self):
        # marginalize the exponential jump time numerically as the oracle
        mu_e, mu_g, sigma, t_int, t1 = 0.9, -0.4, 0.3, 1.5e-6, 4.2e-6

        def oracle(y):
            def integrand(t):
                m = mu_g + (mu_e - mu_g) * t / t_int
                return (math.exp(-t / t1) / t1
                        * math.exp(-0.5 * ((y - m) / sigma) ** 2)
                        / (sigma * math.sqrt(2.0 * math.pi)))
            tail, _ = quad(integrand, 0.0, t_int, limit=200)
            survive = (math.exp(-t_int / t1)
                       * math.exp(-0.5 * ((y - mu_e) / sigma) ** 2)
                       / (sigma * math.sqrt(2.0 * math.pi)))
            return survive + tail

        for y in np.linspace(-1.6, 2.0, 13):
            assert t1_modified_pdf(y, mu_e, mu_g, sigma, t_int, t1) == \
                pytest.approx(oracle(y), rel=1e-8, abs=1e-12)

    def test_negative_separation_sign_safe(self):
        got = t1_modified_pdf(np.array([0.1]), -1.0, 1.0, 0.4, 2e-6, 4.2e-6)
        assert got[0] > 0.0


class TestSampleRecords:
    def test_seeded_determinism(self, operating_point):
        dev, pump, drive = operating_point
        a = sample_records(dev, pump, drive, 4, 280e-9, seed=7)
        b = sample_records(dev, pump, drive, 4, 280e-9, seed=7)
        for ra, rb in zip(a, b):
            assert np.array_equal(ra.values, rb.values)
            assert ra.jump_time == rb.jump_time
        c = sample_records(dev, pump, drive, 4, 280e-9, seed=8)
        assert not np.array_equal(a[0].values, c[0].values)

    def test_record_structure(self, operating_point):
        dev, pump, drive = operating_point
        records = sample_records(dev, pump, drive, 6, 280e-9, seed=3)
        states = [r.true_state for r in records]
        assert states == [1, 1, 1, -1, -1, -1]
        for r in records:
            assert r.values[0] == 0.0
            assert np.all(np.diff(r.times) > 0.0)

    def test_short_window_rejected(self, operating_point):
        dev, pump, drive = operating_point
        with pytest.raises(ParameterError):
            sample_records(dev, pump, drive, 4, 5.0 / dev.kappa, seed=1)
        with pytest.raises(ParameterError):
            sample_records(dev, pump, drive, 3, 280e-9, seed=1)  # odd count

    def test_means_match_model_without_t1(self, operating_point):
        dev, pump, drive = operating_point
        model = ensemble_model(dev, pump, drive)
        t_max = 280e-9
        records = sample_records(dev, pump, drive, 4000, t_max, seed=11,
                                 include_t1=False)
        for sigma in (+1, -1):
            vals = np.array([r.values[-1] for r in records
                             if r.true_state == sigma]) / t_max
            want = model.drift[sigma]
            sem = math.sqrt(model.noise_power[sigma] / t_max / 2000)
            assert abs(np.mean(vals) - want) < 3.0 * sem

    def test_jump_times_exponential(self, operating_point):
        dev, pump, drive = operating_point
        records = sample_records(dev, pump, drive, 20000, 280e-9, seed=5)
        jumps = sum(1 for r in records if r.true_state == +1 and
                    r.jump_time is not None)
        p_jump = 1.0 - math.exp(-280e-9 / dev.t1)
        expect = 10000 * p_jump
        assert abs(jumps - expect) < 4.0 * math.sqrt(expect)


class TestSnrCurve:
    def test_snr_diffusive_scaling(self, operating_point):
        # white noise, no T1: SNR grows as sqrt(t); SNR^2 linear, R^2 > 0.999
        dev, pump, drive = operating_point
        records = sample_records(dev, pump, drive, 10000, 280e-9, seed=21,
                                 include_t1=False)
        grid = tint_grid(dev)
        fits = snr_curve(records, grid, fit_model=FitModel.DOUBLE_GAUSSIAN)
        t = np.array([f.t_int for f in fits])
        y = np.array([f.snr**2 for f in fits])
        coeffs = np.polyfit(t, y, 1)
        resid = y - np.polyval(coeffs, t)
        r2 = 1.0 - resid @ resid / np.sum((y - y.mean()) ** 2)
        assert r2 > 0.999

    def test_requires_population(self, operating_point):
        dev, pump, drive = operating_point
        records = sample_records(dev, pump, drive, 100, 280e-9, seed=2)
        with pytest.raises(ParameterError):
            snr_curve(records, tint_grid(dev), fit_model=FitModel.DOUBLE_GAUSSIAN)

    def test_t1_model_requires_t1(self, operating_point):
        dev, pump, drive = operating_point
        records = sample_records(dev, pump, drive, 2000, 280e-9, seed=2)
        with pytest.raises(ParameterError):
            snr_curve(records, tint_grid(dev), fit_model=FitModel.T1_MODIFIED)

    def test_t1_fit_recovers_jump_free_means(self, operating_point):
        dev, pump, drive = operating_point
        model = ensemble_model(dev, pump, drive)
        records = sample_records(dev, pump, drive, 6000, 280e-9, seed=13)
        fits = snr_curve(records, np.array([280e-9]),
                         fit_model=FitModel.T1_MODIFIED, t1=dev.t1)
        assert fits[0].mean_excited == pytest.approx(model.drift[+1], rel=0.05)
        assert fits[0].mean_ground == pytest.approx(model.drift[-1], rel=0.05)


class TestGammaMeasClosedLoop:
    def test_fit_recovers_analytic_rate(self, operating_point):
        dev, pump, drive = operating_point
        analytic = efficiency(dev, pump, drive).gamma_meas
        records = sample_records(dev, pump, drive, 6000, 280e-9, seed=17)
        fits = snr_curve(records, tint_grid(dev),
                         fit_model=FitModel.T1_MODIFIED, t1=dev.t1)
        fitted = gamma_meas_from_snr(fits)
        assert fitted == pytest.approx(analytic, rel=0.05)

    def test_plain_gaussian_biases_low_with_t1(self, operating_point):
        dev, pump, drive = operating_point
        analytic = efficiency(dev, pump, drive).gamma_meas
        records = sample_records(dev, pump, drive, 12000, 280e-9, seed=19)
        grid = tint_grid(dev)
        good = gamma_meas_from_snr(snr_curve(records, grid,
                                             fit_model=FitModel.T1_MODIFIED,
                                             t1=dev.t1))
        naive = gamma_meas_from_snr(snr_curve(records, grid,
                                              fit_model=FitModel.DOUBLE_GAUSSIAN))
        assert naive < good
        assert naive < 0.85 * analytic  # measured 0.77: relaxation tail bias
        assert abs(good / analytic - 1.0) < 0.05

    def test_zero_drive_zero_rate(self, device_fig4):
        pump = PumpSpec.from_gain_db(2.0, device_fig4.kappa)
        drive = DriveSpec.off(n_add=0.3)
        records = sample_records(device_fig4, pump, drive, 2200, 280e-9, seed=23)
        fits = snr_curve(records, tint_grid(device_fig4),
                         fit_model=FitModel.DOUBLE_GAUSSIAN)
        slopes = np.polyfit([f.t_int for f in fits],
                            [f.snr**2 for f in fits], 1)
        analytic = efficiency(device_fig4, pump, drive)
        assert analytic.gamma_meas == 0.0
        # fitted slope consistent with zero within sampling noise
        assert abs(slopes[0]) * 280e-9 < 0.05

    def test_halving_noise_power_doubles_rate(self, operating_point):
        dev, pump, drive = operating_point
        quiet = drive.with_(n_add=0.0, eta_loss=1.0)
        g_noisy = efficiency(dev, pump, drive).gamma_meas
        # construct the analytic scaling check: rate inversely proportional
        # to total noise power at fixed signal
        m_noisy = ensemble_model(dev, pump, drive)
        m_quiet = ensemble_model(dev, pump, quiet)
        g_quiet = efficiency(dev, pump, quiet).gamma_meas
        ratio_noise = ((m_noisy.noise_power[+1] + m_noisy.noise_power[-1])
                       / (m_quiet.noise_power[+1] + m_quiet.noise_power[-1]))
        assert g_quiet / g_noisy == pytest.approx(ratio_noise, rel=1e-12)

    def test_requires_enough_points(self, operating_point):
        dev, pump, drive = operating_point
        records = sample_records(dev, pump, drive, 2200, 280e-9, seed=29)
        fits = snr_curve(records, tint_grid(dev)[:3],
                         fit_model=FitModel.DOUBLE_GAUSSIAN)
        with pytest.raises(ParameterError):
            gamma_meas_from_snr(fits)

    def test_nonlinear_snr_detected(self, operating_point):
        dev, pump, drive = operating_point
        records = sample_records(dev, pump, drive, 2200, 280e-9, seed=31,
                                 include_t1=False)
        fits = snr_curve(records, tint_grid(dev),
                         fit_model=FitModel.DOUBLE_GAUSSIAN)
        # corrupt the curve into visible nonlinearity
        bent = [f for f in fits]
        bent[-1] = type(fits[-1])(t_int=fits[-1].t_int,
                                  mean_excited=fits[-1].mean_excited,
                                  mean_ground=fits[-1].mean_ground,
                                  sigma_excited=fits[-1].sigma_excited * 0.25,
                                  sigma_ground=fits[-1].sigma_ground * 0.25,
                                  snr=fits[-1].snr * 4.0,
                                  fit_model=fits[-1].fit_model)
        with pytest.raises(ConvergenceError):
            gamma_meas_from_snr(bent)


class TestHistogramExport:
    def test_rows_cover_both_states(self, operating_point):
        dev, pump, drive = operating_point
        records = sample_records(dev, pump, drive, 2200, 280e-9, seed=37)
        rows = histogram_rows(records, float(records[0].times[-1]))
        states = {r["state"] for r in rows}
        assert states == {"excited", "ground"}
        assert sum(r["count"] for r in rows) == 2200
