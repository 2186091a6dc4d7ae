"""Synthetic steady-state homodyne records, histogram fits, and SNR curves.

Records are integrated-signal time series: Y(t) = integral of the measured
output quadrature up to t. In the white-noise (zero-frequency) approximation,
valid for integration windows much longer than 1/kappa, each record is a
Brownian path with state-conditioned drift <Q>_sigma and diffusion set by the
zero-frequency noise power S_QQ,sigma[0] (downstream chain included).
Excited-state records relax to the ground drift at an exponentially
distributed jump time (zero-temperature T1 only).

Seeding: record i of a batch draws its generator as
``Philox(SeedSequence(seed).spawn(n_total)[i])``, so batches are
embarrassingly parallel and bit-reproducible regardless of evaluation order.

SNR convention: SNR(t_int) = |mu_e - mu_g| / (sigma_e + sigma_g) from the
per-state fits of time-averaged values Y(t_int)/t_int. With this convention
the calibrated measurement rate equals the slope of SNR^2(t_int) exactly
(see :mod:`qpa_readout.rates`); the T1-corrected fit makes the estimate
independent of relaxation events.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize
from scipy.special import erf

from .errors import ConvergenceError, ParameterError
from .gaussian import output_mean, output_noise_matrix
from .params import DeviceParams, DriveSpec, PumpSpec
from .rates import GAMMA_MEAS_CALIBRATION


class FitModel(enum.Enum):
    DOUBLE_GAUSSIAN = "double-gaussian"
    T1_MODIFIED = "t1-modified"


@dataclass(frozen=True)
class MeasurementRecord:
    """One integrated weak-measurement record.

    ``times`` and ``values`` hold the cumulative integral of the signal
    quadrature (value 0 at t = 0); ``true_state`` is the prepared sigma;
    ``jump_time`` the T1 relaxation instant if it occurred inside the record.
    """

    times: np.ndarray
    values: np.ndarray
    true_state: int
    jump_time: float | None
    seed: int

    def __post_init__(self) -> None:
        if self.values[0] != 0.0:
            raise ParameterError("integrated record must start at 0")
        if np.any(np.diff(self.times) <= 0.0):
            raise ParameterError("sample times must be strictly increasing")

    def value_at(self, t: float) -> float:
        """Integrated value at a grid time (must match a sample time)."""
        idx = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[idx] - t) > 1e-9 * max(t, self.times[-1]):
            raise ParameterError(f"t={t} is not on the record grid")
        return float(self.values[idx])


@dataclass(frozen=True)
class HistogramFit:
    """Per-integration-time double-histogram fit."""

    t_int: float
    mean_excited: float
    mean_ground: float
    sigma_excited: float
    sigma_ground: float
    snr: float
    fit_model: FitModel

    def __post_init__(self) -> None:
        if self.sigma_excited <= 0.0 or self.sigma_ground <= 0.0:
            raise ParameterError("fitted sigmas must be positive")
        if self.snr < 0.0:
            raise ParameterError("snr must be >= 0")


@dataclass(frozen=True)
class RecordEnsembleModel:
    """Conditioned drift and diffusion used by the sampler (and tests)."""

    drift: dict
    noise_power: dict
    t1: float


def ensemble_model(device: DeviceParams, pump: PumpSpec,
                   drive: DriveSpec) -> RecordEnsembleModel:
    """Signal-quadrature drift and zero-frequency noise power per qubit state."""
    phi = drive.phi
    e_q = np.array([-math.sin(phi), math.cos(phi)])
    n_eff = drive.n_add_effective
    drift = {}
    power = {}
    for sigma in (+1, -1):
        drift[sigma] = float(e_q @ output_mean(device, pump, drive, sigma))
        power[sigma] = float(e_q @ output_noise_matrix(device, pump, sigma) @ e_q) + n_eff
    return RecordEnsembleModel(drift=drift, noise_power=power, t1=device.t1)


def sample_records(device: DeviceParams, pump: PumpSpec, drive: DriveSpec,
                   n_records: int, t_max: float, seed: int,
                   n_steps: int = 140,
                   include_t1: bool = True) -> list[MeasurementRecord]:
    """Draw ``n_records`` records (half excited, half ground), each of length t_max.

    Requires t_max * kappa >= 10, the validity edge of the white-noise
    approximation. ``include_t1=False`` simulates an idealized jump-free
    ensemble (T1 -> infinity).
    """
    if n_records < 1:
        raise ParameterError("n_records must be >= 1")
    if n_records % 2 != 0:
        raise ParameterError("n_records must be even (half per qubit state)")
    if t_max * device.kappa < 10.0:
        raise ParameterError(
            f"t_max * kappa = {t_max * device.kappa:.2f} < 10; integration "
            "windows this short invalidate the white-noise approximation"
        )
    model = ensemble_model(device, pump, drive)
    times = np.linspace(0.0, t_max, n_steps + 1)
    dt = times[1] - times[0]
    children = np.random.SeedSequence(seed).spawn(n_records)
    records: list[MeasurementRecord] = []
    for i in range(n_records):
        sigma = +1 if i < n_records // 2 else -1
        rng = np.random.Generator(np.random.Philox(children[i]))
        jump = None
        if sigma == +1 and include_t1:
            t_j = float(rng.exponential(device.t1))
            if t_j < t_max:
                jump = t_j
        drift_hi = model.drift[sigma]
        drift_lo = model.drift[-1]
        increments = np.empty(n_steps)
        noise = rng.standard_normal(n_steps)
        for k in range(n_steps):
            t0, t1 = times[k], times[k + 1]
            if jump is None or jump >= t1:
                mu = drift_hi * dt
                s2 = model.noise_power[sigma] * dt
            elif jump <= t0:
                mu = drift_lo * dt
                s2 = model.noise_power[-1] * dt
            else:
                mu = drift_hi * (jump - t0) + drift_lo * (t1 - jump)
                s2 = (model.noise_power[sigma] * (jump - t0)
                      + model.noise_power[-1] * (t1 - jump))
            increments[k] = mu + math.sqrt(s2) * noise[k]
        values = np.concatenate([[0.0], np.cumsum(increments)])
        records.append(MeasurementRecord(times=times, values=values,
                                         true_state=sigma, jump_time=jump,
                                         seed=seed))
    return records


# --------------------------------------------------------------------------
# histogram models
# --------------------------------------------------------------------------

def _gauss_pdf(y, mu, sigma):
    return np.exp(-0.5 * ((y - mu) / sigma) ** 2) / (sigma * math.sqrt(2.0 * math.pi))


def t1_modified_pdf(y, mu_e: float, mu_g: float, sigma: float, t_int: float,
                    t1: float) -> np.ndarray:
    """Density of the time-averaged excited-state signal with T1 decay.

    A record that jumps at time t has mean mu_g + (mu_e - mu_g) t / t_int;
    marginalizing the exponential jump time against the Gaussian noise gives

        P(y) = exp(-t_int/T1) N(y; mu_e, sigma^2)
             + a exp(-a (y - mu_g) + a^2 sigma^2 / 2)
               * [erf((mu_e - y + a sigma^2)/(sqrt(2) sigma))
                  - erf((mu_g - y + a sigma^2)/(sqrt(2) sigma))] / 2,

    with a = t_int / (T1 (mu_e - mu_g)). T1 is fixed, not fitted.
    """
    y = np.asarray(y, dtype=float)
    delta = mu_e - mu_g
    if delta == 0.0:
        return _gauss_pdf(y, mu_e, sigma)
    a = t_int / (t1 * delta)
    survive = math.exp(-t_int / t1)
    exponent = np.clip(-a * (y - mu_g) + 0.5 * a * a * sigma * sigma, -700.0, 700.0)
    s2 = math.sqrt(2.0) * sigma
    window = 0.5 * (erf((mu_e - y + a * sigma * sigma) / s2)
                    - erf((mu_g - y + a * sigma * sigma) / s2))
    jump_part = a * np.exp(exponent) * window
    return survive * _gauss_pdf(y, mu_e, sigma) + np.maximum(jump_part, 0.0)


def _fit_gaussian(values: np.ndarray) -> tuple[float, float]:
    """Maximum-likelihood Gaussian fit (sample mean and rms deviation)."""
    mu = float(np.mean(values))
    sigma = float(np.std(values))
    if sigma <= 0.0:
        raise ConvergenceError("degenerate sample: zero spread")
    return mu, sigma


def _fit_t1_modified(values: np.ndarray, mu_g: float, t_int: float,
                     t1: float) -> tuple[float, float]:
    """MLE of (mu_e, sigma) under the T1-modified model, mu_g and T1 fixed."""
    mu0, s0 = _fit_gaussian(values)

    def nll(theta):
        mu_e, log_s = theta
        sigma = math.exp(log_s)
        pdf = t1_modified_pdf(values, mu_e, mu_g, sigma, t_int, t1)
        if np.any(pdf <= 0.0) or not np.all(np.isfinite(pdf)):
            return 1e300
        return -float(np.sum(np.log(pdf)))

    res = minimize(nll, x0=np.array([mu0, math.log(s0)]), method="Nelder-Mead",
                   options={"xatol": 1e-10, "fatol": 1e-10, "maxiter": 4000})
    if not res.success:
        raise ConvergenceError(f"T1-modified fit did not converge: {res.message}")
    return float(res.x[0]), float(math.exp(res.x[1]))


def snr_curve(records: list[MeasurementRecord], t_int_grid: np.ndarray,
              fit_model: FitModel = FitModel.T1_MODIFIED,
              t1: float | None = None) -> list[HistogramFit]:
    """Histogram both prepared populations at each t_int and fit the SNR.

    Needs at least 1000 records per state. The fits run on unbinned
    time-averaged values Y(t_int)/t_int by maximum likelihood; histograms
    (Freedman-Diaconis binning) are for export only, via
    :func:`histogram_rows`.
    """
    excited = [r for r in records if r.true_state == +1]
    ground = [r for r in records if r.true_state == -1]
    if len(excited) < 1000 or len(ground) < 1000:
        raise ParameterError("need at least 1000 records per qubit state")
    if fit_model is FitModel.T1_MODIFIED and t1 is None:
        raise ParameterError("t1 must be supplied for the T1-modified fit")
    # snap requested times onto the records' sampling grid (integrated values
    # exist only there); the snapped times are what the fits report and use
    times = records[0].times
    idx = np.unique([int(np.argmin(np.abs(times - t)))
                     for t in np.asarray(t_int_grid, dtype=float)])
    idx = idx[idx > 0]
    if idx.size == 0:
        raise ParameterError("no usable integration times on the record grid")
    fits: list[HistogramFit] = []
    for t_int in times[idx]:
        y_e = np.array([r.value_at(t_int) for r in excited]) / t_int
        y_g = np.array([r.value_at(t_int) for r in ground]) / t_int
        mu_g, s_g = _fit_gaussian(y_g)
        if fit_model is FitModel.DOUBLE_GAUSSIAN:
            mu_e, s_e = _fit_gaussian(y_e)
        else:
            mu_e, s_e = _fit_t1_modified(y_e, mu_g, float(t_int), float(t1))
        snr = abs(mu_e - mu_g) / (s_e + s_g)
        fits.append(HistogramFit(t_int=float(t_int), mean_excited=mu_e,
                                 mean_ground=mu_g, sigma_excited=s_e,
                                 sigma_ground=s_g, snr=snr, fit_model=fit_model))
    return fits


def gamma_meas_from_snr(fits: list[HistogramFit],
                        min_r_squared: float = 0.98) -> float:
    """Measurement rate from the growth of SNR^2 with integration time, 1/s.

    Least-squares line through SNR^2(t_int); the slope carries the same
    global calibration as the analytic rates (the calibrated rate is exactly
    the SNR^2 slope; the raw spectral convention is half of it). Raises if
    fewer than 5 points or if SNR^2 is visibly nonlinear.
    """
    if len(fits) < 5:
        raise ParameterError("need at least 5 integration times in the linear regime")
    t = np.array([f.t_int for f in fits])
    y = np.array([f.snr**2 for f in fits])
    coeffs = np.polyfit(t, y, 1)
    yhat = np.polyval(coeffs, t)
    ss_res = float(np.sum((y - yhat) ** 2))
    ss_tot = float(np.sum((y - np.mean(y)) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0.0 else 0.0
    if r2 < min_r_squared:
        raise ConvergenceError(
            f"SNR^2(t_int) is not linear (R^2 = {r2:.4f}); outside the "
            "steady-state regime"
        )
    slope = float(coeffs[0])
    return slope * GAMMA_MEAS_CALIBRATION / 2.0


def histogram_rows(records: list[MeasurementRecord], t_int: float) -> list[dict]:
    """Freedman-Diaconis histograms of both populations for CSV export."""
    rows: list[dict] = []
    for label, sigma in (("excited", +1), ("ground", -1)):
        values = np.array([r.value_at(t_int) for r in records
                           if r.true_state == sigma]) / t_int
        counts, edges = np.histogram(values, bins="fd")
        for c, lo, hi in zip(counts, edges[:-1], edges[1:]):
            rows.append({"state": label, "t_int_s": t_int, "bin_low": float(lo),
                         "bin_high": float(hi), "count": int(c)})
    return rows
