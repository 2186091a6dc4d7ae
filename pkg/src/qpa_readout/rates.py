"""Closed-form dephasing rates, measurement rates, and efficiency algebra.

Phase and sign conventions (fixed once, used by every module)
-------------------------------------------------------------
The pump phase is fixed and the drive phase ``Phi`` varies. ``Phi = 0`` is
amplifier mode: the drive sits along the intra-cavity quadrature that the
pump squeezes, so the output noise in the signal quadrature is amplified and
dephasing is slowest. ``Phi = pi/2`` is squeezer mode: output signal-quadrature
noise is squeezed and dephasing is fastest. With

    D(lam) = (kappa/2 + lam + i*chi)^2 - 2i*chi*lam
           = (kappa/2 + lam)^2 - chi^2 + i*kappa*chi,

the total dephasing rate is

    Gamma_phi = (2 chi^2 kappa^2 P_in / hbar omega_qpa)
                * (cos^2(Phi)/|D(lam)|^2 + sin^2(Phi)/|D(-lam)|^2)
                + Gamma_parasitic,

    Gamma_parasitic = Re(sqrt(D(lam)) + sqrt(D(-lam)))/2 - kappa/2 + 1/T2*,

with principal square roots. Note the pairing: amplifier mode goes with
1/|D(+lam)|^2, the smaller coefficient. This pairing is forced by requiring
the measurement rate below and the dephasing rate to describe the *same*
operating point: in amplifier mode at zero added noise the calibrated
measurement rate equals twice the drive-induced dephasing exactly,

    |D(lam)|^2 = ((kappa/2 + lam)^2 - chi^2)^2 + kappa^2 chi^2,

which is the exact noise denominator of the amplifier-mode rate. Swapping
the pairing would violate eta <= 1.

Measurement-rate normalization
------------------------------
Two raw conventions circulate: the spectral ratio

    gamma_raw = (1/4) (<Q>_up - <Q>_down)^2 / (Sbar_up[0] + Sbar_down[0])

and the integration-time slope d(SNR^2)/dt / 4 with
SNR = |mu_e - mu_g| / (sigma_e + sigma_g). For stationary records these
differ by exactly a factor of two (gamma_raw = d(SNR^2)/dt / 2). This
package reports

    Gamma_meas = GAMMA_MEAS_CALIBRATION * gamma_raw,
    GAMMA_MEAS_CALIBRATION = 2.0,

the unique normalization for which the ideal limit (zero gain, zero added
noise, T2* -> infinity) gives eta_meas = Gamma_meas / (2 Gamma_phi) = 1
exactly, at any chi/kappa. Raw values remain available via
``calibrated=False``.
"""

from __future__ import annotations

import cmath
import enum
import math
from dataclasses import dataclass

from .constants import HBAR
from .errors import EfficiencyUndefinedError, ParameterError
from .params import DeviceParams, DriveSpec, PumpSpec, _check_below_threshold

GAMMA_MEAS_CALIBRATION: float = 2.0

_MODE_PHASE_TOL = 1e-9


class MeasurementMode(enum.Enum):
    AMPLIFIER = "amplifier"
    SQUEEZER = "squeezer"
    GENERAL = "general"


@dataclass(frozen=True)
class DParams:
    """The complex pair D(+lam), D(-lam) entering every dephasing formula."""

    d_plus: complex
    d_minus: complex


def d_of_lambda(device: DeviceParams, lam_signed: float) -> complex:
    """Evaluate D(lam) = (kappa/2 + lam + i*chi)^2 - 2i*chi*lam.

    ``lam_signed`` may be negative; only |lam_signed| < kappa/2 is required.
    """
    if abs(lam_signed) >= 0.5 * device.kappa:
        _check_below_threshold(abs(lam_signed), device.kappa)
    k2 = 0.5 * device.kappa
    return (k2 + lam_signed + 1j * device.chi) ** 2 - 2j * device.chi * lam_signed


def d_pair(device: DeviceParams, lam: float) -> DParams:
    return DParams(d_plus=d_of_lambda(device, lam), d_minus=d_of_lambda(device, -lam))


def parasitic_dephasing(device: DeviceParams, lam: float) -> float:
    """Drive-independent dephasing rate from intra-cavity squeezed vacuum, 1/s.

    Includes the intrinsic 1/T2* floor; reduces to it exactly at lam = 0 or
    chi = 0.
    """
    _check_below_threshold(lam, device.kappa)
    d = d_pair(device, lam)
    roots = cmath.sqrt(d.d_plus) + cmath.sqrt(d.d_minus)
    return 0.5 * roots.real - 0.5 * device.kappa + device.gamma_intrinsic


def total_dephasing(device: DeviceParams, pump: PumpSpec, drive: DriveSpec) -> float:
    """Total dephasing rate under a coherent measurement drive, 1/s."""
    lam = pump.lam
    _check_below_threshold(lam, device.kappa)
    flux = drive.alpha_in_flux(device)  # P_in / (hbar omega_qpa)
    d = d_pair(device, lam)
    drive_part = (
        2.0 * device.chi**2 * device.kappa**2 * flux
        * (math.cos(drive.phi) ** 2 / abs(d.d_plus) ** 2
           + math.sin(drive.phi) ** 2 / abs(d.d_minus) ** 2)
    )
    return drive_part + parasitic_dephasing(device, lam)


def dephasing_smallchi_approx(device: DeviceParams, nbar: float) -> float:
    """Standard weak-dispersive estimate 8 chi^2 nbar / kappa (zero-gain regime).

    Measurement-induced part only; no intrinsic 1/T2* term. Relative error
    against the exact zero-gain rate is 4 (chi/kappa)^2.
    """
    if nbar < 0.0:
        raise ParameterError("nbar must be >= 0")
    return 8.0 * device.chi**2 * nbar / device.kappa


def _noise_floor_amp(device: DeviceParams, lam: float) -> float:
    """Zero-frequency output noise of the measured quadrature, amplifier mode.

    In units where vacuum is 1/2; equals |D(lam)|^2 / (2 delta0^2).
    """
    k2 = 0.5 * device.kappa
    delta0 = k2 * k2 - lam * lam + device.chi**2
    num = ((k2 + lam) ** 2 - device.chi**2) ** 2 + device.chi**2 * device.kappa**2
    return 0.5 * num / delta0**2


def _noise_floor_sqz(device: DeviceParams, lam: float) -> float:
    """Squeezer-mode counterpart; equals |D(-lam)|^2 / (2 delta0^2)."""
    k2 = 0.5 * device.kappa
    delta0 = k2 * k2 - lam * lam + device.chi**2
    num = ((k2 - lam) ** 2 - device.chi**2) ** 2 + device.chi**2 * device.kappa**2
    return 0.5 * num / delta0**2


def measurement_rate_amp(device: DeviceParams, lam: float, nbar_intra: float,
                         n_add: float, calibrated: bool = False) -> float:
    """Amplifier-mode measurement rate, 1/s, at fixed intra-cavity photons.

    ``nbar_intra`` is the steady-state intra-resonator photon number, which
    is independent of the qubit state in this mode. ``n_add`` is the
    effective added noise referred to the resonator output. The default is
    the raw spectral-ratio convention; pass ``calibrated=True`` for the
    anchored normalization (see module docstring).
    """
    _check_below_threshold(lam, device.kappa)
    if nbar_intra < 0.0 or n_add < 0.0:
        raise ParameterError("nbar_intra and n_add must be >= 0")
    k2 = 0.5 * device.kappa
    signal = device.chi**2 * device.kappa * nbar_intra / ((k2 - lam) ** 2 + device.chi**2)
    raw = signal / (_noise_floor_amp(device, lam) + n_add)
    return GAMMA_MEAS_CALIBRATION * raw if calibrated else raw


def measurement_rate_sqz(device: DeviceParams, lam: float, nbar_intra: float,
                         n_add: float, calibrated: bool = False) -> float:
    """Squeezer-mode measurement rate, 1/s, at fixed intra-cavity photons."""
    _check_below_threshold(lam, device.kappa)
    if nbar_intra < 0.0 or n_add < 0.0:
        raise ParameterError("nbar_intra and n_add must be >= 0")
    k2 = 0.5 * device.kappa
    signal = device.chi**2 * device.kappa * nbar_intra / ((k2 + lam) ** 2 + device.chi**2)
    raw = signal / (_noise_floor_sqz(device, lam) + n_add)
    return GAMMA_MEAS_CALIBRATION * raw if calibrated else raw


def measurement_rate_zero_gain(device: DeviceParams, nbar_intra: float,
                               n_add: float, calibrated: bool = False) -> float:
    """Zero-gain (plain linear resonator) measurement rate, 1/s."""
    if nbar_intra < 0.0 or n_add < 0.0:
        raise ParameterError("nbar_intra and n_add must be >= 0")
    k2 = 0.5 * device.kappa
    raw = (2.0 * device.chi**2 * device.kappa * nbar_intra
           / ((k2 * k2 + device.chi**2) * (1.0 + 2.0 * n_add)))
    return GAMMA_MEAS_CALIBRATION * raw if calibrated else raw


def measurement_rate_amp_leading(device: DeviceParams, lam: float, nbar_intra: float,
                                 n_add: float, calibrated: bool = False) -> float:
    """Leading order in chi/kappa of the amplifier-mode rate."""
    from .params import g0_from_lambda

    g0 = g0_from_lambda(lam, device.kappa)
    raw = (2.0 * device.chi**2 * nbar_intra * (1.0 + math.sqrt(g0)) ** 2
           / (device.kappa * (g0 + 2.0 * n_add)))
    return GAMMA_MEAS_CALIBRATION * raw if calibrated else raw


def measurement_rate_sqz_leading(device: DeviceParams, lam: float, nbar_intra: float,
                                 n_add: float, calibrated: bool = False) -> float:
    """Leading order in chi/kappa of the squeezer-mode rate."""
    from .params import g0_from_lambda

    g0 = g0_from_lambda(lam, device.kappa)
    raw = (2.0 * device.chi**2 * nbar_intra * (1.0 + 1.0 / math.sqrt(g0)) ** 2
           / (device.kappa * (1.0 / g0 + 2.0 * n_add)))
    return GAMMA_MEAS_CALIBRATION * raw if calibrated else raw


def steady_state_nbar_conditioned(device: DeviceParams, pump: PumpSpec,
                                  drive: DriveSpec, sigma: int) -> float:
    """Intra-cavity photon number |alpha|^2 with the qubit pinned to sigma = +/-1.

    Exact steady state of the linear intra-cavity dynamics.
    """
    if sigma not in (+1, -1):
        raise ParameterError("sigma must be +1 or -1")
    lam = pump.lam
    _check_below_threshold(lam, device.kappa)
    k2 = 0.5 * device.kappa
    chi = device.chi
    delta0 = k2 * k2 - lam * lam + chi * chi
    flux = drive.alpha_in_flux(device)
    bracket = ((k2 - lam) ** 2 * math.cos(drive.phi) ** 2
               + (k2 + lam) ** 2 * math.sin(drive.phi) ** 2
               + chi * chi
               - 2.0 * sigma * chi * lam * math.sin(2.0 * drive.phi))
    return device.kappa * flux * bracket / delta0**2


def steady_state_nbar(device: DeviceParams, pump: PumpSpec, drive: DriveSpec,
                      rel_tol: float = 1e-10) -> float:
    """Qubit-state-independent intra-cavity photon number.

    Raises
    ------
    ParameterError
        If the two conditioned photon numbers differ by more than ``rel_tol``
        relative, which happens away from the pure amplifier/squeezer drive
        phases whenever both chi and lam are nonzero.
    """
    n_up = steady_state_nbar_conditioned(device, pump, drive, +1)
    n_dn = steady_state_nbar_conditioned(device, pump, drive, -1)
    scale = max(abs(n_up), abs(n_dn), 1e-300)
    if abs(n_up - n_dn) > rel_tol * scale:
        raise ParameterError(
            "intra-cavity photon number is qubit-state dependent at this "
            f"drive phase (sigma=+1: {n_up:.6g}, sigma=-1: {n_dn:.6g}); "
            "use steady_state_nbar_conditioned instead"
        )
    return 0.5 * (n_up + n_dn)


def classify_mode(phi: float) -> MeasurementMode:
    """Classify a drive phase as amplifier, squeezer, or general (pi-periodic)."""
    r = math.fmod(phi, math.pi)
    if r < 0.0:
        r += math.pi
    if min(r, math.pi - r) < _MODE_PHASE_TOL:
        return MeasurementMode.AMPLIFIER
    if abs(r - 0.5 * math.pi) < _MODE_PHASE_TOL:
        return MeasurementMode.SQUEEZER
    return MeasurementMode.GENERAL


@dataclass(frozen=True)
class RateResult:
    """Bundle of rates and efficiencies at one operating point.

    ``gamma_meas`` carries the anchored calibration; ``gamma_meas_raw`` is
    the spectral-ratio value (exactly half of it).
    """

    gamma_phi: float
    gamma_parasitic: float
    gamma_meas: float
    gamma_meas_raw: float
    eta_meas: float
    eta_qpa: float
    eta_rest: float
    mode: MeasurementMode
    nbar_intra: float


def efficiency(device: DeviceParams, pump: PumpSpec, drive: DriveSpec) -> RateResult:
    """Measurement efficiency decomposition at one operating point.

    eta_meas = Gamma_meas / (2 Gamma_phi), eta_qpa = 1 - Gamma_parasitic /
    Gamma_phi, eta_rest = eta_meas / eta_qpa. The downstream chain enters
    through the lumped ``drive.n_add_effective``. At a drive phase that is
    neither amplifier nor squeezer mode the measurement rate comes from the
    exact linear-response evaluation instead of the two closed forms.
    """
    lam = pump.lam
    gamma_phi = total_dephasing(device, pump, drive)
    gamma_par = parasitic_dephasing(device, lam)
    if gamma_phi <= 0.0:
        raise EfficiencyUndefinedError("dephasing rate vanished; efficiency undefined")
    n_eff = drive.n_add_effective
    mode = classify_mode(drive.phi)
    if mode is MeasurementMode.AMPLIFIER:
        nbar = steady_state_nbar_conditioned(device, pump, drive, +1)
        raw = measurement_rate_amp(device, lam, nbar, n_eff)
    elif mode is MeasurementMode.SQUEEZER:
        nbar = steady_state_nbar_conditioned(device, pump, drive, +1)
        raw = measurement_rate_sqz(device, lam, nbar, n_eff)
    else:
        from .gaussian import snr_and_meas_rate  # deferred to avoid an import cycle

        nbar = 0.5 * (steady_state_nbar_conditioned(device, pump, drive, +1)
                      + steady_state_nbar_conditioned(device, pump, drive, -1))
        raw = snr_and_meas_rate(device, pump, drive, calibrated=False)
    gamma_meas = GAMMA_MEAS_CALIBRATION * raw
    eta_meas = gamma_meas / (2.0 * gamma_phi)
    eta_qpa = 1.0 - gamma_par / gamma_phi
    eta_rest = eta_meas / eta_qpa if eta_qpa > 0.0 else math.nan
    return RateResult(
        gamma_phi=gamma_phi,
        gamma_parasitic=gamma_par,
        gamma_meas=gamma_meas,
        gamma_meas_raw=raw,
        eta_meas=eta_meas,
        eta_qpa=eta_qpa,
        eta_rest=eta_rest,
        mode=mode,
        nbar_intra=nbar,
    )


def drive_for_nbar(device: DeviceParams, pump: PumpSpec, nbar_target: float,
                   phi: float = 0.0, n_add: float = 0.0,
                   eta_loss: float = 1.0) -> DriveSpec:
    """Drive whose worst-case conditioned photon number equals ``nbar_target``.

    Convenience inverse of :func:`steady_state_nbar_conditioned`; used to set
    up verification suites at controlled photon number.
    """
    if nbar_target < 0.0:
        raise ParameterError("nbar_target must be >= 0")
    probe = DriveSpec(p_in=HBAR * device.omega_qpa, phi=phi, n_add=n_add,
                      eta_loss=eta_loss)  # unit photon flux
    per_flux = max(steady_state_nbar_conditioned(device, pump, probe, s) for s in (+1, -1))
    if per_flux == 0.0:
        raise ParameterError("drive does not populate the resonator at this setting")
    return DriveSpec(p_in=HBAR * device.omega_qpa * nbar_target / per_flux,
                     phi=phi, n_add=n_add, eta_loss=eta_loss)
