"""Gaussian-moment dynamics of the qubit-coherence block and the output field.

Quadrature convention: x = (a + a^dag)/sqrt(2), p = -i(a - a^dag)/sqrt(2),
vacuum variance 1/2 per quadrature. All moments produced here use it.

Two distinct objects live in this module:

* The off-diagonal coherence block of the joint qubit-resonator density
  matrix. Its evolution is closed but not trace preserving; under a Gaussian
  ansatz it reduces to six coupled complex ODEs (three covariances, two
  means, one log-norm). The long-time slope of the log-norm magnitude is the
  dephasing rate. The steady covariance satisfies a complex quadratic fixed
  point whose discriminant is exactly the D(lam) of
  :mod:`qpa_readout.rates` -- the route by which the closed-form rates are
  derived, so the ODE integration is an independent numerical path only up
  to that shared algebra (the Fock oracle is the fully independent check).

* Qubit-conditioned (sigma fixed) fields, which evolve under a proper
  Lindblad generator. Intra-cavity drift in quadrature form is

      d/dt [x, p] = A(sigma) [x, p] - sqrt(kappa) [x_in, p_in],
      A(sigma) = [[-(lam + kappa/2),  chi*sigma ],
                  [ -chi*sigma,        lam - kappa/2]],

  with the pump sign fixed so that a drive along x (Phi = 0) sits on the
  squeezed intra-cavity quadrature (amplifier mode). Output field via
  a_out = a_in + sqrt(kappa) a; zero-frequency output noise from the exact
  linear response S[0] = (1/2) M M^T with M = 1 + kappa A^{-1}.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp
from scipy.linalg import solve_continuous_lyapunov

from .errors import ConvergenceError, ParameterError
from .params import DeviceParams, DriveSpec, PumpSpec, _check_below_threshold
from .rates import GAMMA_MEAS_CALIBRATION, d_of_lambda

_ODE_RTOL = 1e-9
_ODE_ATOL = 1e-12
_SLOPE_REL_TOL = 1e-3
_MAX_WINDOW_DOUBLINGS = 10


@dataclass(frozen=True)
class GaussianBlockState:
    """Gaussian data of the coherence block (or of a conditioned state).

    ``mean`` is a length-2 complex vector (x, p) and ``cov`` a symmetric
    2x2 complex matrix; for physical conditioned states both are real (the
    block acquires genuinely complex moments whenever chi != 0).
    ``log_norm`` is log |Tr rho_block|.
    """

    mean: np.ndarray
    cov: np.ndarray
    log_norm: float

    def __post_init__(self) -> None:
        mean = np.asarray(self.mean, dtype=complex).reshape(2)
        cov = np.asarray(self.cov, dtype=complex).reshape(2, 2)
        if abs(cov[0, 1] - cov[1, 0]) > 1e-9 * max(1.0, abs(cov[0, 1])):
            raise ParameterError("covariance must be symmetric")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    @property
    def cov_real(self) -> np.ndarray:
        """Real covariance for a physical state; rejects large imaginary parts."""
        if np.max(np.abs(self.cov.imag)) > 1e-6 * max(1.0, float(np.max(np.abs(self.cov)))):
            raise ParameterError("covariance has non-negligible imaginary part")
        return self.cov.real.copy()

    @staticmethod
    def vacuum() -> "GaussianBlockState":
        return GaussianBlockState(mean=np.zeros(2, dtype=complex),
                                  cov=0.5 * np.eye(2, dtype=complex),
                                  log_norm=0.0)


@dataclass(frozen=True)
class OutputMoments:
    """Zero-frequency-filtered output-field moments conditioned on sigma.

    I is the quadrature in phase with the drive (angle Phi), Q the measured
    signal quadrature at angle delta = Phi + pi/2. Variances are in
    quadrature units squared with vacuum = 1/2 (times the optional filter
    bandwidth factor); means are in sqrt(photons/s).
    """

    mean_I: float
    mean_Q: float
    var_I: float
    var_Q: float
    cov_IQ: float
    delta: float

    def __post_init__(self) -> None:
        if self.var_I <= 0.0 or self.var_Q <= 0.0:
            raise ParameterError("output variances must be positive")
        if abs(self.cov_IQ) > math.sqrt(self.var_I * self.var_Q) * (1.0 + 1e-12):
            raise ParameterError("output covariance violates Cauchy-Schwarz")

    @property
    def covariance_matrix(self) -> np.ndarray:
        return np.array([[self.var_I, self.cov_IQ], [self.cov_IQ, self.var_Q]])


# --------------------------------------------------------------------------
# conditioned (sigma fixed) linear response
# --------------------------------------------------------------------------

def drift_matrix(device: DeviceParams, lam: float, sigma: int) -> np.ndarray:
    """Quadrature drift A(sigma) of the conditioned intra-cavity dynamics."""
    if sigma not in (+1, -1):
        raise ParameterError("sigma must be +1 or -1")
    _check_below_threshold(lam, device.kappa)
    k2 = 0.5 * device.kappa
    c = device.chi * sigma
    return np.array([[-(lam + k2), c], [-c, lam - k2]])


def _input_mean(device: DeviceParams, drive: DriveSpec) -> np.ndarray:
    amp = math.sqrt(2.0 * drive.alpha_in_flux(device))
    return amp * np.array([math.cos(drive.phi), math.sin(drive.phi)])


def intracavity_mean(device: DeviceParams, pump: PumpSpec, drive: DriveSpec,
                     sigma: int) -> np.ndarray:
    """Steady-state conditioned mean (x, p) inside the resonator."""
    a = drift_matrix(device, pump.lam, sigma)
    return math.sqrt(device.kappa) * np.linalg.solve(a, _input_mean(device, drive))


def intracavity_covariance(device: DeviceParams, lam: float, sigma: int) -> np.ndarray:
    """Steady-state conditioned covariance; drive independent (linear dynamics).

    Solves the Lyapunov fixed point A C + C A^T = -(kappa/2) 1.
    """
    a = drift_matrix(device, lam, sigma)
    return solve_continuous_lyapunov(a, -0.5 * device.kappa * np.eye(2))


def _output_response(device: DeviceParams, pump: PumpSpec, sigma: int) -> np.ndarray:
    a = drift_matrix(device, pump.lam, sigma)
    return np.eye(2) + device.kappa * np.linalg.inv(a)


def output_mean(device: DeviceParams, pump: PumpSpec, drive: DriveSpec,
                sigma: int) -> np.ndarray:
    """Steady-state conditioned output-field mean (x, p), sqrt(photons/s)."""
    return _output_response(device, pump, sigma) @ _input_mean(device, drive)


def output_noise_matrix(device: DeviceParams, pump: PumpSpec, sigma: int) -> np.ndarray:
    """Symmetrized zero-frequency output noise matrix, vacuum = 1/2 per quadrature."""
    m = _output_response(device, pump, sigma)
    return 0.5 * m @ m.T


def output_moments(device: DeviceParams, pump: PumpSpec, drive: DriveSpec,
                   sigma: int, bandwidth_factor: float = 1.0) -> OutputMoments:
    """Conditioned output moments in the drive-aligned (I, Q) frame.

    These are the moments of the field leaving the chip: the downstream
    chain (n_add, eta_loss) is deliberately not applied. The plotted
    variances carry ``bandwidth_factor`` (default 1), the documented
    zero-frequency filter normalization.
    """
    phi = drive.phi
    e_i = np.array([math.cos(phi), math.sin(phi)])
    e_q = np.array([-math.sin(phi), math.cos(phi)])
    mean = output_mean(device, pump, drive, sigma)
    noise = output_noise_matrix(device, pump, sigma)
    return OutputMoments(
        mean_I=float(e_i @ mean),
        mean_Q=float(e_q @ mean),
        var_I=float(e_i @ noise @ e_i) * bandwidth_factor,
        var_Q=float(e_q @ noise @ e_q) * bandwidth_factor,
        cov_IQ=float(e_i @ noise @ e_q) * bandwidth_factor,
        delta=phi + 0.5 * math.pi,
    )


def snr_and_meas_rate(device: DeviceParams, pump: PumpSpec, drive: DriveSpec,
                      calibrated: bool = False) -> float:
    """Measurement rate from conditioned output means and zero-frequency noise.

    gamma = (1/4) (Q_up - Q_down)^2 / (S_up[0] + S_down[0]), with the lumped
    downstream added noise included in each noise power. Valid at any drive
    phase; reduces exactly to the amplifier/squeezer closed forms at
    Phi = 0 and Phi = pi/2.
    """
    phi = drive.phi
    e_q = np.array([-math.sin(phi), math.cos(phi)])
    n_eff = drive.n_add_effective
    q = {}
    s = {}
    for sigma in (+1, -1):
        q[sigma] = float(e_q @ output_mean(device, pump, drive, sigma))
        s[sigma] = float(e_q @ output_noise_matrix(device, pump, sigma) @ e_q) + n_eff
    raw = 0.25 * (q[+1] - q[-1]) ** 2 / (s[+1] + s[-1])
    return GAMMA_MEAS_CALIBRATION * raw if calibrated else raw


def output_bhattacharyya_distance(device: DeviceParams, pump: PumpSpec,
                                  drive: DriveSpec) -> float:
    """Bhattacharyya distance between the sigma = +/-1 output Gaussians.

    The computable version of the ellipse-overlap picture: larger distance
    means less overlap, i.e. a faster parasitic or dispersive measurement.
    """
    mom = {s: output_moments(device, pump, drive, s) for s in (+1, -1)}
    mu = {s: np.array([mom[s].mean_I, mom[s].mean_Q]) for s in (+1, -1)}
    cov = {s: mom[s].covariance_matrix for s in (+1, -1)}
    cbar = 0.5 * (cov[+1] + cov[-1])
    diff = mu[+1] - mu[-1]
    term_mean = 0.125 * diff @ np.linalg.solve(cbar, diff)
    term_cov = 0.5 * math.log(
        float(np.linalg.det(cbar))
        / math.sqrt(float(np.linalg.det(cov[+1])) * float(np.linalg.det(cov[-1])))
    )
    return float(term_mean + term_cov)


# --------------------------------------------------------------------------
# coherence-block Gaussian dynamics
# --------------------------------------------------------------------------

def _block_rhs(lam_r: float, chi_r: float, xin: float, pin: float,
               gamma_intr_r: float):
    """Right-hand side of the block moment ODEs in kappa-reduced time."""

    def rhs(_t, y):
        vxx, vpp, vxp, mx, mp, _ln = y
        src = 0.5 * (1.0 + 1j * chi_r)
        dvxx = -2.0 * (lam_r + 0.5) * vxx - 2j * chi_r * (vxx * vxx + vxp * vxp) + src
        dvpp = 2.0 * (lam_r - 0.5) * vpp - 2j * chi_r * (vpp * vpp + vxp * vxp) + src
        dvxp = -vxp - 2j * chi_r * vxp * (vxx + vpp)
        dmx = -(lam_r + 0.5) * mx - 2j * chi_r * (vxx * mx + vxp * mp) - xin
        dmp = (lam_r - 0.5) * mp - 2j * chi_r * (vpp * mp + vxp * mx) - pin
        dln = -1j * chi_r * (vxx + vpp + mx * mx + mp * mp - 1.0) - gamma_intr_r
        return np.array([dvxx, dvpp, dvxp, dmx, dmp, dln])

    return rhs


def _reduced_inputs(device: DeviceParams, pump: PumpSpec, drive: DriveSpec,
                    include_intrinsic: bool):
    lam_r = pump.lam / device.kappa
    chi_r = device.chi / device.kappa
    f = math.sqrt(drive.alpha_in_flux(device) / device.kappa)
    xin = math.sqrt(2.0) * f * math.cos(drive.phi)
    pin = math.sqrt(2.0) * f * math.sin(drive.phi)
    gamma_intr_r = device.gamma_intrinsic / device.kappa if include_intrinsic else 0.0
    return lam_r, chi_r, xin, pin, gamma_intr_r


def evolve_block(device: DeviceParams, pump: PumpSpec, drive: DriveSpec, t: float,
                 initial: GaussianBlockState | None = None,
                 include_intrinsic: bool = True) -> GaussianBlockState:
    """Evolve the coherence block for a time ``t`` (seconds).

    The intrinsic qubit decoherence contributes a bare -t/T2* to the
    log-norm; disable ``include_intrinsic`` to evolve the rescaled equation
    that isolates the resonator-induced decay.
    """
    if t < 0.0:
        raise ParameterError("t must be >= 0")
    state = initial if initial is not None else GaussianBlockState.vacuum()
    lam_r, chi_r, xin, pin, g_r = _reduced_inputs(device, pump, drive, include_intrinsic)
    y0 = np.array([state.cov[0, 0], state.cov[1, 1], state.cov[0, 1],
                   state.mean[0], state.mean[1], state.log_norm + 0.0j])
    sol = solve_ivp(_block_rhs(lam_r, chi_r, xin, pin, g_r),
                    (0.0, device.kappa * t), y0, method="DOP853",
                    rtol=_ODE_RTOL, atol=_ODE_ATOL)
    if not sol.success:
        raise ConvergenceError(f"block integrator failed: {sol.message}")
    vxx, vpp, vxp, mx, mp, ln = sol.y[:, -1]
    return GaussianBlockState(mean=np.array([mx, mp]),
                              cov=np.array([[vxx, vxp], [vxp, vpp]]),
                              log_norm=float(ln.real))


def block_steady_state(device: DeviceParams, pump: PumpSpec,
                       drive: DriveSpec) -> GaussianBlockState:
    """Algebraic fixed point of the block moments (second, ODE-free path).

    The covariance fixed point is a complex quadratic whose discriminant is
    D(+/-lam); the means follow by a linear solve. ``log_norm`` is set to 0:
    the fixed point fixes moments, not the decaying norm.
    """
    lam = pump.lam
    _check_below_threshold(lam, device.kappa)
    k2 = 0.5 * device.kappa
    chi = device.chi
    kappa = device.kappa
    if chi == 0.0:
        vxx = complex(0.25 * kappa / (k2 + lam))
        vpp = complex(0.25 * kappa / (k2 - lam))
    else:
        vxx = (-(lam + k2) + cmath.sqrt(d_of_lambda(device, lam))) / (2j * chi)
        vpp = ((lam - k2) + cmath.sqrt(d_of_lambda(device, -lam))) / (2j * chi)
    sk = math.sqrt(kappa)
    amp = math.sqrt(2.0 * drive.alpha_in_flux(device))
    xin = amp * math.cos(drive.phi)
    pin = amp * math.sin(drive.phi)
    mx = -sk * xin / cmath.sqrt(d_of_lambda(device, lam))
    mp = -sk * pin / cmath.sqrt(d_of_lambda(device, -lam))
    return GaussianBlockState(mean=np.array([mx, mp]),
                              cov=np.array([[vxx, 0.0], [0.0, vpp]]),
                              log_norm=0.0)


def dephasing_from_decay(device: DeviceParams, pump: PumpSpec, drive: DriveSpec,
                         window: float | None = None) -> float:
    """Dephasing rate from the asymptotic log-norm slope of the block, 1/s.

    Integrates the rescaled block equation from vacuum, fits the slope of
    log |Tr| over the final half of the window (at least 20/kappa), and
    restores the intrinsic 1/T2*. The window doubles until the slopes over
    the two halves of the fit range agree to 0.1% relative.
    """
    lam_r, chi_r, xin, pin, _ = _reduced_inputs(device, pump, drive, False)
    rhs = _block_rhs(lam_r, chi_r, xin, pin, 0.0)
    tau_total = device.kappa * window if window is not None else 40.0
    if tau_total < 40.0:
        tau_total = 40.0
    y = np.array([0.5, 0.5, 0.0, 0.0, 0.0, 0.0], dtype=complex)
    tau0 = 0.0
    for _ in range(_MAX_WINDOW_DOUBLINGS):
        n_pts = 129
        t_eval = np.linspace(tau0, tau_total, n_pts)
        sol = solve_ivp(rhs, (tau0, tau_total), y, method="DOP853",
                        rtol=_ODE_RTOL, atol=_ODE_ATOL, t_eval=t_eval)
        if not sol.success:
            raise ConvergenceError(f"block integrator failed: {sol.message}")
        taus = sol.t
        lognorm = sol.y[5].real
        half = taus >= tau_total / 2.0
        tail = taus >= 0.75 * tau_total
        mid = half & ~tail
        slope_mid = float(np.polyfit(taus[mid], lognorm[mid], 1)[0])
        slope_tail = float(np.polyfit(taus[tail], lognorm[tail], 1)[0])
        slope = float(np.polyfit(taus[half], lognorm[half], 1)[0])
        scale = max(abs(slope), 1e-30)
        if abs(slope_mid - slope_tail) <= _SLOPE_REL_TOL * scale:
            return -slope * device.kappa + device.gamma_intrinsic
        y = sol.y[:, -1].copy()
        y[5] = 0.0  # renormalize; the equation is linear in the block
        tau0 = tau_total
        tau_total *= 2.0
    raise ConvergenceError(
        "log-norm slope did not converge; decay is not exponential on the "
        f"probed window (last window {tau_total / device.kappa:.3g} s)"
    )
