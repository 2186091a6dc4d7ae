"""Device, pump, and drive parameter types with validation and gain algebra.

All angular quantities are stored in rad/s. The detuning ``delta`` between
qubit and resonator is stored for completeness but enters none of the rate
formulas (the rate derivations work in the qubit rotating frame, where it
drops out).

Two gain metrics coexist and are both exposed:

* ``gain_qpa`` -- the phase-preserving power gain a slightly detuned probe
  experiences, the quantity a network analyzer reports. Related to the pump
  rate by ``lam = (kappa/2) * sqrt(g - 1) / (sqrt(g) + 1)``.
* ``g0`` -- the internal zero-detuning metric ``sqrt(g0) = (kappa/2 + lam)
  / (kappa/2 - lam)``, which controls the output squeezing/amplification
  factors.

Both equal 1 at zero pump and both increase monotonically with ``lam`` on
``[0, kappa/2)``; the parametric threshold sits at ``lam = kappa/2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .constants import HBAR
from .errors import ParameterError, ThresholdError

_REL_TOL = 1e-12


def lambda_from_gain(gain_qpa: float, kappa: float) -> float:
    """Pump rate lam (rad/s) producing a given phase-preserving power gain.

    Parameters
    ----------
    gain_qpa : float
        Power gain as a dimensionless ratio, >= 1.
    kappa : float
        Total resonator linewidth in rad/s.
    """
    if gain_qpa < 1.0:
        raise ParameterError(f"gain_qpa must be >= 1, got {gain_qpa}")
    if kappa <= 0.0:
        raise ParameterError("kappa must be positive")
    return 0.5 * kappa * math.sqrt(gain_qpa - 1.0) / (math.sqrt(gain_qpa) + 1.0)


def gain_from_lambda(lam: float, kappa: float) -> float:
    """Inverse of :func:`lambda_from_gain`; lam must lie below kappa/2."""
    _check_below_threshold(lam, kappa)
    r = 2.0 * lam / kappa
    return ((1.0 + r * r) / (1.0 - r * r)) ** 2


def g0_from_lambda(lam: float, kappa: float) -> float:
    """Internal gain metric g0 = ((kappa/2 + lam)/(kappa/2 - lam))^2."""
    _check_below_threshold(lam, kappa)
    return ((0.5 * kappa + lam) / (0.5 * kappa - lam)) ** 2


def _check_below_threshold(lam: float, kappa: float) -> None:
    if kappa <= 0.0:
        raise ParameterError("kappa must be positive")
    if lam < 0.0:
        raise ParameterError(f"lam must be >= 0, got {lam}")
    if lam >= 0.5 * kappa:
        raise ThresholdError(
            f"pump rate lam={lam:.6g} rad/s is at or above the parametric "
            f"threshold kappa/2={0.5 * kappa:.6g} rad/s"
        )


@dataclass(frozen=True)
class DeviceParams:
    """Physical constants of the qubit-resonator-pump system.

    Attributes
    ----------
    kappa : float
        Total resonator linewidth, rad/s. Optionally split into external
        coupling and internal loss via ``kappa_ext``/``kappa_int``.
    chi : float
        Dispersive shift, rad/s, with the convention that the qubit Stark
        shift is ``2 * chi * nbar``.
    omega_qpa : float
        Resonator (readout) angular frequency, rad/s.
    omega_q : float
        Qubit angular frequency, rad/s.
    t1, t2 : float
        Qubit relaxation and pure-dephasing times, seconds.
    """

    kappa: float
    chi: float
    omega_qpa: float
    omega_q: float
    t1: float
    t2: float
    kappa_ext: float | None = None
    kappa_int: float | None = None

    def __post_init__(self) -> None:
        if not (self.kappa > 0.0):
            raise ParameterError(f"kappa must be > 0, got {self.kappa}")
        if not (self.t1 > 0.0):
            raise ParameterError(f"t1 must be > 0, got {self.t1}")
        if not (self.t2 > 0.0):
            raise ParameterError(f"t2 must be > 0, got {self.t2}")
        if not math.isfinite(self.chi):
            raise ParameterError("chi must be finite")
        if (self.kappa_ext is None) != (self.kappa_int is None):
            raise ParameterError("kappa_ext and kappa_int must be given together")
        if self.kappa_ext is not None and self.kappa_int is not None:
            if self.kappa_ext < 0.0 or self.kappa_int < 0.0:
                raise ParameterError("kappa_ext and kappa_int must be >= 0")
            total = self.kappa_ext + self.kappa_int
            if abs(total - self.kappa) > _REL_TOL * max(abs(self.kappa), 1.0):
                raise ParameterError(
                    f"kappa_ext + kappa_int = {total:.15g} does not match "
                    f"kappa = {self.kappa:.15g}"
                )

    @property
    def delta(self) -> float:
        """Qubit-resonator detuning omega_q - omega_qpa (stored, unused by rates)."""
        return self.omega_q - self.omega_qpa

    @property
    def t2_star(self) -> float:
        """Intrinsic coherence time 2*t1*t2 / (2*t1 + t2); always recomputed."""
        return 2.0 * self.t1 * self.t2 / (2.0 * self.t1 + self.t2)

    @property
    def gamma_intrinsic(self) -> float:
        """Background dephasing rate 1/t2_star in 1/s."""
        return 1.0 / self.t2_star


def validate(params: DeviceParams) -> DeviceParams:
    """Return the parameter set if and only if every invariant holds.

    Construction already enforces the invariants; this entry point exists so
    callers holding an instance from an untrusted source can re-check it.
    """
    DeviceParams.__post_init__(params)
    return params


@dataclass(frozen=True)
class PumpSpec:
    """Parametric pump setting.

    ``gain_qpa`` is the user-facing knob (dimensionless power ratio >= 1);
    the pump rate ``lam`` is derived from it, never stored independently.
    The pump phase is fixed by convention so that drive phase Phi = 0 is
    amplifier mode; see :mod:`qpa_readout.rates`.
    """

    gain_qpa: float
    kappa: float = field(repr=False)
    pump_phase: float = 0.0

    def __post_init__(self) -> None:
        # lambda_from_gain performs the gain >= 1 / kappa > 0 checks
        lambda_from_gain(self.gain_qpa, self.kappa)

    @classmethod
    def from_gain_db(cls, gain_db: float, kappa: float, pump_phase: float = 0.0) -> "PumpSpec":
        return cls(10.0 ** (gain_db / 10.0), kappa, pump_phase)

    @classmethod
    def from_lambda(cls, lam: float, kappa: float, pump_phase: float = 0.0) -> "PumpSpec":
        return cls(gain_from_lambda(lam, kappa), kappa, pump_phase)

    @property
    def lam(self) -> float:
        """Pump rate in rad/s, always in [0, kappa/2)."""
        return lambda_from_gain(self.gain_qpa, self.kappa)

    @property
    def gain_db(self) -> float:
        return 10.0 * math.log10(self.gain_qpa)

    @property
    def g0(self) -> float:
        return g0_from_lambda(self.lam, self.kappa)


@dataclass(frozen=True)
class DriveSpec:
    """Measurement drive plus the lumped downstream-chain model.

    Attributes
    ----------
    p_in : float
        Power of the measurement tone incident on the resonator, watts.
    phi : float
        Drive phase in radians. Phi = 0 is amplifier mode, Phi = pi/2
        squeezer mode (package-wide convention: the pump phase is fixed,
        the drive phase varies).
    n_add : float
        Effective noise quanta added downstream, referred to the resonator
        output.
    eta_loss : float
        Lumped downstream power transmission in (0, 1].
    """

    p_in: float
    phi: float = 0.0
    n_add: float = 0.0
    eta_loss: float = 1.0

    def __post_init__(self) -> None:
        if self.p_in < 0.0:
            raise ParameterError(f"p_in must be >= 0, got {self.p_in}")
        if self.n_add < 0.0:
            raise ParameterError(f"n_add must be >= 0, got {self.n_add}")
        if not (0.0 < self.eta_loss <= 1.0):
            raise ParameterError(f"eta_loss must be in (0, 1], got {self.eta_loss}")

    @classmethod
    def from_dbm(cls, p_in_dbm: float, phi: float = 0.0, n_add: float = 0.0,
                 eta_loss: float = 1.0) -> "DriveSpec":
        return cls(10.0 ** ((p_in_dbm - 30.0) / 10.0), phi, n_add, eta_loss)

    @classmethod
    def off(cls, phi: float = 0.0, n_add: float = 0.0, eta_loss: float = 1.0) -> "DriveSpec":
        return cls(0.0, phi, n_add, eta_loss)

    def alpha_in_flux(self, device: DeviceParams) -> float:
        """Input photon flux |alpha_in|^2 = p_in / (hbar * omega_qpa), photons/s."""
        return self.p_in / (HBAR * device.omega_qpa)

    @property
    def n_add_effective(self) -> float:
        """Added noise referred to the resonator output, loss folded in.

        A beamsplitter of transmission eta_loss followed by a detector adding
        n_add quanta is equivalent to a lossless chain adding
        ``n_add/eta_loss + (1 - eta_loss)/(2 eta_loss)`` quanta.
        """
        return self.n_add / self.eta_loss + (1.0 - self.eta_loss) / (2.0 * self.eta_loss)

    def with_(self, **kwargs) -> "DriveSpec":
        """Copy with selected fields replaced."""
        base = {"p_in": self.p_in, "phi": self.phi, "n_add": self.n_add,
                "eta_loss": self.eta_loss}
        base.update(kwargs)
        return DriveSpec(**base)
