"""Dispersive qubit readout through a resonator with intra-cavity parametric gain.

Closed-form dephasing/measurement rates and end-to-end efficiency, a
Gaussian-moment engine for the coherence block and output field, a
truncated-Fock-space master-equation oracle that verifies the closed forms,
synthetic homodyne-record generation with T1-aware histogram fits, and
sweep/optimization front ends (CLI and HTTP service).
"""

__version__ = "0.1.0"

from .constants import HBAR, TWO_PI, dbm_to_watts, watts_to_dbm
from .errors import (ConfigError, ConvergenceError, EfficiencyUndefinedError,
                     ParameterError, QpaReadoutError, ThresholdError,
                     TruncationError)
from .params import (DeviceParams, DriveSpec, PumpSpec, g0_from_lambda,
                     gain_from_lambda, lambda_from_gain, validate)
from .rates import (GAMMA_MEAS_CALIBRATION, DParams, MeasurementMode, RateResult,
                    d_of_lambda, dephasing_smallchi_approx, drive_for_nbar,
                    efficiency, measurement_rate_amp, measurement_rate_amp_leading,
                    measurement_rate_sqz, measurement_rate_sqz_leading,
                    measurement_rate_zero_gain, parasitic_dephasing,
                    steady_state_nbar, steady_state_nbar_conditioned,
                    total_dephasing)

__all__ = [
    "__version__",
    "HBAR", "TWO_PI", "dbm_to_watts", "watts_to_dbm",
    "QpaReadoutError", "ParameterError", "ThresholdError", "ConfigError",
    "TruncationError", "ConvergenceError", "EfficiencyUndefinedError",
    "DeviceParams", "PumpSpec", "DriveSpec", "validate",
    "lambda_from_gain", "gain_from_lambda", "g0_from_lambda",
    "DParams", "MeasurementMode", "RateResult", "GAMMA_MEAS_CALIBRATION",
    "d_of_lambda", "parasitic_dephasing", "total_dephasing",
    "dephasing_smallchi_approx", "measurement_rate_amp", "measurement_rate_sqz",
    "measurement_rate_zero_gain", "measurement_rate_amp_leading",
    "measurement_rate_sqz_leading", "steady_state_nbar",
    "steady_state_nbar_conditioned", "drive_for_nbar", "efficiency",
]
