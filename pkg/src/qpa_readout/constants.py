"""Physical constants and unit conversions.

Internal unit system is SI with angular frequencies in rad/s. Config files
and CLI flags accept "/2pi" frequencies in Hz and powers in dBm; conversion
happens once, at the boundary.
"""

from __future__ import annotations

import math

HBAR: float = 1.054571817e-34  # J*s (exact CODATA 2018 value)

TWO_PI: float = 2.0 * math.pi


def hz_to_angular(f_hz: float) -> float:
    """Convert an ordinary frequency in Hz to rad/s."""
    return TWO_PI * f_hz


def angular_to_hz(omega: float) -> float:
    """Convert rad/s back to an ordinary frequency in Hz."""
    return omega / TWO_PI


def dbm_to_watts(p_dbm: float) -> float:
    """Convert power in dBm to watts; exact by definition."""
    return 10.0 ** ((p_dbm - 30.0) / 10.0)


def watts_to_dbm(p_w: float) -> float:
    """Convert power in watts to dBm. Requires p_w > 0."""
    if p_w <= 0.0:
        raise ValueError("power must be positive to express in dBm")
    return 10.0 * math.log10(p_w) + 30.0


def db_to_power_ratio(x_db: float) -> float:
    """Convert a dB value to a dimensionless power ratio."""
    return 10.0 ** (x_db / 10.0)


def power_ratio_to_db(ratio: float) -> float:
    """Convert a dimensionless power ratio to dB."""
    if ratio <= 0.0:
        raise ValueError("power ratio must be positive")
    return 10.0 * math.log10(ratio)
