"""Parameter sweeps over the analytic rate engines and operating-point search.

Sweeps are pure: each grid point is evaluated independently from the same
base configuration, so results are order independent and safe to
parallelize. Grid points that would sit at or above the parametric
threshold (lam >= 0.49 kappa by the conservative guard) produce error rows
instead of raising.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .constants import HBAR
from .errors import ParameterError, QpaReadoutError
from .params import DeviceParams, DriveSpec, PumpSpec
from .rates import efficiency

LAMBDA_GUARD = 0.49  # sweeps exclude lam >= LAMBDA_GUARD * kappa a priori

AXIS_PARAMETERS = (
    "pump.gain_qpa_db",
    "drive.phi_rad",
    "drive.p_in_dbm",
    "drive.p_in_w",
    "drive.alpha_in",
    "drive.n_add",
    "drive.eta_loss",
)

OUTPUT_FIELDS = (
    "gamma_phi",
    "gamma_phi_parasitic",
    "gamma_meas",
    "gamma_meas_raw",
    "eta_meas",
    "eta_qpa",
    "eta_rest",
    "nbar_intra",
)


@dataclass(frozen=True)
class SweepAxis:
    parameter: str
    values: np.ndarray

    def __post_init__(self) -> None:
        if self.parameter not in AXIS_PARAMETERS:
            raise ParameterError(
                f"unknown sweep parameter '{self.parameter}'; "
                f"choose from {', '.join(AXIS_PARAMETERS)}"
            )
        vals = np.asarray(self.values, dtype=float)
        if vals.ndim != 1 or vals.size == 0:
            raise ParameterError("axis grid must be a non-empty 1-D array")
        if not np.all(np.isfinite(vals)):
            raise ParameterError("axis grid must be finite")
        diffs = np.diff(vals)
        if vals.size > 1 and not (np.all(diffs > 0) or np.all(diffs < 0)):
            raise ParameterError("axis grid must be strictly monotone")
        object.__setattr__(self, "values", vals)


@dataclass(frozen=True)
class SweepSpec:
    axes: list[SweepAxis]
    outputs: tuple[str, ...] = OUTPUT_FIELDS

    def __post_init__(self) -> None:
        if not (1 <= len(self.axes) <= 3):
            raise ParameterError("sweeps support 1 to 3 axes")
        names = [ax.parameter for ax in self.axes]
        if len(set(names)) != len(names):
            raise ParameterError("sweep axes must be distinct")
        for out in self.outputs:
            if out not in OUTPUT_FIELDS:
                raise ParameterError(
                    f"unknown output '{out}'; choose from {', '.join(OUTPUT_FIELDS)}"
                )


def _apply_axis(device: DeviceParams, pump: PumpSpec, drive: DriveSpec,
                parameter: str, value: float) -> tuple[PumpSpec, DriveSpec]:
    if parameter == "pump.gain_qpa_db":
        pump = PumpSpec.from_gain_db(value, device.kappa, pump.pump_phase)
    elif parameter == "drive.phi_rad":
        drive = drive.with_(phi=value)
    elif parameter == "drive.p_in_dbm":
        drive = drive.with_(p_in=10.0 ** ((value - 30.0) / 10.0))
    elif parameter == "drive.p_in_w":
        drive = drive.with_(p_in=value)
    elif parameter == "drive.alpha_in":
        # value is |alpha_in| in sqrt(photons/s)
        drive = drive.with_(p_in=HBAR * device.omega_qpa * value * value)
    elif parameter == "drive.n_add":
        drive = drive.with_(n_add=value)
    elif parameter == "drive.eta_loss":
        drive = drive.with_(eta_loss=value)
    else:  # pragma: no cover - guarded by SweepAxis
        raise ParameterError(f"unknown sweep parameter '{parameter}'")
    return pump, drive


def run_sweep(spec: SweepSpec, device: DeviceParams, pump: PumpSpec,
              drive: DriveSpec) -> list[dict]:
    """Dense evaluation of the requested outputs over the grid.

    Returns long-format rows: one dict per grid point carrying the axis
    values, the requested outputs, and an ``error`` field (empty on
    success). Rows appear in row-major grid order.
    """
    shapes = [ax.values.size for ax in spec.axes]
    rows: list[dict] = []
    for flat in range(int(np.prod(shapes))):
        idx = np.unravel_index(flat, shapes)
        p, d = pump, drive
        row: dict = {}
        for ax, i in zip(spec.axes, idx):
            value = float(ax.values[i])
            row[ax.parameter] = value
            p, d = _apply_axis(device, p, d, ax.parameter, value)
        try:
            if p.lam >= LAMBDA_GUARD * device.kappa:
                raise ParameterError(
                    f"lam = {p.lam / device.kappa:.4f} kappa is above the "
                    f"{LAMBDA_GUARD} kappa sweep guard"
                )
            result = efficiency(device, p, d)
            for out in spec.outputs:
                row[out] = getattr(result, out) if out != "gamma_phi_parasitic" \
                    else result.gamma_parasitic
            row["error"] = ""
        except QpaReadoutError as exc:
            for out in spec.outputs:
                row[out] = math.nan
            row["error"] = str(exc)
        rows.append(row)
    return rows


def sweep_columns(spec: SweepSpec) -> list[str]:
    return [ax.parameter for ax in spec.axes] + list(spec.outputs) + ["error"]


# --------------------------------------------------------------------------
# operating-point search
# --------------------------------------------------------------------------

_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class OptimumReport:
    """Result of the 1-D gain search for maximum efficiency."""

    gain_db: float
    eta_meas: float
    bounds_db: tuple[float, float]
    bracket_db: tuple[float, float]
    curvature: float  # d^2 eta / d gain_db^2 at the optimum
    boundary: bool
    unimodal: bool
    coarse_grid: list[dict] = field(default_factory=list)


def _eta_at_gain(device: DeviceParams, drive: DriveSpec, gain_db: float) -> float:
    pump = PumpSpec.from_gain_db(gain_db, device.kappa)
    return efficiency(device, pump, drive).eta_meas


def optimize_gain(device: DeviceParams, drive: DriveSpec,
                  bounds_db: tuple[float, float], coarse_points: int = 33,
                  tol_db: float = 1e-4) -> OptimumReport:
    """Maximize eta_meas over gain (amplifier mode) by golden-section refinement.

    A coarse grid locates the bracket and checks unimodality; a non-unimodal
    profile is returned flagged, with the grid, instead of a point estimate.
    Optima within one coarse step of a bound are flagged as boundary optima
    (with zero effective added noise the true optimum is the zero-gain
    boundary).
    """
    lo, hi = float(bounds_db[0]), float(bounds_db[1])
    if lo > hi:
        raise ParameterError(f"malformed bounds: [{lo}, {hi}]")
    if drive.phi != 0.0:
        raise ParameterError("gain optimization is defined in amplifier mode (phi = 0)")
    if lo == hi:
        eta = _eta_at_gain(device, drive, lo)
        return OptimumReport(gain_db=lo, eta_meas=eta, bounds_db=(lo, hi),
                             bracket_db=(lo, hi), curvature=0.0, boundary=True,
                             unimodal=True)
    grid = np.linspace(lo, hi, coarse_points)
    etas = np.array([_eta_at_gain(device, drive, g) for g in grid])
    coarse = [{"gain_db": float(g), "eta_meas": float(e)} for g, e in zip(grid, etas)]
    interior_maxima = sum(
        1 for i in range(1, len(grid) - 1)
        if etas[i] > etas[i - 1] and etas[i] > etas[i + 1]
    )
    k = int(np.argmax(etas))
    if interior_maxima > 1:
        return OptimumReport(gain_db=float(grid[k]), eta_meas=float(etas[k]),
                             bounds_db=(lo, hi), bracket_db=(lo, hi),
                             curvature=math.nan, boundary=False, unimodal=False,
                             coarse_grid=coarse)
    a = grid[max(k - 1, 0)]
    b = grid[min(k + 1, len(grid) - 1)]
    # golden-section search for the maximum on [a, b]
    c = b - _INV_PHI * (b - a)
    d = a + _INV_PHI * (b - a)
    fc = _eta_at_gain(device, drive, c)
    fd = _eta_at_gain(device, drive, d)
    while b - a > tol_db:
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - _INV_PHI * (b - a)
            fc = _eta_at_gain(device, drive, c)
        else:
            a, c, fc = c, d, fd
            d = a + _INV_PHI * (b - a)
            fd = _eta_at_gain(device, drive, d)
    g_opt = 0.5 * (a + b)
    eta_opt = _eta_at_gain(device, drive, g_opt)
    boundary = (g_opt - lo) < 2.0 * (grid[1] - grid[0]) or \
               (hi - g_opt) < 2.0 * (grid[1] - grid[0])
    if k == 0 or k == len(grid) - 1:
        boundary = True
        g_opt = float(grid[k])
        eta_opt = float(etas[k])
    h = max(tol_db, 1e-3)
    if lo <= g_opt - h and g_opt + h <= hi:
        curv = (_eta_at_gain(device, drive, g_opt + h) - 2.0 * eta_opt
                + _eta_at_gain(device, drive, g_opt - h)) / (h * h)
    else:
        curv = math.nan
    return OptimumReport(gain_db=float(g_opt), eta_meas=float(eta_opt),
                         bounds_db=(lo, hi), bracket_db=(float(a), float(b)),
                         curvature=float(curv), boundary=bool(boundary),
                         unimodal=True, coarse_grid=coarse)


def efficiency_decomposition_map(device: DeviceParams, drive: DriveSpec,
                                 alpha_in_grid: np.ndarray,
                                 gain_db_grid: np.ndarray) -> list[dict]:
    """eta_meas / eta_qpa / eta_rest over a (|alpha_in|, gain) grid.

    Amplifier mode throughout; rows in row-major (alpha, gain) order with
    the identity eta_meas = eta_qpa * eta_rest holding pointwise.
    """
    spec = SweepSpec(axes=[
        SweepAxis("drive.alpha_in", np.asarray(alpha_in_grid, dtype=float)),
        SweepAxis("pump.gain_qpa_db", np.asarray(gain_db_grid, dtype=float)),
    ], outputs=("eta_meas", "eta_qpa", "eta_rest", "gamma_phi",
                "gamma_phi_parasitic", "gamma_meas"))
    pump = PumpSpec.from_gain_db(0.0, device.kappa)
    return run_sweep(spec, device, pump, drive.with_(phi=0.0))
