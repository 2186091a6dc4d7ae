"""HTTP service exposing the analytic surface of the package.

The fast, pure operations (rates, sweeps, efficiency maps, gain
optimization) are a good fit for a shared service: a lab dashboard or a
fitting loop can hit one warm process from several clients. The heavy batch
workflows (Fock-oracle suites, trajectory ensembles) stay on the CLI, whose
file outputs and exit codes they need.

Run with ``qpa-readout serve`` or ``uvicorn qpa_readout.service:app``.
"""

from __future__ import annotations

import math

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

from . import __version__
from .config import bundled_config_names, bundled_config_path, load_config
from .errors import QpaReadoutError
from .params import DeviceParams, DriveSpec, PumpSpec


class DeviceModel(BaseModel):
    kappa_over_2pi_hz: float = Field(gt=0)
    chi_over_2pi_hz: float
    omega_qpa_over_2pi_hz: float = Field(gt=0)
    omega_q_over_2pi_hz: float = Field(gt=0)
    t1_s: float = Field(gt=0)
    t2_s: float = Field(gt=0)


class PumpModel(BaseModel):
    gain_qpa_db: float = Field(default=0.0, ge=0.0)
    pump_phase_rad: float = 0.0


class DriveModel(BaseModel):
    p_in_dbm: float | None = None
    p_in_w: float | None = Field(default=None, ge=0.0)
    phi_rad: float = 0.0
    n_add: float = Field(default=0.0, ge=0.0)
    eta_loss: float = Field(default=1.0, gt=0.0, le=1.0)


class OperatingPoint(BaseModel):
    device: DeviceModel
    pump: PumpModel = PumpModel()
    drive: DriveModel = DriveModel()

    def build(self) -> tuple[DeviceParams, PumpSpec, DriveSpec]:
        two_pi = 2.0 * math.pi
        device = DeviceParams(
            kappa=two_pi * self.device.kappa_over_2pi_hz,
            chi=two_pi * self.device.chi_over_2pi_hz,
            omega_qpa=two_pi * self.device.omega_qpa_over_2pi_hz,
            omega_q=two_pi * self.device.omega_q_over_2pi_hz,
            t1=self.device.t1_s,
            t2=self.device.t2_s,
        )
        pump = PumpSpec.from_gain_db(self.pump.gain_qpa_db, device.kappa,
                                     self.pump.pump_phase_rad)
        if self.drive.p_in_dbm is not None and self.drive.p_in_w is not None:
            raise QpaReadoutError("give either p_in_dbm or p_in_w, not both")
        if self.drive.p_in_dbm is not None:
            p_in = 10.0 ** ((self.drive.p_in_dbm - 30.0) / 10.0)
        else:
            p_in = self.drive.p_in_w or 0.0
        drive = DriveSpec(p_in=p_in, phi=self.drive.phi_rad,
                          n_add=self.drive.n_add, eta_loss=self.drive.eta_loss)
        return device, pump, drive


class RateResponse(BaseModel):
    mode: str
    gamma_phi: float
    gamma_phi_parasitic: float
    gamma_meas: float
    gamma_meas_raw: float
    gamma_meas_amp: float
    gamma_meas_sqz: float
    eta_meas: float
    eta_qpa: float
    eta_rest: float
    nbar_intra: float


class SweepAxisModel(BaseModel):
    parameter: str
    values: list[float] = Field(min_length=1)


class SweepRequest(BaseModel):
    point: OperatingPoint
    axes: list[SweepAxisModel] = Field(min_length=1, max_length=3)
    outputs: list[str] | None = None


class SweepResponse(BaseModel):
    columns: list[str]
    rows: list[dict]


class OptimizeRequest(BaseModel):
    point: OperatingPoint
    bounds_db: tuple[float, float]


class OptimizeResponse(BaseModel):
    gain_db: float
    eta_meas: float
    bounds_db: tuple[float, float]
    bracket_db: tuple[float, float]
    curvature: float | None
    boundary: bool
    unimodal: bool


app = FastAPI(title="qpa-readout", version=__version__)


@app.get("/health")
def health() -> dict:
    return {"status": "ok", "version": __version__}


@app.get("/configs")
def configs() -> dict:
    return {"names": bundled_config_names()}


@app.get("/configs/{name}")
def config_by_name(name: str) -> dict:
    try:
        bundled_config_path(name)
        cfg = load_config(name)
    except QpaReadoutError as exc:
        raise HTTPException(status_code=404, detail=str(exc)) from exc
    return cfg.resolved


def _rate_response(device, pump, drive) -> RateResponse:
    from .rates import (efficiency, measurement_rate_amp, measurement_rate_sqz,
                        steady_state_nbar_conditioned)

    result = efficiency(device, pump, drive)
    n_eff = drive.n_add_effective
    nbar_amp = steady_state_nbar_conditioned(device, pump, drive.with_(phi=0.0), +1)
    nbar_sqz = steady_state_nbar_conditioned(device, pump,
                                             drive.with_(phi=0.5 * math.pi), +1)
    return RateResponse(
        mode=result.mode.value,
        gamma_phi=result.gamma_phi,
        gamma_phi_parasitic=result.gamma_parasitic,
        gamma_meas=result.gamma_meas,
        gamma_meas_raw=result.gamma_meas_raw,
        gamma_meas_amp=measurement_rate_amp(device, pump.lam, nbar_amp, n_eff,
                                            calibrated=True),
        gamma_meas_sqz=measurement_rate_sqz(device, pump.lam, nbar_sqz, n_eff,
                                            calibrated=True),
        eta_meas=result.eta_meas,
        eta_qpa=result.eta_qpa,
        eta_rest=result.eta_rest if math.isfinite(result.eta_rest) else 0.0,
        nbar_intra=result.nbar_intra,
    )


@app.post("/rates", response_model=RateResponse)
def rates_endpoint(point: OperatingPoint) -> RateResponse:
    try:
        device, pump, drive = point.build()
        return _rate_response(device, pump, drive)
    except QpaReadoutError as exc:
        raise HTTPException(status_code=422, detail=str(exc)) from exc


@app.post("/sweep", response_model=SweepResponse)
def sweep_endpoint(request: SweepRequest) -> SweepResponse:
    import numpy as np

    from .sweep import OUTPUT_FIELDS, SweepAxis, SweepSpec, run_sweep, sweep_columns

    try:
        device, pump, drive = request.point.build()
        axes = [SweepAxis(ax.parameter, np.asarray(ax.values)) for ax in request.axes]
        outputs = tuple(request.outputs) if request.outputs else OUTPUT_FIELDS
        spec = SweepSpec(axes=axes, outputs=outputs)
        rows = run_sweep(spec, device, pump, drive)
        return SweepResponse(columns=sweep_columns(spec), rows=rows)
    except QpaReadoutError as exc:
        raise HTTPException(status_code=422, detail=str(exc)) from exc


@app.post("/optimize", response_model=OptimizeResponse)
def optimize_endpoint(request: OptimizeRequest) -> OptimizeResponse:
    from .sweep import optimize_gain

    try:
        device, _pump, drive = request.point.build()
        report = optimize_gain(device, drive.with_(phi=0.0), request.bounds_db)
    except QpaReadoutError as exc:
        raise HTTPException(status_code=422, detail=str(exc)) from exc
    return OptimizeResponse(
        gain_db=report.gain_db,
        eta_meas=report.eta_meas,
        bounds_db=report.bounds_db,
        bracket_db=report.bracket_db,
        curvature=None if math.isnan(report.curvature) else report.curvature,
        boundary=report.boundary,
        unimodal=report.unimodal,
    )
