"""Command-line front end.

Subcommands: rates, sweep, oracle-check, trajectories, optimize, serve.
Exit codes: 0 success, 2 usage or configuration error, 3 physics-domain
error (e.g. at/above the parametric threshold), 4 verification or fit
failure.

Every output file is deterministic given (config, flags, seed) and gets a
``.manifest.json`` sidecar; see :mod:`qpa_readout.manifest`.
"""

from __future__ import annotations

import argparse
import configparser
import json
import math
import sys
import urllib.request
from pathlib import Path

import numpy as np

from . import __version__
from .config import RunConfig, load_config
from .errors import ConfigError, ConvergenceError, QpaReadoutError, ThresholdError
from .manifest import RunManifest, write_csv, write_json

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_PHYSICS = 3
EXIT_VERIFICATION = 4


def _config_overrides(args) -> dict:
    overrides: dict = {}

    def put(section, key, value):
        overrides.setdefault(section, {})[key] = value

    if getattr(args, "gain_db", None) is not None:
        put("pump", "gain_qpa_db", args.gain_db)
    if getattr(args, "phi", None) is not None:
        put("drive", "phi_rad", args.phi)
    if getattr(args, "pin_dbm", None) is not None:
        put("drive", "p_in_dbm", args.pin_dbm)
    if getattr(args, "pin_off", False):
        put("drive", "p_in_w", 0.0)
    if getattr(args, "nadd", None) is not None:
        put("drive", "n_add", args.nadd)
    if getattr(args, "eta_loss", None) is not None:
        put("drive", "eta_loss", args.eta_loss)
    return overrides


def _load(args) -> RunConfig:
    cfg = load_config(args.config, overrides=_config_overrides(args))
    # same conservative guard as the sweep engine: stay clearly below threshold
    if cfg.pump.lam >= 0.49 * cfg.device.kappa:
        raise ThresholdError(
            f"requested gain {cfg.pump.gain_db:.2f} dB puts the pump at "
            f"lam = {cfg.pump.lam / cfg.device.kappa:.4f} kappa, above the "
            "0.49 kappa operating guard"
        )
    return cfg


def _rates_payload(cfg: RunConfig) -> dict:
    from .rates import (efficiency, measurement_rate_amp, measurement_rate_sqz,
                        steady_state_nbar_conditioned)

    result = efficiency(cfg.device, cfg.pump, cfg.drive)
    n_eff = cfg.drive.n_add_effective
    lam = cfg.pump.lam
    nbar_amp = steady_state_nbar_conditioned(cfg.device, cfg.pump,
                                             cfg.drive.with_(phi=0.0), +1)
    nbar_sqz = steady_state_nbar_conditioned(cfg.device, cfg.pump,
                                             cfg.drive.with_(phi=0.5 * math.pi), +1)
    return {
        "mode": result.mode.value,
        "gain_qpa_db": cfg.pump.gain_db,
        "phi_rad": cfg.drive.phi,
        "p_in_w": cfg.drive.p_in,
        "n_add": cfg.drive.n_add,
        "eta_loss": cfg.drive.eta_loss,
        "gamma_phi": result.gamma_phi,
        "gamma_phi_parasitic": result.gamma_parasitic,
        "gamma_meas": result.gamma_meas,
        "gamma_meas_raw": result.gamma_meas_raw,
        "gamma_meas_amp": measurement_rate_amp(cfg.device, lam, nbar_amp, n_eff,
                                               calibrated=True),
        "gamma_meas_sqz": measurement_rate_sqz(cfg.device, lam, nbar_sqz, n_eff,
                                               calibrated=True),
        "eta_meas": result.eta_meas,
        "eta_qpa": result.eta_qpa,
        "eta_rest": result.eta_rest,
        "nbar_intra": result.nbar_intra,
    }


def _operating_point_json(cfg: RunConfig) -> dict:
    two_pi = 2.0 * math.pi
    return {
        "device": {
            "kappa_over_2pi_hz": cfg.device.kappa / two_pi,
            "chi_over_2pi_hz": cfg.device.chi / two_pi,
            "omega_qpa_over_2pi_hz": cfg.device.omega_qpa / two_pi,
            "omega_q_over_2pi_hz": cfg.device.omega_q / two_pi,
            "t1_s": cfg.device.t1,
            "t2_s": cfg.device.t2,
        },
        "pump": {"gain_qpa_db": cfg.pump.gain_db,
                 "pump_phase_rad": cfg.pump.pump_phase},
        "drive": {"p_in_w": cfg.drive.p_in, "phi_rad": cfg.drive.phi,
                  "n_add": cfg.drive.n_add, "eta_loss": cfg.drive.eta_loss},
    }


def cmd_rates(args) -> int:
    cfg = _load(args)
    if args.server:
        body = json.dumps(_operating_point_json(cfg)).encode()
        req = urllib.request.Request(args.server.rstrip("/") + "/rates", data=body,
                                     headers={"Content-Type": "application/json"})
        with urllib.request.urlopen(req) as resp:
            payload = json.loads(resp.read())
    else:
        payload = _rates_payload(cfg)
    print(f"mode                = {payload['mode']}")
    for key in ("gamma_phi", "gamma_phi_parasitic", "gamma_meas",
                "gamma_meas_amp", "gamma_meas_sqz"):
        print(f"{key:<19} = {payload[key]:.6e} 1/s ({payload[key] * 1e-6:.4f} 1/us)")
    for key in ("eta_meas", "eta_qpa", "eta_rest", "nbar_intra"):
        print(f"{key:<19} = {payload[key]:.6f}")
    if args.out:
        manifest = RunManifest(command="rates", config=cfg.resolved,
                               args={"out": str(args.out)})
        columns = list(payload.keys())
        write_csv(Path(args.out), columns, [payload], manifest)
        print(f"wrote {args.out}")
    if args.moments_out:
        from .gaussian import output_moments

        rows = []
        for sigma in (+1, -1):
            mom = output_moments(cfg.device, cfg.pump, cfg.drive, sigma)
            rows.append({"sigma": sigma, "mean_I": mom.mean_I,
                         "mean_Q": mom.mean_Q, "var_I": mom.var_I,
                         "var_Q": mom.var_Q, "cov_IQ": mom.cov_IQ,
                         "delta_rad": mom.delta})
        manifest = RunManifest(command="rates", config=cfg.resolved,
                               args={"moments_out": str(args.moments_out)})
        write_csv(Path(args.moments_out),
                  ["sigma", "mean_I", "mean_Q", "var_I", "var_Q", "cov_IQ",
                   "delta_rad"], rows, manifest)
        print(f"wrote {args.moments_out}")
    return EXIT_OK


def _parse_sweep_spec(path: Path):
    from .sweep import OUTPUT_FIELDS, SweepAxis, SweepSpec

    parser = configparser.ConfigParser()
    try:
        with open(path, "r", encoding="utf-8") as fh:
            parser.read_file(fh)
    except (OSError, configparser.Error) as exc:
        raise ConfigError(f"cannot read sweep spec {path}: {exc}") from exc
    axes = []
    outputs = OUTPUT_FIELDS
    for section in parser.sections():
        if section == "sweep":
            raw = parser.get("sweep", "outputs", fallback=None)
            if raw:
                outputs = tuple(s.strip() for s in raw.replace(",", " ").split())
            continue
        if not section.startswith("axis:"):
            raise ConfigError(f"unknown sweep-spec section [{section}]")
        parameter = section[len("axis:"):]
        if parser.has_option(section, "values"):
            raw = parser.get(section, "values")
            values = np.array([float(v) for v in raw.replace(",", " ").split()])
        else:
            start = parser.getfloat(section, "start")
            stop = parser.getfloat(section, "stop")
            num = parser.getint(section, "num")
            values = np.linspace(start, stop, num)
        axes.append(SweepAxis(parameter, values))
    if not axes:
        raise ConfigError("sweep spec defines no axes (empty grid)")
    return SweepSpec(axes=axes, outputs=outputs)


def cmd_sweep(args) -> int:
    from .config import bundled_sweep_spec_path
    from .sweep import run_sweep, sweep_columns

    cfg = _load(args)
    spec_path = Path(args.spec)
    if not spec_path.exists() and not spec_path.suffix:
        spec_path = bundled_sweep_spec_path(args.spec)
    spec = _parse_sweep_spec(spec_path)
    rows = run_sweep(spec, cfg.device, cfg.pump, cfg.drive)
    columns = sweep_columns(spec)
    manifest = RunManifest(
        command="sweep", config=cfg.resolved,
        args={"spec": spec_path.read_text(encoding="utf-8"),
              "out": str(args.out)},
    )
    write_csv(Path(args.out), columns, rows, manifest)
    n_err = sum(1 for r in rows if r["error"])
    print(f"wrote {args.out}: {len(rows)} rows ({n_err} error rows)")
    if args.plot:
        from .plots import plot_heatmap, plot_lines

        if args.plot_z:
            plot_heatmap(Path(args.out), Path(args.plot), x=args.plot_x,
                         y=args.plot_y, z=args.plot_z,
                         manifest_hash=manifest.manifest_hash)
        else:
            plot_lines(Path(args.out), Path(args.plot), x=args.plot_x,
                       y=args.plot_y, group=args.plot_group,
                       manifest_hash=manifest.manifest_hash)
        print(f"wrote {args.plot}")
    return EXIT_OK


def cmd_oracle_check(args) -> int:
    import os

    from .fock import verification_suite

    cfg = _load(args)
    n_points, nbar_max = (5, 2.0) if args.suite == "quick" else (20, 4.0)
    workers = args.workers if args.workers is not None else (os.cpu_count() or 1)
    rows = verification_suite(cfg.device, n_points=n_points, nbar_max=nbar_max,
                              seed=args.seed, chi_corruption=args.corrupt_chi,
                              workers=workers)
    columns = ["kind", "chi_over_kappa", "lam_over_kappa", "nbar", "phi",
               "analytic", "oracle", "rel_error", "tolerance", "n_trunc", "passed"]
    for row in rows:
        status = "pass" if row.passed else "FAIL"
        print(f"[{status}] {row.kind}: chi/k={row.chi_over_kappa:.4f} "
              f"lam/k={row.lam_over_kappa:.4f} nbar={row.nbar:.2f} "
              f"phi={row.phi:.3f} analytic={row.analytic:.6e} "
              f"oracle={row.oracle:.6e} rel={row.rel_error:.2e} N={row.n_trunc}")
    if args.out:
        manifest = RunManifest(command="oracle-check", config=cfg.resolved,
                               args={"suite": args.suite,
                                     "corrupt_chi": args.corrupt_chi},
                               seed=args.seed)
        write_csv(Path(args.out),
                  columns,
                  [{c: getattr(r, c if c != "passed" else "passed") for c in columns}
                   for r in rows],
                  manifest)
        print(f"wrote {args.out}")
    n_fail = sum(1 for r in rows if not r.passed)
    print(f"oracle-check: {len(rows) - n_fail}/{len(rows)} comparisons passed")
    return EXIT_OK if n_fail == 0 else EXIT_VERIFICATION


def default_tint_grid(kappa: float, t_max: float, n_points: int = 14) -> np.ndarray:
    """Integration-time grid within the white-noise validity window."""
    t_min = max(t_max / n_points, 12.0 / kappa)
    if t_min >= t_max:
        raise ConfigError("tint-max is too short for the white-noise regime")
    return np.linspace(t_min, t_max, n_points)


def cmd_trajectories(args) -> int:
    from .rates import efficiency
    from .trajectories import (FitModel, gamma_meas_from_snr, histogram_rows,
                               sample_records, snr_curve)

    cfg = _load(args)
    grid = default_tint_grid(cfg.device.kappa, args.tint_max)
    records = sample_records(cfg.device, cfg.pump, cfg.drive, args.records,
                             t_max=args.tint_max, seed=args.seed)
    fits = []
    failures = 0
    for t_int in grid:
        try:
            fits.extend(snr_curve(records, np.array([t_int]),
                                  fit_model=FitModel(args.fit_model),
                                  t1=cfg.device.t1))
        except ConvergenceError as exc:
            failures += 1
            print(f"fit failure at t_int={t_int:.3e}: {exc}", file=sys.stderr)
    manifest = RunManifest(
        command="trajectories", config=cfg.resolved,
        args={"records": args.records, "tint_max": args.tint_max,
              "fit_model": args.fit_model, "out_prefix": str(args.out_prefix)},
        seed=args.seed,
    )
    prefix = Path(args.out_prefix)
    snr_cols = ["t_int_s", "mean_excited", "mean_ground", "sigma_excited",
                "sigma_ground", "snr", "fit_model"]
    write_csv(prefix.with_name(prefix.name + "_snr.csv"), snr_cols,
              [{"t_int_s": f.t_int, "mean_excited": f.mean_excited,
                "mean_ground": f.mean_ground, "sigma_excited": f.sigma_excited,
                "sigma_ground": f.sigma_ground, "snr": f.snr,
                "fit_model": f.fit_model.value} for f in fits],
              manifest)
    hist_cols = ["state", "t_int_s", "bin_low", "bin_high", "count"]
    write_csv(prefix.with_name(prefix.name + "_histograms.csv"), hist_cols,
              histogram_rows(records, float(grid[-1])), manifest)
    if args.records_out:
        rec_cols = ["record", "true_state", "jump_time_s", "time_s",
                    "integrated_q"]
        rec_rows = [
            {"record": i, "true_state": r.true_state,
             "jump_time_s": "" if r.jump_time is None else r.jump_time,
             "time_s": t, "integrated_q": v}
            for i, r in enumerate(records)
            for t, v in zip(r.times.tolist(), r.values.tolist())
        ]
        write_csv(Path(args.records_out), rec_cols, rec_rows, manifest)
        print(f"wrote {args.records_out}")
    analytic = efficiency(cfg.device, cfg.pump, cfg.drive)
    summary: dict = {
        "n_records": args.records,
        "n_fit_failures": failures,
        "gamma_meas_analytic": analytic.gamma_meas,
        "eta_meas_analytic": analytic.eta_meas,
    }
    fitted = None
    if len(fits) >= 5:
        try:
            fitted = gamma_meas_from_snr(fits)
        except (ConvergenceError, QpaReadoutError) as exc:
            print(f"SNR^2 slope fit failed: {exc}", file=sys.stderr)
    if fitted is not None:
        summary["gamma_meas_fitted"] = fitted
        summary["eta_meas_fitted"] = fitted / (2.0 * analytic.gamma_phi)
        print(f"gamma_meas fitted   = {fitted:.6e} 1/s")
    print(f"gamma_meas analytic = {analytic.gamma_meas:.6e} 1/s")
    print(f"eta_meas analytic   = {analytic.eta_meas:.6f}")
    if "eta_meas_fitted" in summary:
        print(f"eta_meas fitted     = {summary['eta_meas_fitted']:.6f}")
    write_json(prefix.with_name(prefix.name + "_summary.json"), summary, manifest)
    print(f"wrote {prefix.name}_snr.csv, {prefix.name}_histograms.csv, "
          f"{prefix.name}_summary.json")
    ok = (len(grid) - failures) >= 0.8 * len(grid) and fitted is not None
    return EXIT_OK if ok else EXIT_VERIFICATION


def cmd_optimize(args) -> int:
    from .sweep import optimize_gain

    cfg = _load(args)
    lo, hi = args.bounds_db
    if not (math.isfinite(lo) and math.isfinite(hi)) or lo > hi:
        raise ConfigError(f"malformed bounds: [{lo}, {hi}]")
    report = optimize_gain(cfg.device, cfg.drive.with_(phi=0.0), (lo, hi))
    flags = []
    if report.boundary:
        flags.append("boundary")
    if not report.unimodal:
        flags.append("non-unimodal")
    print(f"optimal gain        = {report.gain_db:.4f} dB"
          + (f"  [{', '.join(flags)}]" if flags else ""))
    print(f"eta_meas at optimum = {report.eta_meas:.6f}")
    print(f"bracket             = [{report.bracket_db[0]:.4f}, "
          f"{report.bracket_db[1]:.4f}] dB")
    if args.out:
        manifest = RunManifest(command="optimize", config=cfg.resolved,
                               args={"bounds_db": [lo, hi]})
        write_json(Path(args.out), {
            "gain_db": report.gain_db,
            "eta_meas": report.eta_meas,
            "bounds_db": list(report.bounds_db),
            "bracket_db": list(report.bracket_db),
            "curvature": report.curvature,
            "boundary": report.boundary,
            "unimodal": report.unimodal,
            "coarse_grid": report.coarse_grid,
        }, manifest)
        print(f"wrote {args.out}")
    return EXIT_OK


def cmd_serve(args) -> int:
    import uvicorn

    from .service import app

    uvicorn.run(app, host=args.host, port=args.port)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qpa-readout",
        description="Dispersive readout through a parametric cavity: rates, "
                    "efficiency, sweeps, brute-force verification.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_config(p):
        p.add_argument("--config", required=True,
                       help="config file path or bundled name (fig2/fig3/fig4)")
        p.add_argument("--gain-db", type=float, default=None)
        p.add_argument("--phi", type=float, default=None,
                       help="drive phase in rad (0 amplifier, pi/2 squeezer)")
        p.add_argument("--pin-dbm", type=float, default=None)
        p.add_argument("--pin-off", action="store_true",
                       help="switch the measurement tone off")
        p.add_argument("--nadd", type=float, default=None)
        p.add_argument("--eta-loss", type=float, default=None)

    p = sub.add_parser("rates", help="closed-form rates and efficiency at one point")
    add_config(p)
    p.add_argument("--out", default=None, help="optional CSV output")
    p.add_argument("--moments-out", default=None,
                   help="optional CSV of conditioned output-field moments "
                        "(the readout ellipses)")
    p.add_argument("--server", default=None,
                   help="route the computation through a running service URL")
    p.set_defaults(fn=cmd_rates)

    p = sub.add_parser("sweep", help="grid sweep to CSV (and optional SVG plot)")
    add_config(p)
    p.add_argument("--spec", required=True,
                   help="sweep-spec INI file or bundled name (fig3g/fig8)")
    p.add_argument("--out", required=True)
    p.add_argument("--plot", default=None)
    p.add_argument("--plot-x", default=None)
    p.add_argument("--plot-y", default=None)
    p.add_argument("--plot-group", default=None)
    p.add_argument("--plot-z", default=None, help="heatmap value column")
    p.set_defaults(fn=cmd_sweep)

    p = sub.add_parser("oracle-check",
                       help="brute-force Fock-space verification suite")
    add_config(p)
    p.add_argument("--suite", choices=("quick", "full"), default="quick")
    p.add_argument("--seed", type=int, default=20260811)
    p.add_argument("--out", default=None)
    p.add_argument("--corrupt-chi", type=float, default=1.0,
                   help="self-test hook: scale chi on the analytic side only")
    p.add_argument("--workers", type=int, default=None,
                   help="suite worker processes (default: logical cores)")
    p.set_defaults(fn=cmd_oracle_check)

    p = sub.add_parser("trajectories",
                       help="synthetic measurement records, SNR curve, fitted rate")
    add_config(p)
    p.add_argument("--records", type=int, default=4000)
    p.add_argument("--tint-max", type=float, default=280e-9,
                   help="longest integration time in seconds")
    p.add_argument("--seed", type=int, default=20260811)
    p.add_argument("--fit-model", choices=("t1-modified", "double-gaussian"),
                   default="t1-modified")
    p.add_argument("--out-prefix", required=True)
    p.add_argument("--records-out", default=None,
                   help="optional CSV dump of the raw integrated records")
    p.set_defaults(fn=cmd_trajectories)

    p = sub.add_parser("optimize", help="gain maximizing eta_meas")
    add_config(p)
    p.add_argument("--bounds-db", type=float, nargs=2, required=True,
                   metavar=("LO", "HI"))
    p.add_argument("--out", default=None)
    p.set_defaults(fn=cmd_optimize)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(fn=cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ThresholdError as exc:
        print(f"physics error: {exc}", file=sys.stderr)
        return EXIT_PHYSICS
    except QpaReadoutError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PHYSICS


if __name__ == "__main__":
    sys.exit(main())
