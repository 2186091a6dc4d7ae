"""Layered configuration: INI file < environment < explicit overrides.

Every physical key carries its unit in the name (kappa_over_2pi_hz, t1_s,
p_in_dbm, ...); values convert to the internal SI/angular system exactly
once, here. Environment variables override file values with the pattern
``QPA_READOUT_<SECTION>__<KEY>`` (e.g. ``QPA_READOUT_DRIVE__P_IN_DBM``).

Three example configurations named fig2, fig3, and fig4 ship with the
package and can be referenced by bare name wherever a config path is
accepted.
"""

from __future__ import annotations

import configparser
import os
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .constants import TWO_PI, dbm_to_watts
from .errors import ConfigError, ParameterError
from .params import DeviceParams, DriveSpec, PumpSpec

ENV_PREFIX = "QPA_READOUT_"

_DEVICE_KEYS = {
    "kappa_over_2pi_hz", "kappa_ext_over_2pi_hz", "kappa_int_over_2pi_hz",
    "chi_over_2pi_hz", "omega_qpa_over_2pi_hz", "omega_q_over_2pi_hz",
    "t1_s", "t2_s",
}
_PUMP_KEYS = {"gain_qpa_db", "pump_phase_rad"}
_DRIVE_KEYS = {"p_in_dbm", "p_in_w", "phi_rad", "n_add", "eta_loss"}

_SCHEMA = {"device": _DEVICE_KEYS, "pump": _PUMP_KEYS, "drive": _DRIVE_KEYS}


@dataclass(frozen=True)
class RunConfig:
    """Fully resolved configuration plus the flat mapping it came from."""

    device: DeviceParams
    pump: PumpSpec
    drive: DriveSpec
    resolved: dict


def bundled_config_path(name: str) -> Path:
    candidate = resources.files("qpa_readout").joinpath("configs", f"{name}.ini")
    with resources.as_file(candidate) as path:
        if not path.exists():
            raise ConfigError(f"no bundled config named '{name}'")
        return Path(path)


def bundled_config_names() -> list[str]:
    root = resources.files("qpa_readout").joinpath("configs")
    return sorted(p.name[:-4] for p in root.iterdir() if p.name.endswith(".ini"))


def bundled_sweep_spec_path(name: str) -> Path:
    candidate = resources.files("qpa_readout").joinpath("configs", "sweeps",
                                                        f"{name}.ini")
    with resources.as_file(candidate) as path:
        if not path.exists():
            raise ConfigError(f"no bundled sweep spec named '{name}'")
        return Path(path)


def _read_ini(path: Path) -> dict:
    parser = configparser.ConfigParser()
    try:
        with open(path, "r", encoding="utf-8") as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    except configparser.Error as exc:
        raise ConfigError(f"malformed config file {path}: {exc}") from exc
    mapping: dict = {}
    for section in parser.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown config section [{section}] in {path}")
        mapping[section] = dict(parser.items(section))
    return mapping


def _env_overrides(environ) -> dict:
    mapping: dict = {}
    for key, value in environ.items():
        if not key.startswith(ENV_PREFIX):
            continue
        rest = key[len(ENV_PREFIX):]
        if "__" not in rest:
            continue
        section, _, name = rest.partition("__")
        section = section.lower()
        name = name.lower()
        if section in _SCHEMA:
            mapping.setdefault(section, {})[name] = value
    return mapping


def _merge(base: dict, extra: dict) -> dict:
    out = {s: dict(kv) for s, kv in base.items()}
    for section, kv in extra.items():
        out.setdefault(section, {}).update(kv)
    return out


def _to_float(section: str, key: str, value) -> float:
    try:
        return float(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[{section}] {key} = {value!r} is not a number") from exc


def resolve_mapping(mapping: dict) -> RunConfig:
    """Build validated parameter objects from a flat section->key->value dict."""
    for section, kv in mapping.items():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown config section [{section}]")
        for key in kv:
            if key not in _SCHEMA[section]:
                raise ConfigError(f"unknown key '{key}' in section [{section}]")
    dev = mapping.get("device", {})
    pump_kv = mapping.get("pump", {})
    drive_kv = mapping.get("drive", {})

    def dev_f(key, default=None):
        if key not in dev:
            if default is None:
                raise ConfigError(f"missing required [device] key '{key}'")
            return default
        return _to_float("device", key, dev[key])

    kappa_ext = None
    kappa_int = None
    if "kappa_ext_over_2pi_hz" in dev or "kappa_int_over_2pi_hz" in dev:
        kappa_ext = TWO_PI * dev_f("kappa_ext_over_2pi_hz")
        kappa_int = TWO_PI * dev_f("kappa_int_over_2pi_hz")
        kappa = kappa_ext + kappa_int if "kappa_over_2pi_hz" not in dev \
            else TWO_PI * dev_f("kappa_over_2pi_hz")
    else:
        kappa = TWO_PI * dev_f("kappa_over_2pi_hz")
    try:
        device = DeviceParams(
            kappa=kappa,
            chi=TWO_PI * dev_f("chi_over_2pi_hz"),
            omega_qpa=TWO_PI * dev_f("omega_qpa_over_2pi_hz"),
            omega_q=TWO_PI * dev_f("omega_q_over_2pi_hz"),
            t1=dev_f("t1_s"),
            t2=dev_f("t2_s"),
            kappa_ext=kappa_ext,
            kappa_int=kappa_int,
        )
        pump = PumpSpec.from_gain_db(
            _to_float("pump", "gain_qpa_db", pump_kv.get("gain_qpa_db", 0.0)),
            device.kappa,
            _to_float("pump", "pump_phase_rad", pump_kv.get("pump_phase_rad", 0.0)),
        )
        if "p_in_dbm" in drive_kv and "p_in_w" in drive_kv:
            raise ConfigError("give either p_in_dbm or p_in_w, not both")
        if "p_in_dbm" in drive_kv:
            p_in = dbm_to_watts(_to_float("drive", "p_in_dbm", drive_kv["p_in_dbm"]))
        elif "p_in_w" in drive_kv:
            p_in = _to_float("drive", "p_in_w", drive_kv["p_in_w"])
        else:
            p_in = 0.0
        drive = DriveSpec(
            p_in=p_in,
            phi=_to_float("drive", "phi_rad", drive_kv.get("phi_rad", 0.0)),
            n_add=_to_float("drive", "n_add", drive_kv.get("n_add", 0.0)),
            eta_loss=_to_float("drive", "eta_loss", drive_kv.get("eta_loss", 1.0)),
        )
    except ParameterError as exc:
        raise ConfigError(str(exc)) from exc
    resolved = {
        "device": {
            "kappa_rad_s": device.kappa,
            "chi_rad_s": device.chi,
            "omega_qpa_rad_s": device.omega_qpa,
            "omega_q_rad_s": device.omega_q,
            "t1_s": device.t1,
            "t2_s": device.t2,
            "t2_star_s": device.t2_star,
            "kappa_ext_rad_s": device.kappa_ext,
            "kappa_int_rad_s": device.kappa_int,
        },
        "pump": {
            "gain_qpa": pump.gain_qpa,
            "gain_qpa_db": pump.gain_db,
            "lambda_rad_s": pump.lam,
            "pump_phase_rad": pump.pump_phase,
        },
        "drive": {
            "p_in_w": drive.p_in,
            "phi_rad": drive.phi,
            "n_add": drive.n_add,
            "eta_loss": drive.eta_loss,
        },
    }
    return RunConfig(device=device, pump=pump, drive=drive, resolved=resolved)


def load_config(path_or_name: str, overrides: dict | None = None,
                environ=None) -> RunConfig:
    """Load and resolve a config by file path or bundled name.

    Precedence: file < environment (``QPA_READOUT_SECTION__KEY``) < the
    explicit ``overrides`` mapping (section -> key -> value).
    """
    environ = os.environ if environ is None else environ
    path = Path(path_or_name)
    if not path.exists() and not path.suffix:
        path = bundled_config_path(path_or_name)
    if not path.exists():
        raise ConfigError(f"config file not found: {path_or_name}")
    mapping = _read_ini(path)
    mapping = _merge(mapping, _env_overrides(environ))
    if overrides:
        mapping = _merge(mapping, overrides)
    return resolve_mapping(mapping)
