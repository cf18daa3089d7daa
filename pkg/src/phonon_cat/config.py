"""Experiment configuration: JSON schema, presets and resolution into model objects.

Frequencies are entered in ordinary Hz (fields ending in ``_hz``) and
converted to rad/s here.  Unknown keys are rejected everywhere.
"""

from __future__ import annotations

import copy
import json
from importlib import resources
from pathlib import Path

import jsonschema

from .magnetics import MagnetPair, gradients, saturation
from .model import TWO_PI, DeviceParams, EffectiveModelParams, SystemParams, system_from_device

PRESETS = ("fig2c", "fig3a", "fig4", "fig5a", "fig5b", "figA3", "figG")


class ConfigError(ValueError):
    """Schema or consistency violation in an experiment configuration."""


_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_nonneg = {"type": "number", "minimum": 0}
_int_pos = {"type": "integer", "minimum": 1}
_num_list = {"type": "array", "items": _num, "minItems": 1}
_pos_list = {"type": "array", "items": _pos, "minItems": 1}


def _obj(props: dict, required: tuple = ()) -> dict:
    return {"type": "object", "properties": props, "additionalProperties": False,
            "required": list(required)}


SCHEMA = _obj({
    "description": {"type": "string"},
    "device": _obj({
        "z_zpf_m": _pos,
        "omega_m_hz": _pos,
        "Q": _pos,
        "T_K": _pos,
        "gamma_z_hz": _nonneg,
        "G2_T_per_m2": _nonneg,
        "G1_T_per_m": _num,
    }, ("z_zpf_m", "omega_m_hz", "Q", "T_K", "gamma_z_hz")),
    "system": _obj({
        "g2_hz": _nonneg,
        "Omega_hz": _nonneg,
        "delta_sigma_hz": _num,
        "delta_m_hz": _num,
        "gamma_m_hz": _nonneg,
        "n_th": _nonneg,
        "gamma_z_hz": _nonneg,
    }),
    "magnets": _obj({
        "material": {"type": "string"},
        "radius_m": _pos,
        "length_m": _pos,
        "gap_m": _pos,
        "offset_m": _num,
    }, ("material",)),
    "lab": _obj({
        "D_hz": _pos,
        "omega_x_hz": _pos,
        "Omega_x_hz": _nonneg,
        "omega_z_hz": _nonneg,
        "Omega_z_hz": _nonneg,
        "lab_amplitude": {"type": "boolean"},
    }, ("omega_x_hz", "Omega_x_hz")),
    "measurement": _obj({
        "amplitude": _nonneg,
        "n_angles": _int_pos,
        "angles_rad": _num_list,
        "shots": _int_pos,
        "seed": {"type": "integer", "minimum": 0},
    }, ("amplitude", "shots")),
    "sweep": _obj({
        "Omega_hz": {"type": "array", "items": _nonneg, "minItems": 1},
        "gamma_z_hz": {"type": "array", "items": _nonneg, "minItems": 1},
        "z_zpf_m": _pos_list,
        "Q": _pos_list,
        "gap_m": _pos_list,
        "offset_m": _num_list,
        "materials": {"type": "array", "items": {"type": "string"}, "minItems": 1},
    }),
    "run": _obj({
        "n_max": {"type": "integer", "minimum": 2},
        "t_final_s": _pos,
        "dt_s": _pos,
        "n_samples": {"type": "integer", "minimum": 2},
        "sample_times_s": {"type": "array", "items": _nonneg},
        "snapshot_times_s": {"type": "array", "items": _nonneg},
        "seed": {"type": "integer", "minimum": 0},
        "output_dir": {"type": "string"},
        "trajectory_count": _int_pos,
        "threads": _int_pos,
        "record_every": _int_pos,
        "rtol": _pos,
        "grid": _obj({"half_width": _pos, "points": {"type": "integer", "minimum": 3}}),
        "cattiness_rule": {"enum": ["occupation", "amplitude"]},
        "steady_method": {"enum": ["auto", "direct", "longtime"]},
        "full_amplitude": {"type": "boolean"},
    }),
})


def validate(cfg: dict) -> dict:
    try:
        jsonschema.validate(cfg, SCHEMA)
    except jsonschema.ValidationError as exc:
        path = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"{path}: {exc.message}") from None
    if "magnets" in cfg:
        try:
            saturation(cfg["magnets"]["material"])
        except KeyError as exc:
            raise ConfigError(str(exc)) from None
    for m in cfg.get("sweep", {}).get("materials", []):
        try:
            saturation(m)
        except KeyError as exc:
            raise ConfigError(str(exc)) from None
    return cfg


def load_preset(name: str) -> dict:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; available: {', '.join(PRESETS)}")
    with resources.files("phonon_cat").joinpath(f"presets/{name}.json").open() as fh:
        return json.load(fh)


def merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in override.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def load(path: str | Path | None = None, preset: str | None = None) -> dict:
    if path is None and preset is None:
        raise ConfigError("either --config or --preset is required")
    cfg = load_preset(preset) if preset else {}
    if path is not None:
        try:
            user = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        if not isinstance(user, dict):
            raise ConfigError("config root must be an object")
        cfg = merge(cfg, user)
    return validate(cfg)


def magnet_pair(cfg: dict) -> MagnetPair | None:
    m = cfg.get("magnets")
    if m is None:
        return None
    return MagnetPair.of(m["material"], m.get("radius_m", 15e-9), m.get("length_m", 150e-9),
                         m.get("gap_m", 30e-9))


def device(cfg: dict) -> DeviceParams:
    d = cfg.get("device")
    if d is None:
        raise ConfigError("a 'device' section is required")
    G2 = d.get("G2_T_per_m2")
    G1 = d.get("G1_T_per_m", 0.0)
    if G2 is None:
        pair = magnet_pair(cfg)
        if pair is None:
            raise ConfigError("device.G2_T_per_m2 or a 'magnets' section is required")
        rep = gradients(pair, cfg["magnets"].get("offset_m", 0.0))
        G2 = abs(rep.G2)
        if "G1_T_per_m" not in d:
            G1 = rep.G1
    return DeviceParams(
        z_zpf=d["z_zpf_m"],
        omega_m=TWO_PI * d["omega_m_hz"],
        Q=d["Q"],
        T=d["T_K"],
        gamma_z=TWO_PI * d["gamma_z_hz"],
        G2=G2,
        G1=G1,
    )


def system(cfg: dict, **overrides) -> SystemParams:
    """Rotating-frame parameters: derived from the device, then explicit overrides."""
    s = cfg.get("system", {})
    if "device" in cfg:
        base = system_from_device(device(cfg))
    else:
        if "g2_hz" not in s:
            raise ConfigError("system.g2_hz is required without a device section")
        base = SystemParams(g2=0.0)
    fields = {}
    for key, attr in (("g2_hz", "g2"), ("Omega_hz", "Omega"), ("delta_sigma_hz", "delta_sigma"),
                      ("delta_m_hz", "delta_m"), ("gamma_m_hz", "gamma_m"), ("gamma_z_hz", "gamma_z")):
        if key in s:
            fields[attr] = TWO_PI * s[key]
    if "n_th" in s:
        fields["n_th"] = s["n_th"]
    fields.update(overrides)
    return base.with_(**fields)


def lab(cfg: dict) -> tuple[EffectiveModelParams, bool] | None:
    s = cfg.get("lab")
    if s is None:
        return None
    p = EffectiveModelParams(
        D=TWO_PI * s.get("D_hz", 2.88e9),
        omega_x=TWO_PI * s["omega_x_hz"],
        Omega_x=TWO_PI * s["Omega_x_hz"],
        omega_z_drive=TWO_PI * s.get("omega_z_hz", 0.0),
        Omega_z=TWO_PI * s.get("Omega_z_hz", 0.0),
    )
    return p, bool(s.get("lab_amplitude", False))


def run_section(cfg: dict) -> dict:
    return cfg.get("run", {})
