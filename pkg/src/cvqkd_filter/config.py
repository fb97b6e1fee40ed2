"""JSON run configuration, validated against a schema that rejects unknown keys.

Every physical quantity carries its unit in the key name (``_snu``,
``_db``, ``_km``, ``_deg``). Relative file paths are resolved against the
directory of the config file.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import jsonschema

from .errors import CVQKDError
from .mutual_info import GridSpec
from .params import ChannelParams, Detection, FilterSettings, ModulationParams


class ConfigError(CVQKDError):
    """The run configuration is malformed or inconsistent."""


_num = {"type": "number"}
_nonneg = {"type": "number", "minimum": 0}
_pair = {"type": "array", "items": _num, "minItems": 2, "maxItems": 2}
_bounds = {"type": "array", "items": _pair, "minItems": 1, "maxItems": 2}


def _obj(props, required=()):
    return {"type": "object", "properties": props, "required": list(required), "additionalProperties": False}


SCHEMA = _obj({
    "detection": {"enum": ["homodyne", "heterodyne"]},
    "channel": _obj({
        "transmittance": {"type": "number", "minimum": 0, "maximum": 1},
        "loss_db": _nonneg,
        "w_x_snu": {"type": "number", "minimum": 1},
        "w_p_snu": {"type": "number", "minimum": 1},
        "excess_noise_x_snu": _nonneg,
        "excess_noise_p_snu": _nonneg,
        "xi_x_snu": _nonneg,
        "xi_p_snu": _nonneg,
        "eta": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
        "xi_d_snu": {"oneOf": [_nonneg, {"type": "array", "items": _nonneg, "minItems": 2, "maxItems": 2}]},
    }),
    "modulation": _obj({
        "vmod_x_snu": _nonneg,
        "vmod_p_snu": _nonneg,
        "beta": {"type": "number", "minimum": 0, "exclusiveMaximum": 1},
    }),
    "filter": _obj({
        "g_x": _nonneg, "g_p": _nonneg,
        "c_x_snu": _nonneg, "c_p_snu": _nonneg, "c_rad_snu": _nonneg,
    }),
    "grid": _obj({
        "delta_snu": {"type": "number", "exclusiveMinimum": 0},
        "a_max_snu": {"type": "number", "exclusiveMinimum": 0},
        "b_max_snu": {"type": "number", "exclusiveMinimum": 0},
    }),
    "truncation": {"oneOf": [{"const": "auto"}, {"type": "integer", "minimum": 2}]},
    "seed": {"type": "integer", "minimum": 0},
    "threads": {"type": "integer", "minimum": 1},
    "optimize": _obj({
        "stages": {"type": "array", "items": {"enum": ["vmod_gg02", "alice_gains", "bob_cutoffs"]},
                   "minItems": 1, "uniqueItems": True},
        "gain_bounds": _bounds,
        "cutoff_bounds_snu": _bounds,
        "vmod_bounds_snu": _bounds,
        "resolution": {"type": "integer", "minimum": 2},
        "refinements": {"type": "integer", "minimum": 0},
    }),
    "simulate": _obj({
        "n_samples": {"type": "integer", "minimum": 1},
        "gain_x": {"type": "number", "exclusiveMinimum": 0},
        "gain_p": {"type": "number", "exclusiveMinimum": 0},
        "v_sn": {"type": "number", "exclusiveMinimum": 0},
        "v_dn": _nonneg,
    }, required=["n_samples"]),
    "calibrate": _obj({
        "data_csv": {"type": "string"},
        "sidecar_json": {"type": "string"},
        "v_sn": {"type": "number", "exclusiveMinimum": 0},
        "v_dn": _nonneg,
        "subtract_dark": {"type": "boolean"},
        "min_samples": {"type": "integer", "minimum": 2},
    }),
    "satellite": _obj({
        "profile_csv": {"type": "string"},
        "threshold_bits_per_use": _nonneg,
        "vmod_snu": _nonneg,
        "beta": {"type": "number", "minimum": 0, "exclusiveMaximum": 1},
        "eta": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
        "xi_d_snu": _nonneg,
        "r_earth_km": {"type": "number", "exclusiveMinimum": 0},
        "l_zenith_km": {"type": "number", "exclusiveMinimum": 0},
        "optimize_gains": {"type": "boolean"},
    }),
})


@dataclass
class RunConfig:
    raw: dict
    base_dir: Path = field(default_factory=Path.cwd)

    def section(self, name) -> dict:
        return self.raw.get(name, {})

    @property
    def detection(self) -> Detection:
        return Detection(self.raw.get("detection", "homodyne"))

    @property
    def seed(self) -> int:
        return int(self.raw.get("seed", 0))

    @property
    def threads(self) -> int:
        return int(self.raw.get("threads", 1))

    @property
    def truncation(self):
        return self.raw.get("truncation", "auto")

    def path(self, value: str) -> Path:
        p = Path(value)
        return p if p.is_absolute() else self.base_dir / p

    def channel(self) -> ChannelParams:
        c = self.section("channel")
        if "transmittance" in c and "loss_db" in c:
            raise ConfigError("give either channel.transmittance or channel.loss_db, not both")
        if "transmittance" in c:
            T = c["transmittance"]
        elif "loss_db" in c:
            T = 10.0 ** (-c["loss_db"] / 10.0)
        else:
            raise ConfigError("channel.transmittance or channel.loss_db is required")
        has_w = "w_x_snu" in c or "w_p_snu" in c
        has_xi = "excess_noise_x_snu" in c or "excess_noise_p_snu" in c
        if has_w and has_xi:
            raise ConfigError("give Eve's thermal variance (w_*_snu) or channel excess noise, not both")
        common = dict(
            xi_x=c.get("xi_x_snu", 0.0), xi_p=c.get("xi_p_snu", 0.0), eta=c.get("eta", 1.0),
            xi_d=tuple(c["xi_d_snu"]) if isinstance(c.get("xi_d_snu"), list) else c.get("xi_d_snu", 0.0),
        )
        try:
            if has_xi:
                ex = c.get("excess_noise_x_snu", c.get("excess_noise_p_snu"))
                ep = c.get("excess_noise_p_snu", ex)
                return ChannelParams.from_excess_noise(T, ex, ep, **common)
            wx = c.get("w_x_snu", c.get("w_p_snu", 1.0))
            return ChannelParams(T, wx, c.get("w_p_snu", wx), **common)
        except ValueError as e:
            raise ConfigError(str(e)) from e

    def modulation(self) -> ModulationParams:
        m = self.section("modulation")
        if "vmod_x_snu" not in m and "vmod_p_snu" not in m:
            raise ConfigError("modulation.vmod_x_snu is required")
        vx = m.get("vmod_x_snu", m.get("vmod_p_snu"))
        return ModulationParams(vx, m.get("vmod_p_snu", vx), m.get("beta", 0.92))

    def filters(self) -> FilterSettings:
        f = self.section("filter")
        return FilterSettings(
            f.get("g_x", 0.0), f.get("g_p", 0.0), f.get("c_x_snu", 0.0), f.get("c_p_snu", 0.0),
            f.get("c_rad_snu", 0.0),
        )

    def grid(self) -> GridSpec:
        g = self.section("grid")
        base = GridSpec.homodyne() if self.detection is Detection.HOMODYNE else GridSpec.heterodyne()
        return GridSpec(
            g.get("delta_snu", base.delta), g.get("a_max_snu", base.a_max), g.get("b_max_snu", base.b_max),
        )


def validate(raw: dict) -> None:
    try:
        jsonschema.validate(raw, SCHEMA)
    except jsonschema.ValidationError as e:
        where = "/".join(str(p) for p in e.absolute_path) or "<root>"
        raise ConfigError(f"config error at {where}: {e.message}") from e


def load_config(path=None, overrides: dict | None = None) -> RunConfig:
    """Read, merge top-level overrides, then validate."""
    raw, base = {}, Path.cwd()
    if path is not None:
        p = Path(path)
        try:
            raw = json.loads(p.read_text())
        except FileNotFoundError as e:
            raise ConfigError(f"config file not found: {p}") from e
        except json.JSONDecodeError as e:
            raise ConfigError(f"{p}: invalid JSON ({e})") from e
        if not isinstance(raw, dict):
            raise ConfigError(f"{p}: top level must be an object")
        base = p.resolve().parent
    for k, v in (overrides or {}).items():
        if v is None:
            continue
        if k == "delta_snu":
            raw.setdefault("grid", {})["delta_snu"] = v
        else:
            raw[k] = v
    validate(raw)
    return RunConfig(raw, base)
