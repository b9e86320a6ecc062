"""Plain-text `key = value` experiment configuration with unit suffixes.

Lines look like ``P_S = 15 dBW`` or ``ris_pos = 0, 80, 65.5``. Comments start
with '#'. Every key has a canonical unit (see KEYS below); a matching suffix
is optional, a mismatched one is an error. An empty file yields the full
default parameter set.
"""

from __future__ import annotations

import math
from dataclasses import replace

import numpy as np

from .channels import FadingParams
from .experiment import ExperimentSpec, SpecValidationError
from .geometry import SceneConfig, vec3
from .link import LinkParams


class ConfigError(ValueError):
    pass


_FREQ_UNITS = {"hz": 1.0, "khz": 1e3, "mhz": 1e6, "ghz": 1e9}


def _parse_scalar(text: str, kind: str, key: str) -> float:
    toks = text.split()
    if len(toks) == 1:
        val, suffix = toks[0], None
    elif len(toks) == 2:
        val, suffix = toks
    else:
        raise ConfigError(f"{key}: cannot parse value {text!r}")
    try:
        x = float(val)
    except ValueError as exc:
        raise ConfigError(f"{key}: bad number {val!r}") from exc
    if suffix is None:
        if kind == "freq":
            return x  # bare frequency means Hz
        return x
    s = suffix.lower()
    if kind == "freq":
        if s not in _FREQ_UNITS:
            raise ConfigError(f"{key}: bad unit suffix {suffix!r}")
        return x * _FREQ_UNITS[s]
    expected = {"s": ("s",), "m": ("m",), "db": ("db",), "dbw": ("dbw",),
                "dbm": ("dbm",), "j": ("j",), "plain": ()}[kind]
    if s not in expected:
        raise ConfigError(f"{key}: bad unit suffix {suffix!r} (expected {expected})")
    return x


def _parse_list(text: str, conv) -> list:
    return [conv(tok.strip()) for tok in text.split(",") if tok.strip()]


def _parse_vec3(text: str, key: str) -> np.ndarray:
    parts = [p for p in text.replace("m", " ").split(",")]
    vals = []
    for p in parts:
        try:
            vals.append(float(p.strip()))
        except ValueError as exc:
            raise ConfigError(f"{key}: bad coordinate {p!r}") from exc
    if len(vals) != 3:
        raise ConfigError(f"{key}: expected three coordinates")
    return vec3(*vals)


# key -> (section, field, kind)
KEYS = {
    "user_pos": ("scene", "user_pos", "vec3"),
    "obstacle_pos": ("scene", "obstacle_pos", "vec3"),
    "ris_pos": ("scene", "ris_pos", "vec3"),
    "carrier_freq": ("scene", "carrier_freq_hz", "freq"),
    "orbit_radius_km": ("scene", "orbit_radius_km", "plain"),
    "kepler_mu": ("scene", "kepler_mu_km3s2", "plain"),
    "altitude_km": ("scene", "altitude_km", "plain"),
    "period": ("scene", "period_s", "s"),
    "slot": ("scene", "slot_s", "s"),
    "beta": ("scene", "radiation_exponent", "plain"),
    "obstacle_height": ("scene", "obstacle_height_m", "m"),
    "theta0": ("scene", "initial_anomaly_rad", "plain"),
    "kappa": ("fading", "rician_kappa", "plain"),
    "rain_mu": ("fading", "rain_mu", "plain"),
    "rain_sigma2": ("fading", "rain_sigma2", "plain"),
    "L": ("fading", "sat_antennas", "int"),
    "M": ("fading", "ris_rows", "int"),
    "N": ("fading", "ris_cols", "int"),
    "ris_user_literal_cru": ("fading", "ris_user_literal_cru", "bool"),
    "beam_gain": ("fading", "beam_gain", "db_linear"),
    "P_S": ("link", "p_s_dbw", "dbw"),
    "G_S": ("link", "g_s_db", "db"),
    "G_U": ("link", "g_u_db", "db"),
    "G_R": ("link", "g_r_db", "db"),
    "sigma1": ("link", "sigma1_dbw", "dbw"),
    "sigma2": ("link", "sigma2_dbw", "dbw"),
    "P_C": ("link", "p_c_dbm", "dbm"),
    "eta": ("link", "eta", "plain"),
    "a_max": ("link", "a_max_db", "db"),
    "a_max_is_amplitude_db": ("link", "a_max_is_amplitude_db", "bool"),
    "E_max": ("link", "e_max_j", "j_or_inf"),
    "seeds": ("spec", "seeds", "int_list"),
    "K_candidates": ("spec", "k_candidates", "int_list"),
    "sweep": ("spec", "sweep", "str"),
    "sweep_values": ("spec", "sweep_values", "float_list"),
    "baselines": ("spec", "baselines", "str_list"),
    "out": ("spec", "out", "str"),
    "profile": ("spec", "profile", "str"),
    "gr_samples": ("spec", "gr_samples", "int"),
    "workers": ("spec", "workers", "int"),
    "slot_rates_mode": ("spec", "slot_rates_mode", "bool"),
    "ao_eps": ("spec", "ao_eps", "plain"),
    "ao_max_iter": ("spec", "ao_max_iter", "int"),
}


def parse_assignments(text: str) -> dict:
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        out[key] = value
    return out


def _convert(key: str, value: str):
    _, _, kind = KEYS[key]
    if kind in ("plain", "s", "m", "db", "dbw", "dbm", "j", "freq"):
        return _parse_scalar(value, kind, key)
    if kind == "int":
        return int(_parse_scalar(value, "plain", key))
    if kind == "bool":
        if value.strip().lower() in ("1", "true", "yes", "on"):
            return True
        if value.strip().lower() in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"{key}: bad boolean {value!r}")
    if kind == "vec3":
        return _parse_vec3(value, key)
    if kind == "int_list":
        return _parse_list(value, int)
    if kind == "float_list":
        return _parse_list(value, float)
    if kind == "str_list":
        return _parse_list(value, str)
    if kind == "str":
        return value.strip()
    if kind == "j_or_inf":
        if value.strip().lower() in ("inf", "none"):
            return math.inf
        return _parse_scalar(value, "j", key)
    if kind == "db_linear":
        return 10.0 ** (_parse_scalar(value, "db", key) / 10.0)
    raise ConfigError(f"{key}: unhandled kind {kind}")


def spec_from_assignments(assignments: dict) -> ExperimentSpec:
    scene_kw, fading_kw, link_kw, spec_kw = {}, {}, {}, {}
    target = {"scene": scene_kw, "fading": fading_kw, "link": link_kw,
              "spec": spec_kw}
    for key, raw in assignments.items():
        section, fieldname, _ = KEYS[key]
        target[section][fieldname] = _convert(key, raw)
    scene = SceneConfig(**scene_kw)
    fading = FadingParams(**fading_kw)
    link = LinkParams(**link_kw)
    spec = ExperimentSpec(scene=scene, fading=fading, link=link, **spec_kw)
    try:
        spec.validate()
    except SpecValidationError as exc:
        raise ConfigError(str(exc)) from exc
    return spec


def load_config(path) -> ExperimentSpec:
    """Parse and validate an experiment config file."""
    with open(path) as fh:
        text = fh.read()
    try:
        return spec_from_assignments(parse_assignments(text))
    except (ValueError, TypeError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc
