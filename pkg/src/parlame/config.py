"""Run configuration: a single YAML document holding every knob.

No tolerance or threshold is hidden in code; ``default_config`` is the one
source of defaults and ``parlame config init`` prints it.
"""

from __future__ import annotations

import copy

import yaml

from . import kernels as kr
from .errors import ConfigurationError
from .geometry import QuadratureSpec


def default_config() -> dict:
    return {
        "version": 1,
        "seed": 20240801,
        "material": {"mu": 1.0, "lam": 0.5, "dim": 2},
        "geometry": {
            "kind": "reference_disk",      # or "interval"
            "t_end": 1.0,
            "gamma_half_width": 0.7853981633974483,
            "cap_height": 0.6,
            "omega_radius_factor": 0.75,
            "blend_width_frac": 0.12,
            "cap_length": 0.6,             # interval variant only
        },
        "quadrature": {
            "volume_angular_order": 6,
            "volume_angular_panels": 6,
            "volume_radial_order": 8,
            "boundary_order": 8,
            "boundary_panels": 4,
            "time_panels": 8,
            "time_order": 6,
            "singular_split": 1.0e-3,
        },
        "small_quadrature": {
            "volume_angular_order": 6,
            "volume_angular_panels": 2,
            "volume_radial_order": 6,
            "boundary_order": 4,
            "boundary_panels": 2,
            "time_panels": 6,
            "time_order": 5,
            "singular_split": 1.0e-3,
        },
        "dictionary": {
            "count": 64,
            "ring_radius_factor": 1.4,
            "near_radius_factor": 1.08,
            "near_fraction": 0.5,
            "time_offset": 0.3,
            "pre_initial_every": 4,
        },
        "dbo": {
            "drop_tol": 1.0e-12,
            "sigma_floor_rel": 1.0e-14,
        },
        "truth": {
            "sources": [{"y": [1.9, 0.25], "tau": 0.3, "column": 0}],
            "weights": [1.0],
        },
        "noise": {"level": 0.0},
        "truncation": {
            "rule": "fixed",               # fixed | discrepancy
            "n_fixed": 24,
            "delta": 0.0,                  # 0 -> morozov_tau * noise scale
            "morozov_tau": 1.5,
            "collocation_offset": 0.02,
        },
        "diagnostic": {"window": 8, "slope_min": 0.1},
        "evaluation": {
            "grid_angular": 16,
            "grid_radial": 5,
            "grid_times": 10,
            "max_radius_frac": 0.95,
        },
    }


def _merge(base: dict, override: dict, path=""):
    out = copy.deepcopy(base)
    for k, v in override.items():
        if k not in base:
            raise ConfigurationError(f"unknown config key {path + k!r}")
        if isinstance(base[k], dict):
            if not isinstance(v, dict):
                raise ConfigurationError(f"{path + k!r} must be a mapping")
            out[k] = _merge(base[k], v, path + k + ".")
        else:
            out[k] = v
    return out


def load_config(path=None, overrides: dict | None = None) -> dict:
    """Defaults, overlaid with a YAML file and explicit overrides."""
    cfg = default_config()
    if path is not None:
        with open(path) as f:
            user = yaml.safe_load(f) or {}
        cfg = _merge(cfg, user)
    if overrides:
        cfg = _merge(cfg, overrides)
    validate_config(cfg)
    return cfg


def save_config(path, cfg: dict):
    with open(path, "w") as f:
        f.write("# parlame run configuration (all knobs, no hidden constants)\n")
        yaml.safe_dump(cfg, f, sort_keys=False)


def validate_config(cfg: dict):
    mat = cfg["material"]
    kr.LameParams(mat["mu"], mat["lam"], int(mat["dim"]))   # raises if bad
    if cfg["geometry"]["kind"] not in ("reference_disk", "interval"):
        raise ConfigurationError(
            f"unknown geometry kind {cfg['geometry']['kind']!r}")
    if cfg["truncation"]["rule"] not in ("fixed", "discrepancy"):
        raise ConfigurationError(
            f"unknown truncation rule {cfg['truncation']['rule']!r}")
    if cfg["noise"]["level"] < 0:
        raise ConfigurationError("noise level must be >= 0")
    quad_spec(cfg["quadrature"])
    quad_spec(cfg["small_quadrature"])


def quad_spec(section: dict) -> QuadratureSpec:
    return QuadratureSpec(**section)


def material_params(cfg: dict) -> kr.LameParams:
    m = cfg["material"]
    return kr.LameParams(m["mu"], m["lam"], int(m["dim"]))
