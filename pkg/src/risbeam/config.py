"""Experiment configuration: profiles, JSON overrides, unit conversion.

Configs are plain JSON-compatible dicts organized in blocks (geometry,
codebook, training, im, benchmark, hybrid, output). Two built-in profiles
provide complete defaults: "desk" is small enough for laptop runs and CI,
"paper" matches the full-scale deployment. A config file overrides the
selected profile block-wise. Powers may be given in dBm (keys ending in
_dbm) and are converted to watts exactly once, here.
"""

import copy
import hashlib
import json

from .geometry import SystemGeometry

DESK_PROFILE = {
    "geometry": {
        "wavelength_m": 0.03,
        "n1": 128,
        "n2": 1,
        "m_antennas": 4,
        "bs_position_m": [-4.0, 0.0, -3.0],
        "user_plane_y_m": 0.0,
        "max_power_dbm": 30.0,
        "noise_power_dbm": -90.0,
    },
    # Column partition: at this aperture the depth of focus grows like the
    # square of the range, so depth cells flip near their edges while
    # azimuth cells stay clean. Keeping one depth cell and cutting azimuth
    # only is what lets noiseless training land in the true leaf region.
    "codebook": {
        "x_range_m": [-4.0, 4.0],
        "z_range_m": [5.0, 8.0],
        "s1_x": 2,
        "s1_z": 1,
        "s2_x": 4,
        "s2_z": 1,
        "design_x": 768,
        "design_z": 32,
        "gain_db": 40.0,
        "bits": 4,
        "method": "socc",
    },
    "training": {
        "snr_db": 6.0,
        "noise": "off",
        "placements": 25,
        "seed": 7,
    },
    "im": {
        "k_users": 3,
        "bits": 3,
        "adapt_iters": 5,
        "inner_rounds": 6,
        "probe_rounds": 3,
        "step": 0.1,
        "perturb": 0.01,
        "seed": 11,
    },
    "benchmark": {
        "iters": 20,
        "bits": 3,
        "seed": 11,
    },
    "hybrid": {
        "m_rf": 2,
        "bits": 2,
        "rounds": 6,
        "region_index": 0,
    },
    "output": "out",
}

PAPER_PROFILE = {
    "geometry": {
        "wavelength_m": 0.03,
        "n1": 128,
        "n2": 4,
        "m_antennas": 4,
        "bs_position_m": [-40.0, 0.0, -25.0],
        "user_plane_y_m": 0.0,
        "max_power_dbm": 40.0,
        "noise_power_dbm": -110.0,
    },
    "codebook": {
        "x_range_m": [-30.0, 30.0],
        "z_range_m": [15.0, 75.0],
        "s1_x": 8,
        "s1_z": 4,
        "s2_x": 64,
        "s2_z": 16,
        "design_x": 256,
        "design_z": 32,
        "gain_db": 30.0,
        "bits": 2,
        "method": "socc",
    },
    "training": {
        "snr_db": 6.0,
        "noise": "off",
        "placements": 100,
        "seed": 7,
    },
    "im": {
        "k_users": 3,
        "bits": 3,
        "adapt_iters": 10,
        "inner_rounds": 10,
        "probe_rounds": 5,
        "step": 0.1,
        "perturb": 0.01,
        "seed": 11,
    },
    "benchmark": {
        "iters": 50,
        "bits": 3,
        "seed": 11,
    },
    "hybrid": {
        "m_rf": 4,
        "bits": 2,
        "rounds": 10,
        "region_index": 0,
    },
    "output": "out",
}

PROFILES = {"desk": DESK_PROFILE, "paper": PAPER_PROFILE}


def dbm_to_watts(dbm):
    return 10.0 ** (dbm / 10.0) * 1e-3


def db_to_amplitude(db):
    return 10.0 ** (db / 20.0)


def _merge(base, override):
    out = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def load_config(path=None, profile="desk"):
    """Resolve a full config: profile defaults, file overrides, watts."""
    if profile not in PROFILES:
        raise ValueError(f"unknown profile '{profile}'")
    cfg = copy.deepcopy(PROFILES[profile])
    if path is not None:
        with open(path) as fh:
            overrides = json.load(fh)
        if not isinstance(overrides, dict):
            raise ValueError("config file must contain a JSON object")
        cfg = _merge(cfg, overrides)
    return resolve_units(cfg)


def resolve_units(cfg):
    """Convert every *_dbm power to its watts twin, in place semantics."""
    cfg = copy.deepcopy(cfg)
    geo = cfg.get("geometry")
    if isinstance(geo, dict):
        for dbm_key, watt_key in (
            ("max_power_dbm", "max_power_w"),
            ("noise_power_dbm", "noise_power_w"),
        ):
            if dbm_key in geo:
                geo[watt_key] = dbm_to_watts(geo.pop(dbm_key))
    return cfg


def require_blocks(cfg, blocks):
    for name in blocks:
        if name not in cfg or not isinstance(cfg[name], dict):
            raise ValueError(f"config is missing the '{name}' block")


def _require_keys(block, name, keys):
    for key in keys:
        if key not in block:
            raise ValueError(f"config block '{name}' is missing '{key}'")


def geometry_from_config(cfg):
    require_blocks(cfg, ["geometry"])
    geo = cfg["geometry"]
    _require_keys(
        geo,
        "geometry",
        ["wavelength_m", "n1", "n2", "m_antennas", "bs_position_m",
         "max_power_w", "noise_power_w"],
    )
    return SystemGeometry(
        wavelength_m=float(geo["wavelength_m"]),
        n1=int(geo["n1"]),
        n2=int(geo["n2"]),
        m_antennas=int(geo["m_antennas"]),
        bs_position_m=tuple(geo["bs_position_m"]),
        user_plane_y_m=float(geo.get("user_plane_y_m", 0.0)),
        max_power_w=float(geo["max_power_w"]),
        noise_power_w=float(geo["noise_power_w"]),
    )


def config_hash(cfg):
    payload = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(payload.encode()).hexdigest()
