"""Run configuration: TOML file with [geometry], [timing], [queue], [ftl],
[workload] and [policy] sections, flag overrides on top, echoed verbatim
into every report so a report can re-drive an identical run."""

from __future__ import annotations

import copy

try:
    import tomllib as tomli
except ImportError:          # Python < 3.11
    import tomli

from .ftl import GcConfig
from .geom import Geometry, TimingParams, page_transfer_time

DEFAULTS = {
    "geometry": {
        "num_channels": 3,
        "chips_per_channel": 3,
        "dies_per_chip": 2,
        "planes_per_die": 4,
        "blocks_per_die": 8192,
        "pages_per_block": 128,
        "page_size": 2048,
    },
    "timing": {
        "read_cell_time": 20.0,
        "program_cell_time_fast": 200.0,
        "program_cell_time_slow": 2200.0,
        "erase_cell_time": 1500.0,
        "bus_rate_mb_s": 166.0,
        "command_overhead_time": 0.2,
        "txn_decision_window": 1.0,
    },
    "queue": {
        "depth": 32,
    },
    "ftl": {
        "free_block_threshold": 0.05,
        "victim_policy": "greedy_max_invalid",
        "precondition_fill": 0.95,
        "export_fraction": 0.9,
        "readdressing_callback": True,
    },
    "workload": {
        "kind": "synthetic",        # synthetic | trace | builtin
        "trace_path": "",
        "builtin": "",
        "count": 1000,
        "read_fraction": 1.0,
        "sizes": {"4096": 1.0},
        "address_pattern": "uniform_random",
        "hot_fraction": 0.2,
        "hot_ratio": 0.8,
        "inter_arrival": "closed_loop",
        "arrival_rate": 1000.0,
        "address_space_mb": 64,
        "seed": 1,
        "precondition": "region",   # none | region | fill_fraction
    },
    "policy": {
        "name": "vas",
    },
    "report": {
        "snapshot_eps": -1.0,       # >0 enables the idle-slot tracker
    },
}


class ConfigError(ValueError):
    pass


def _merge(base, extra, path=""):
    out = copy.deepcopy(base)
    for key, value in extra.items():
        where = f"{path}.{key}" if path else key
        if key not in base:
            raise ConfigError(f"unknown config key {where!r}")
        if isinstance(base[key], dict) and not path:
            if not isinstance(value, dict):
                raise ConfigError(f"section {where!r} must be a table")
            out[key] = _merge(base[key], value, where)
        else:
            out[key] = value
    return out


def load_config(path=None, overrides=None) -> dict:
    """Effective config: defaults <- file <- overrides ('sec.key=value')."""
    cfg = copy.deepcopy(DEFAULTS)
    if path:
        try:
            with open(path, "rb") as fh:
                file_cfg = tomli.load(fh)
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except tomli.TOMLDecodeError as exc:
            raise ConfigError(f"bad TOML in {path}: {exc}") from None
        cfg = _merge(cfg, file_cfg)
    for item in overrides or ():
        cfg = apply_override(cfg, item)
    return cfg


def apply_override(cfg: dict, item: str) -> dict:
    if "=" not in item:
        raise ConfigError(f"override {item!r} is not section.key=value")
    key, _, raw = item.partition("=")
    parts = key.strip().split(".")
    if len(parts) != 2:
        raise ConfigError(f"override key {key!r} is not section.key")
    section, field = parts
    if section not in cfg or field not in cfg[section]:
        raise ConfigError(f"unknown config key {key!r}")
    current = cfg[section][field]
    value: object
    if isinstance(current, bool):
        value = raw.strip().lower() in ("1", "true", "yes", "on")
    elif isinstance(current, int):
        value = int(raw)
    elif isinstance(current, float):
        value = float(raw)
    elif isinstance(current, dict):
        value = {}
        for pair in raw.split(";"):
            k, _, v = pair.partition(":")
            value[k.strip()] = float(v)
    else:
        value = raw.strip()
    cfg = copy.deepcopy(cfg)
    cfg[section][field] = value
    return cfg


def build_geometry(cfg: dict) -> Geometry:
    try:
        return Geometry(**cfg["geometry"])
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad geometry: {exc}") from None


def build_timing(cfg: dict) -> TimingParams:
    t = dict(cfg["timing"])
    rate = t.pop("bus_rate_mb_s")
    try:
        return TimingParams(bus_transfer_time_per_page=page_transfer_time(
            cfg["geometry"]["page_size"], rate), **t)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad timing: {exc}") from None


def build_gc(cfg: dict) -> GcConfig:
    f = cfg["ftl"]
    try:
        return GcConfig(free_block_threshold=f["free_block_threshold"],
                        victim_policy=f["victim_policy"],
                        precondition_fill=f["precondition_fill"])
    except ValueError as exc:
        raise ConfigError(f"bad ftl section: {exc}") from None
