"""Experiment configuration: YAML schema, strict validation, presets.

Unknown keys are rejected with their full path so a typo cannot silently
drop a parameter mid-sweep. Device/timing presets are flat `key = value`
text files (see presets/); any field can be overridden inline.
"""

from __future__ import annotations

import importlib.resources
import os
from dataclasses import dataclass, field

import yaml

from .dram import DeviceGeometry, TimingParams
from .mitigations import MECHANISMS
from .metrics import EnergyModel


class ConfigError(ValueError):
    pass


_GEOMETRY_KEYS = {f: int for f in (
    "channels", "ranks_per_channel", "bankgroups_per_rank", "banks_per_bankgroup",
    "rows_per_bank", "columns_per_row", "bytes_per_column")}
_TIMING_KEYS = {f: int for f in (
    "tRCD", "tRAS", "tRP", "tRC", "tCCD_S", "tCCD_L", "tRRD_S", "tRRD_L",
    "tFAW", "tWR", "tRTP", "tRFC", "tREFI", "tREFW", "tRFM", "tCL", "tBL")}
_TIMING_KEYS["clock_period_ns"] = float

SCHEMA = {
    "geometry": {"preset": str, **_GEOMETRY_KEYS},
    "timing": {"preset": str, **_TIMING_KEYS},
    "controller": {
        "read_queue_depth": int, "write_queue_depth": int, "cap": int,
        "write_drain_high": int, "write_drain_low": int,
        "mapping": str, "mop_blocks_per_chunk": int,
    },
    "mitigation": {
        "mechanism": str, "nrh": int, "para_probability": float,
        "graphene_threshold": int, "graphene_entries": int, "graphene_max_entries": int,
        "rfm_threshold": int, "prac_threshold": int, "prac_burst": int,
        "blockhammer_threshold": int, "blockhammer_filter_bits": int,
        "blockhammer_hashes": int, "blockhammer_exact": bool,
    },
    "throttler": {
        "enabled": bool, "window_ms": float, "window_cycles": int,
        "threat_threshold": float, "outlier_ratio": float,
        "old_suspect_penalty": int, "new_suspect_divisor": int,
        "action_weights": {"victim_refresh": float, "rfm": float, "backoff_burst": float},
    },
    "llc": {"size_bytes": int, "ways": int, "hit_latency": int, "total_mshrs": int},
    "cores": {"issue_width": int, "max_outstanding_misses": int,
              "attacker_max_outstanding": int, "instruction_target": int},
    "workload": {"traces": list, "attacker_threads": list},
    "measurement": {"warmup_cycles": int},
    "energy": {f: float for f in ("act_pre_pj", "rd_pj", "wr_pj", "ref_pj",
                                  "vrr_victim_pj", "rfm_pj", "background_mw_per_rank")},
    "sim": {"max_cycles": int, "blast_radius": int, "victims_per_side": int,
            "check_oracle": bool, "collect_command_log": bool, "keep_retire_log": bool},
    "seeds": {"mitigation": int},
}

DEFAULTS = {
    "geometry": {"preset": "ddr5_32bank"},
    "timing": {"preset": "ddr5_4800"},
    "controller": {"read_queue_depth": 64, "write_queue_depth": 64, "cap": 4,
                   "write_drain_high": 48, "write_drain_low": 16,
                   "mop_blocks_per_chunk": 4},
    "mitigation": {"mechanism": "none", "nrh": 1024, "rfm_threshold": 80,
                   "prac_burst": 4, "blockhammer_filter_bits": 2048,
                   "blockhammer_hashes": 4, "blockhammer_exact": False},
    "throttler": {"enabled": False, "window_ms": 64.0, "threat_threshold": 32.0,
                  "outlier_ratio": 0.65, "old_suspect_penalty": 1,
                  "new_suspect_divisor": 10,
                  "action_weights": {"victim_refresh": 1.0, "rfm": 1.0, "backoff_burst": 1.0}},
    "llc": {"size_bytes": 8 << 20, "ways": 8, "hit_latency": 20, "total_mshrs": 64},
    "cores": {"issue_width": 4, "max_outstanding_misses": 4,
              "instruction_target": 1_000_000},
    "workload": {"traces": [], "attacker_threads": []},
    "measurement": {"warmup_cycles": 100_000},
    "energy": {},
    "sim": {"max_cycles": 2_000_000_000, "blast_radius": 1, "check_oracle": True,
            "collect_command_log": False, "keep_retire_log": False},
    "seeds": {"mitigation": 1},
}


def _check_unknown(data: dict, schema: dict, path: str) -> None:
    for key, value in data.items():
        where = f"{path}.{key}" if path else key
        if key not in schema:
            raise ConfigError(f"unknown config key: {where}")
        expected = schema[key]
        if isinstance(expected, dict):
            if not isinstance(value, dict):
                raise ConfigError(f"{where}: expected a mapping")
            _check_unknown(value, expected, where)
        elif expected is float:
            if value is not None and not isinstance(value, (int, float)):
                raise ConfigError(f"{where}: expected a number, got {value!r}")
        elif expected is int:
            if value is not None and (not isinstance(value, int) or isinstance(value, bool)):
                raise ConfigError(f"{where}: expected an integer, got {value!r}")
        elif expected is bool:
            if value is not None and not isinstance(value, bool):
                raise ConfigError(f"{where}: expected a boolean, got {value!r}")
        elif expected is str:
            if value is not None and not isinstance(value, str):
                raise ConfigError(f"{where}: expected a string, got {value!r}")
        elif expected is list:
            if value is not None and not isinstance(value, list):
                raise ConfigError(f"{where}: expected a list, got {value!r}")


def _merge(base: dict, override: dict) -> dict:
    out = dict(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = value
    return out


def load_kv_preset(name: str, suffix: str) -> dict:
    """Load a `key = value` preset by bundled name or filesystem path."""
    if os.path.exists(name):
        text = open(name).read()
    else:
        resource = importlib.resources.files("hammersim.presets").joinpath(f"{name}{suffix}")
        if not resource.is_file():
            raise ConfigError(f"no preset named {name!r} (looked for {name}{suffix})")
        text = resource.read_text()
    values: dict = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"{name}:{lineno}: expected 'key = value'")
        key, _, raw = body.partition("=")
        raw = raw.strip()
        try:
            values[key.strip()] = int(raw)
        except ValueError:
            try:
                values[key.strip()] = float(raw)
            except ValueError:
                raise ConfigError(f"{name}:{lineno}: non-numeric value {raw!r}") from None
    return values


@dataclass
class ExperimentConfig:
    raw: dict
    geometry: DeviceGeometry
    timing: TimingParams
    energy: EnergyModel
    window_cycles: int = 0
    path: str = "<dict>"

    def section(self, name: str) -> dict:
        return self.raw[name]

    def canonical(self) -> str:
        return yaml.safe_dump(self.raw, sort_keys=True, default_flow_style=False)

    def canonical_key(self) -> str:
        """Canonical form minus the workload block; keys solo-run caching."""
        trimmed = {k: v for k, v in self.raw.items() if k != "workload"}
        return yaml.safe_dump(trimmed, sort_keys=True)


def resolve(data: dict, path: str = "<dict>") -> ExperimentConfig:
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    _check_unknown(data, SCHEMA, "")
    merged = _merge(DEFAULTS, data)

    geom_section = dict(merged["geometry"])
    preset = geom_section.pop("preset", None)
    geom_values = load_kv_preset(preset, ".geom") if preset else {}
    geom_values.update({k: v for k, v in geom_section.items() if v is not None})
    bad = set(geom_values) - set(_GEOMETRY_KEYS)
    if bad:
        raise ConfigError(f"geometry preset {preset!r} has unknown keys: {sorted(bad)}")
    try:
        geometry = DeviceGeometry(**geom_values)
    except ValueError as exc:
        raise ConfigError(f"geometry: {exc}") from exc

    timing_section = dict(merged["timing"])
    preset = timing_section.pop("preset", None)
    timing_values = load_kv_preset(preset, ".timing") if preset else {}
    timing_values.update({k: v for k, v in timing_section.items() if v is not None})
    bad = set(timing_values) - set(_TIMING_KEYS)
    if bad:
        raise ConfigError(f"timing preset {preset!r} has unknown keys: {sorted(bad)}")
    try:
        timing = TimingParams(**timing_values)
        timing.validate_refresh(geometry)
    except ValueError as exc:
        raise ConfigError(f"timing: {exc}") from exc

    mech = merged["mitigation"]["mechanism"]
    if mech not in MECHANISMS:
        raise ConfigError(f"mitigation.mechanism: unknown mechanism {mech!r}")
    if merged["mitigation"]["nrh"] <= 0:
        raise ConfigError("mitigation.nrh: must be positive")

    thr = merged["throttler"]
    if thr.get("window_cycles"):
        window_cycles = thr["window_cycles"]
    else:
        window_cycles = int(round(thr["window_ms"] * 1e6 / timing.clock_period_ns))
    if window_cycles <= 0:
        raise ConfigError("throttler.window_ms/window_cycles: must be positive")

    traces = merged["workload"]["traces"]
    if not isinstance(traces, list) or not all(isinstance(t, str) for t in traces):
        raise ConfigError("workload.traces: must be a list of paths")
    for i in merged["workload"]["attacker_threads"]:
        if not isinstance(i, int) or i < 0 or (traces and i >= len(traces)):
            raise ConfigError(f"workload.attacker_threads: index {i!r} out of range")
    if merged["controller"]["write_drain_low"] >= merged["controller"]["write_drain_high"]:
        raise ConfigError("controller.write_drain_low must be below write_drain_high")

    try:
        energy = EnergyModel(**merged["energy"])
    except ValueError as exc:
        raise ConfigError(f"energy: {exc}") from exc

    return ExperimentConfig(raw=merged, geometry=geometry, timing=timing,
                            energy=energy, window_cycles=window_cycles, path=path)


def load_config(path: str) -> ExperimentConfig:
    with open(path) as fh:
        try:
            data = yaml.safe_load(fh) or {}
        except yaml.YAMLError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
    cfg = resolve(data, path)
    missing = [t for t in cfg.raw["workload"]["traces"]
               if not os.path.exists(_resolve_trace(path, t))]
    if missing:
        raise ConfigError(f"{path}: workload.traces not found: {missing}")
    return cfg


def _resolve_trace(config_path: str, trace: str) -> str:
    if os.path.isabs(trace) or config_path == "<dict>":
        return trace
    return os.path.join(os.path.dirname(os.path.abspath(config_path)), trace)


def trace_paths(cfg: ExperimentConfig) -> list[str]:
    return [_resolve_trace(cfg.path, t) for t in cfg.raw["workload"]["traces"]]
