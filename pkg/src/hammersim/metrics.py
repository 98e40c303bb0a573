"""Evaluation metrics and a constant-based DRAM energy model.

Percentiles use the nearest-rank definition (no interpolation). Weighted
speedup and maximum slowdown are computed over benign threads only; the
energy model charges a fixed cost per command plus rank background power.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, asdict


def weighted_speedup(ipc_shared: list[float], ipc_alone: list[float]) -> float:
    """Sum of per-thread shared/alone IPC ratios."""
    if len(ipc_shared) != len(ipc_alone):
        raise ValueError("ipc vectors must have equal length")
    for alone in ipc_alone:
        if alone <= 0:
            raise ValueError("ipc_alone entries must be positive")
    return sum(s / a for s, a in zip(ipc_shared, ipc_alone))


def max_slowdown(ipc_shared: list[float], ipc_alone: list[float]) -> float:
    """Worst per-thread alone/shared IPC ratio; inf marks a starved thread."""
    if len(ipc_shared) != len(ipc_alone):
        raise ValueError("ipc vectors must have equal length")
    worst = 0.0
    for s, a in zip(ipc_shared, ipc_alone):
        if a <= 0:
            raise ValueError("ipc_alone entries must be positive")
        worst = max(worst, math.inf if s == 0 else a / s)
    return worst


def latency_percentiles(latencies: list, points: list[float]) -> list:
    """Nearest-rank percentiles of `latencies` at each requested point."""
    if not latencies:
        raise ValueError("cannot take percentiles of an empty list")
    ordered = sorted(latencies)
    n = len(ordered)
    out = []
    for p in points:
        if not 0 < p <= 100:
            raise ValueError(f"percentile must be in (0, 100], got {p}")
        rank = math.ceil(p / 100 * n)
        out.append(ordered[rank - 1])
    return out


@dataclass
class EnergyModel:
    """Per-command energies in picojoules; background power in milliwatts/rank."""
    act_pre_pj: float = 150.0
    rd_pj: float = 120.0
    wr_pj: float = 120.0
    ref_pj: float = 28000.0
    vrr_victim_pj: float = 150.0
    rfm_pj: float = 600.0
    background_mw_per_rank: float = 50.0

    def __post_init__(self):
        for name, value in asdict(self).items():
            if value < 0:
                raise ValueError(f"energy.{name} must be >= 0")

    def command_energy_pj(self, counts: dict) -> float:
        """Total command energy for a {kind: count} map ('vrr_victims' counts rows)."""
        return (counts.get("ACT", 0) * self.act_pre_pj
                + counts.get("RD", 0) * self.rd_pj
                + counts.get("WR", 0) * self.wr_pj
                + counts.get("REF", 0) * self.ref_pj
                + counts.get("vrr_victims", 0) * self.vrr_victim_pj
                + counts.get("RFM", 0) * self.rfm_pj)

    def total_energy_joules(self, counts: dict, duration_cycles: int,
                            clock_period_ns: float, num_ranks: int) -> float:
        background_j = (self.background_mw_per_rank * 1e-3
                        * duration_cycles * clock_period_ns * 1e-9 * num_ranks)
        return self.command_energy_pj(counts) * 1e-12 + background_j


@dataclass
class StatsReport:
    config: dict
    seeds: dict
    cycles: int
    warmup_cycles: int
    ipc_shared: list[float]
    ipc_alone: list[float]
    benign_threads: list[int]
    weighted_speedup: float
    max_slowdown: float
    action_counts: dict
    command_counts: dict
    suspects_marked: list[bool]
    total_marks: int
    latency_percentiles_ns: dict
    energy_total_j: float
    energy_benign_j: float
    oracle_peak_damage: int
    rbmpki: list[float]
    telemetry: list = field(default_factory=list)
    checks: dict = field(default_factory=dict)
    derived_params: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, indent=2) + "\n"

    def to_text(self) -> str:
        """Flat key=value rendering, deterministic ordering."""
        flat = {}

        def walk(prefix, value):
            if isinstance(value, dict):
                for k in sorted(value, key=str):
                    walk(f"{prefix}.{k}" if prefix else str(k), value[k])
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    walk(f"{prefix}[{i}]", item)
            else:
                flat[prefix] = value

        walk("", asdict(self))
        lines = [f"{k} = {v}" for k, v in sorted(flat.items())]
        return "\n".join(lines) + "\n"
