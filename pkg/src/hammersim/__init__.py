"""Cycle-level DRAM memory-subsystem simulator with read-disturbance
mitigations and preventive-action-aware thread throttling."""

from .dram import (
    AddressRangeError,
    DeviceGeometry,
    DramAddress,
    DramCommand,
    DramDevice,
    SafetyOracle,
    TimingParams,
)
from .mapping import AddressMapping, mop_mapping, parse_mapping
from .mitigations import (
    MisraGriesTable,
    MitigationConfig,
    PreventiveAction,
    build_mitigation,
    secure_config,
)
from .throttle import ThreadThrottler, ThrottlerConfig
from .metrics import EnergyModel, StatsReport, latency_percentiles, max_slowdown, weighted_speedup
from .security import BoundQuery, max_attack_ratio
from .config import ExperimentConfig, load_config, resolve
from .engine import Engine, RunResult
from .harness import run_experiment, sweep

__version__ = "0.1.0"
