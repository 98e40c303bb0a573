"""Pluggable read-disturbance mitigation mechanisms.

Each mechanism observes row activations and emits preventive actions (victim
refreshes, refresh-management commands, back-off bursts) that the controller
schedules with priority over data commands. BlockHammer is the odd one out:
it throttles by delaying activations instead of emitting actions, and serves
as a comparison baseline.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass

from .dram import DeviceGeometry, DramDevice, TimingParams

ACTION_VICTIM_REFRESH = "victim_refresh"
ACTION_RFM = "rfm"
ACTION_BACKOFF_BURST = "backoff_burst"

MECHANISMS = ("none", "para", "graphene", "rfm", "prac", "blockhammer")

SWEEP_NRH = (64, 128, 256, 512, 1024, 2048, 4096)


class MitigationConfigError(ValueError):
    pass


@dataclass(frozen=True)
class PreventiveAction:
    kind: str
    flat_bank: int
    aggressor_rows: tuple[int, ...]
    cost_cycles: int
    trigger_cycle: int

    def __post_init__(self):
        if self.cost_cycles <= 0:
            raise ValueError("preventive actions must have positive cost")


@dataclass
class MitigationConfig:
    mechanism: str = "none"
    nrh: int = 1024                      # disturbance threshold the mechanism must defeat
    para_probability: float | None = None
    graphene_threshold: int | None = None
    graphene_entries: int | None = None
    graphene_max_entries: int | None = None   # hardware budget; exceeding it is an error
    rfm_threshold: int = 80
    prac_threshold: int | None = None
    prac_burst: int = 4
    blockhammer_threshold: int | None = None
    blockhammer_filter_bits: int = 2048
    blockhammer_hashes: int = 4
    blockhammer_exact: bool = False
    seed: int = 1

    def __post_init__(self):
        if self.mechanism not in MECHANISMS:
            raise MitigationConfigError(f"unknown mechanism {self.mechanism!r}")
        if self.nrh <= 0:
            raise MitigationConfigError("nrh must be positive")


def para_secure_probability(nrh: int, failure_exponent: int = 40) -> float:
    """Smallest refresh probability with per-victim escape chance below 2^-exp.

    A victim must survive nrh/2 neighbor activations unrefreshed to be at
    risk, so (1-p)^(nrh/2) <= 2^-exp  =>  p >= 1 - 2^(-exp / (nrh/2)).
    """
    window = nrh // 2
    if window < 1:
        return 1.0
    return min(1.0, 1.0 - 2.0 ** (-failure_exponent / window))


def graphene_parameters(nrh: int, timing: TimingParams) -> tuple[int, int]:
    """(refresh threshold, table entries per bank) safe at `nrh`.

    A bank absorbs at most tREFW/tRC activations per refresh window; sizing
    the table to ceil(that / threshold) keeps the Misra-Gries undercount below
    the threshold, so no row reaches nrh unrefreshed.
    """
    threshold = nrh // 2
    if threshold < 1:
        raise MitigationConfigError(f"nrh {nrh} too small for a refresh threshold")
    max_acts = math.ceil(timing.tREFW / timing.tRC)
    entries = math.ceil(max_acts / threshold)
    return threshold, entries


def secure_config(mechanism: str, nrh: int, timing: TimingParams,
                  budget_entries: int | None = None) -> dict:
    """Derive mechanism parameters that keep peak disturbance below `nrh`."""
    if mechanism == "para":
        return {"para_probability": para_secure_probability(nrh)}
    if mechanism == "graphene":
        threshold, entries = graphene_parameters(nrh, timing)
        if budget_entries is not None and entries > budget_entries:
            raise MitigationConfigError(
                f"graphene needs {entries} table entries per bank at nrh={nrh}, "
                f"budget allows {budget_entries}"
            )
        return {"graphene_threshold": threshold, "graphene_entries": entries}
    if mechanism == "prac":
        return {"prac_threshold": nrh // 2}
    if mechanism == "blockhammer":
        return {"blockhammer_threshold": nrh // 2}
    if mechanism == "rfm":
        return {"rfm_threshold": 80}
    if mechanism == "none":
        return {}
    raise MitigationConfigError(f"unknown mechanism {mechanism!r}")


class MisraGriesTable:
    """Frequent-element counting with a bounded table and a spill counter.

    Guarantee: for any update stream, true_count(key) <= estimate(key) + spill,
    where estimate of an untracked key is the spill counter.
    """

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self.counters: dict[int, int] = {}
        self.spill = 0

    def update(self, key: int) -> int:
        """Count one occurrence; return the key's current estimate."""
        counters = self.counters
        if key in counters:
            counters[key] += 1
            return counters[key]
        if len(counters) < self.capacity:
            counters[key] = self.spill + 1
            return counters[key]
        # replace a counter that has decayed to the spill floor, if any
        for victim, count in counters.items():
            if count == self.spill:
                del counters[victim]
                counters[key] = self.spill + 1
                return counters[key]
        self.spill += 1
        return self.spill

    def estimate(self, key: int) -> int:
        return self.counters.get(key, self.spill)

    def remove(self, key: int) -> None:
        self.counters.pop(key, None)

    def clear(self) -> None:
        self.counters.clear()
        self.spill = 0


class CountingBloomFilter:
    """4-hash counting Bloom filter with deterministic seeded hashing."""

    _PRIME = 2_147_483_647

    def __init__(self, bits: int, hashes: int, seed: int, exact: bool = False):
        self.bits = bits
        self.exact = exact
        self.counts = [0] * bits if not exact else {}
        rng = random.Random(seed)
        self.params = [(rng.randrange(1, self._PRIME), rng.randrange(self._PRIME))
                       for _ in range(hashes)]

    def _slots(self, key: int):
        p = self._PRIME
        bits = self.bits
        return [((a * key + b) % p) % bits for a, b in self.params]

    def insert(self, key: int) -> int:
        if self.exact:
            c = self.counts.get(key, 0) + 1
            self.counts[key] = c
            return c
        slots = self._slots(key)
        for s in slots:
            self.counts[s] += 1
        return min(self.counts[s] for s in slots)

    def estimate(self, key: int) -> int:
        if self.exact:
            return self.counts.get(key, 0)
        return min(self.counts[s] for s in self._slots(key))

    def clear(self) -> None:
        if self.exact:
            self.counts.clear()
        else:
            for i in range(self.bits):
                self.counts[i] = 0


class Mitigation:
    """Base: observes demand activations, may emit preventive actions."""

    name = "none"
    emits_actions = False

    def __init__(self, config: MitigationConfig, geometry: DeviceGeometry,
                 timing: TimingParams, device: DramDevice):
        self.config = config
        self.geometry = geometry
        self.timing = timing
        self.device = device
        self.derived: dict = {}

    def on_activation(self, thread: int, flat_bank: int, row: int, now: int) -> list[PreventiveAction]:
        return []

    def act_allowed_at(self, flat_bank: int, row: int, now: int) -> int:
        """Earliest cycle an ACT to (bank, row) is permitted. Default: now."""
        return now

    def _victim_refresh(self, flat_bank: int, row: int, now: int) -> PreventiveAction:
        n_victims = len(self.device.victim_rows_of(row))
        return PreventiveAction(
            kind=ACTION_VICTIM_REFRESH,
            flat_bank=flat_bank,
            aggressor_rows=(row,),
            cost_cycles=max(1, n_victims) * self.timing.tRC,
            trigger_cycle=now,
        )


class NoMitigation(Mitigation):
    name = "none"


class Para(Mitigation):
    """Stateless probabilistic neighbor refresh on each activation."""

    name = "para"
    emits_actions = True

    def __init__(self, config, geometry, timing, device):
        super().__init__(config, geometry, timing, device)
        p = config.para_probability
        if p is None:
            p = para_secure_probability(config.nrh)
        if not 0.0 <= p <= 1.0:
            raise MitigationConfigError("para probability must be in [0, 1]")
        self.probability = p
        self.rng = random.Random(config.seed)
        self.derived = {"para_probability": p}

    def on_activation(self, thread, flat_bank, row, now):
        if self.rng.random() < self.probability:
            return [self._victim_refresh(flat_bank, row, now)]
        return []


class Graphene(Mitigation):
    """Per-bank Misra-Gries tracking; refresh neighbors at the count threshold.

    Tables reset every tREFW, matching the device refresh window.
    """

    name = "graphene"
    emits_actions = True

    def __init__(self, config, geometry, timing, device):
        super().__init__(config, geometry, timing, device)
        threshold, entries = graphene_parameters(config.nrh, timing)
        if config.graphene_threshold is not None:
            threshold = config.graphene_threshold
        if config.graphene_entries is not None:
            entries = config.graphene_entries
        if config.graphene_max_entries is not None and entries > config.graphene_max_entries:
            raise MitigationConfigError(
                f"graphene table needs {entries} entries, budget {config.graphene_max_entries}"
            )
        self.threshold = threshold
        self.tables = [MisraGriesTable(entries) for _ in range(geometry.banks_per_channel)]
        self.next_reset = timing.tREFW
        self.derived = {"graphene_threshold": threshold, "graphene_entries": entries}

    def on_activation(self, thread, flat_bank, row, now):
        if now >= self.next_reset:
            for table in self.tables:
                table.clear()
            self.next_reset += self.timing.tREFW * ((now - self.next_reset) // self.timing.tREFW + 1)
        table = self.tables[flat_bank]
        if table.update(row) >= self.threshold:
            table.remove(row)
            return [self._victim_refresh(flat_bank, row, now)]
        return []


class Rfm(Mitigation):
    """Issue a refresh-management command every N activations per bank."""

    name = "rfm"
    emits_actions = True

    def __init__(self, config, geometry, timing, device):
        super().__init__(config, geometry, timing, device)
        self.threshold = config.rfm_threshold
        self.counters = [0] * geometry.banks_per_channel
        self.derived = {"rfm_threshold": self.threshold}

    def on_activation(self, thread, flat_bank, row, now):
        self.counters[flat_bank] += 1
        if self.counters[flat_bank] >= self.threshold:
            self.counters[flat_bank] = 0
            return [PreventiveAction(ACTION_RFM, flat_bank, (), self.timing.tRFM, now)]
        return []


class Prac(Mitigation):
    """Device-side per-row counters raise a back-off burst of RFM commands.

    The burst is one preventive action costing burst * tRFM; each of its RFM
    commands services the currently hottest row of the bank.
    """

    name = "prac"
    emits_actions = True

    def __init__(self, config, geometry, timing, device):
        super().__init__(config, geometry, timing, device)
        if device.row_counters is None:
            raise MitigationConfigError("prac requires device row counters")
        self.threshold = config.prac_threshold if config.prac_threshold is not None else config.nrh // 2
        self.burst = config.prac_burst
        self.derived = {"prac_threshold": self.threshold, "prac_burst": self.burst}

    def on_activation(self, thread, flat_bank, row, now):
        count = self.device.row_counters.counts[flat_bank].get(row, 0)
        if count >= self.threshold:
            return [PreventiveAction(ACTION_BACKOFF_BURST, flat_bank, (row,),
                                     self.burst * self.timing.tRFM, now)]
        return []


class BlockHammer(Mitigation):
    """Blacklist-and-delay baseline: no preventive actions, just ACT gating.

    Two epoch-interleaved counting Bloom filters per bank, each alive for a
    full tREFW (staggered by tREFW/2). A row whose estimate in a live filter
    comes within one of the blacklist threshold cannot activate again until
    that filter expires, so no row reaches nrh activations in any tREFW span.
    """

    name = "blockhammer"
    emits_actions = False

    def __init__(self, config, geometry, timing, device):
        super().__init__(config, geometry, timing, device)
        self.threshold = (config.blockhammer_threshold
                          if config.blockhammer_threshold is not None else config.nrh // 2)
        if self.threshold < 2:
            raise MitigationConfigError("blockhammer threshold must be >= 2")
        self.epoch = max(1, timing.tREFW // 2)
        n = geometry.banks_per_channel
        mk = lambda i: CountingBloomFilter(config.blockhammer_filter_bits,
                                           config.blockhammer_hashes,
                                           seed=config.seed * 1000003 + i,
                                           exact=config.blockhammer_exact)
        self.filters = [(mk(2 * b), mk(2 * b + 1)) for b in range(n)]
        # filter k of a pair is alive on [start, start + 2*epoch)
        self.starts = [[0, self.epoch] for _ in range(n)]
        self.derived = {"blockhammer_threshold": self.threshold,
                        "blockhammer_epoch": self.epoch}

    def _rotate(self, flat_bank: int, now: int) -> None:
        starts = self.starts[flat_bank]
        pair = self.filters[flat_bank]
        for i in (0, 1):
            while now >= starts[i] + 2 * self.epoch:
                pair[i].clear()
                starts[i] += 2 * self.epoch

    def on_activation(self, thread, flat_bank, row, now):
        self._rotate(flat_bank, now)
        starts = self.starts[flat_bank]
        for i, f in enumerate(self.filters[flat_bank]):
            if now >= starts[i]:
                f.insert(row)
        return []

    def act_allowed_at(self, flat_bank, row, now):
        self._rotate(flat_bank, now)
        starts = self.starts[flat_bank]
        allowed = now
        for i, f in enumerate(self.filters[flat_bank]):
            if now >= starts[i] and f.estimate(row) >= self.threshold - 1:
                allowed = max(allowed, starts[i] + 2 * self.epoch)
        return allowed


_CLASSES = {
    "none": NoMitigation,
    "para": Para,
    "graphene": Graphene,
    "rfm": Rfm,
    "prac": Prac,
    "blockhammer": BlockHammer,
}


def needs_row_counters(mechanism: str) -> bool:
    """RFM and PRAC assume the device counts activations per row."""
    return mechanism in ("rfm", "prac")


def build_mitigation(config: MitigationConfig, geometry: DeviceGeometry,
                     timing: TimingParams, device: DramDevice) -> Mitigation:
    cls = _CLASSES[config.mechanism]
    return cls(config, geometry, timing, device)
