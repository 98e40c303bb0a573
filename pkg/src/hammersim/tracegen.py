"""Deterministic synthetic trace generation.

Benign traces target a row-buffer-miss rate (RBMPKI); a short calibration
loop runs the generated trace through a solo simulation and adjusts bubble
counts until the measured rate lands within tolerance. Attacker traces
alternate aggressor rows so every access conflicts in the row buffer and
forces an activation.

Intensity classes follow RBMPKI floors: H >= 20, M >= 10, L >= 0.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from .config import resolve
from .cores import Trace, TraceEntry
from .engine import Engine
from .mapping import mop_mapping

CLASS_TARGETS = {"H": 25.0, "M": 12.0, "L": 2.0}


class TraceGenError(ValueError):
    pass


@dataclass
class BenignProfile:
    target_rbmpki: float = 12.0
    working_set_bytes: int = 64 << 20
    row_locality: float = 0.5         # probability the next access stays in the current row
    write_fraction: float = 0.0
    seed: int = 1

    def __post_init__(self):
        if self.target_rbmpki < 0:
            raise TraceGenError("target_rbmpki must be >= 0")
        if not 0.0 <= self.row_locality < 1.0:
            raise TraceGenError("row_locality must be in [0, 1)")
        if not 0.0 <= self.write_fraction <= 1.0:
            raise TraceGenError("write_fraction must be in [0, 1]")

    @property
    def intensity_class(self) -> str:
        if self.target_rbmpki >= 20:
            return "H"
        if self.target_rbmpki >= 10:
            return "M"
        return "L"


@dataclass
class AttackerProfile:
    num_aggressor_rows: int = 2
    same_bank: bool = True
    bubbles_between_acts: int = 0
    seed: int = 1
    # extra per-row activations given to the highest-indexed bank, spread
    # linearly across banks, so per-bank trigger phases interleave instead of
    # bursting together (0 disables the stagger prefix)
    stagger_span: int = 0

    def __post_init__(self):
        if self.num_aggressor_rows < 1:
            raise TraceGenError("need at least one aggressor row")
        if self.bubbles_between_acts < 0:
            raise TraceGenError("bubbles must be >= 0")
        if self.stagger_span < 0:
            raise TraceGenError("stagger_span must be >= 0")


def _benign_entries(profile: BenignProfile, length: int, bubbles: int,
                    geometry, mapping) -> list[TraceEntry]:
    """Emit entries totalling ~`length` instructions at `bubbles` per access."""
    rng = random.Random(profile.seed)
    rows = geometry.rows_per_bank
    row_bytes = geometry.columns_per_row * geometry.bytes_per_column
    ws_rows = max(2, profile.working_set_bytes // row_bytes)
    banks = geometry.banks_per_channel
    entries = []
    instructions = 0
    from .dram import DramAddress

    def encode(bank_flat, row, col):
        rank, bg, bank = geometry.unflatten_bank(bank_flat)
        return mapping.encode(DramAddress(0, rank, bg, bank, row % rows, col))

    bank_flat = rng.randrange(banks)
    row = rng.randrange(min(ws_rows, rows))
    col = 0
    while instructions < length:
        if rng.random() < profile.row_locality:
            col = (col + 1) % geometry.columns_per_row
        else:
            bank_flat = rng.randrange(banks)
            row = rng.randrange(min(ws_rows, rows))
            col = rng.randrange(geometry.columns_per_row)
        is_write = rng.random() < profile.write_fraction
        entries.append(TraceEntry(bubbles, encode(bank_flat, row, col), is_write))
        instructions += bubbles + 1
    return entries


def _solo_rbmpki(entries: list[TraceEntry], base_cfg: dict, instructions: int) -> float:
    cfg = resolve(base_cfg)
    trace = Trace([e.bubble_count for e in entries],
                  [e.address for e in entries],
                  [e.is_write for e in entries])
    engine = Engine(cfg, traces=[trace])
    engine.target = min(instructions, engine.target)
    result = engine.run()
    return result.rbmpki[0]


def gen_benign(profile: BenignProfile, length: int, sim_config: dict | None = None,
               tolerance: float = 0.15, max_iterations: int = 6) -> list[TraceEntry]:
    """Generate a benign trace whose measured RBMPKI is within tolerance of target.

    `sim_config` is a config dict used for the calibration simulation (the
    desk preset by default). Raises when the target is physically unreachable.
    """
    if length <= 0:
        raise TraceGenError("length must be positive")
    base_cfg = dict(sim_config or {})
    base_cfg.setdefault("geometry", {"preset": "desk_8bank"})
    base_cfg.setdefault("timing", {"preset": "desk"})
    base_cfg.setdefault("measurement", {"warmup_cycles": 0})
    base_cfg.setdefault("cores", {})
    base_cfg["cores"].setdefault("instruction_target", min(length, 200_000))
    base_cfg.setdefault("workload", {"traces": [], "attacker_threads": []})

    cfg = resolve(base_cfg)
    geometry = cfg.geometry
    mapping = mop_mapping(geometry, cfg.raw["controller"]["mop_blocks_per_chunk"])

    target = profile.target_rbmpki
    if target == 0:
        return _benign_entries(profile, length, 1000, geometry, mapping)
    # closed-form first guess: misses-per-access ~= 1 - row_locality
    miss_rate = max(1e-3, 1.0 - profile.row_locality)
    bubbles = max(0, round(1000.0 * miss_rate / target) - 1)
    physical_max = 1000.0 * miss_rate  # one access per instruction, zero bubbles
    if target > physical_max:
        raise TraceGenError(
            f"target rbmpki {target} unreachable: max ~{physical_max:.1f} at this locality")

    calibration_len = min(length, 200_000)
    entries = _benign_entries(profile, calibration_len, bubbles, geometry, mapping)
    for _ in range(max_iterations):
        measured = _solo_rbmpki(entries, base_cfg, calibration_len)
        if measured > 0 and abs(measured - target) / target <= tolerance * 0.6:
            break
        if measured <= 0:
            bubbles = max(0, bubbles // 2)
        else:
            bubbles = max(0, round((bubbles + 1) * measured / target) - 1)
        entries = _benign_entries(profile, calibration_len, bubbles, geometry, mapping)
    return _benign_entries(profile, length, bubbles, geometry, mapping)


def _set_alias_stride(geometry, mapping, llc_sets: int) -> int:
    """Smallest row stride whose addresses share an LLC set (same bank/column)."""
    from .dram import DramAddress

    base = mapping.encode(DramAddress(0, 0, 0, 0, 0, 0))
    stride = 1
    while stride < geometry.rows_per_bank:
        other = mapping.encode(DramAddress(0, 0, 0, 0, stride, 0))
        if ((base ^ other) >> 6) & (llc_sets - 1) == 0:
            return stride
        stride *= 2
    raise TraceGenError("no LLC set-alias stride exists for this geometry")


def gen_attacker(profile: AttackerProfile, length: int, sim_config: dict | None = None) -> list[TraceEntry]:
    """Alternate reads over aggressor rows so every access forces an activation.

    With `same_bank`, rows sit two apart in one bank (classic double-sided
    pairs); otherwise pairs spread round-robin over all banks. Because the
    cores sit behind a large LLC, the generator replicates each aggressor
    pair at the cache's set-alias stride until a set holds more lines than
    its associativity: the trace-representable equivalent of the line
    flushing a real hammering attacker performs. A single-row profile skips
    the replication and degenerates to a (cached) row-hit stream.
    """
    base_cfg = dict(sim_config or {})
    base_cfg.setdefault("geometry", {"preset": "desk_8bank"})
    base_cfg.setdefault("timing", {"preset": "desk"})
    base_cfg.setdefault("workload", {"traces": [], "attacker_threads": []})
    cfg = resolve(base_cfg)
    geometry = cfg.geometry
    mapping = mop_mapping(geometry, cfg.raw["controller"]["mop_blocks_per_chunk"])
    rng = random.Random(profile.seed)
    from .dram import DramAddress

    rows = geometry.rows_per_bank
    banks = geometry.banks_per_channel
    llc_ways = cfg.raw["llc"]["ways"]
    llc_sets = cfg.raw["llc"]["size_bytes"] // (64 * llc_ways)
    base_row = rng.randrange(rows // 8, rows // 4) & ~3

    requested = []
    for i in range(profile.num_aggressor_rows):
        if profile.same_bank:
            bank_flat = 0
            row = (base_row + 2 * i) % rows      # pairs share a victim row
        else:
            pair, side = divmod(i, 2)            # double-sided pairs, one bank per pair
            bank_flat = pair % banks
            row = (base_row + 4 * (pair // banks) + 2 * side) % rows
        requested.append((bank_flat, row))
    if len(set(requested)) != len(requested):
        raise TraceGenError("aggressor rows must be distinct")

    if profile.num_aggressor_rows == 1:
        targets = requested
    else:
        stride = _set_alias_stride(geometry, mapping, llc_sets)
        replicas = llc_ways + 1       # > associativity: every sweep self-evicts
        targets = []
        for k in range(replicas):
            for bank_flat, row in requested:
                targets.append((bank_flat, (row + k * stride) % rows))
        if len(set(targets)) != len(targets):
            raise TraceGenError("alias replication collided; pick another seed")

    # visit banks round-robin, advancing each bank's own row cursor so that
    # consecutive accesses to a bank always change rows
    by_bank: dict[int, list[int]] = {}
    for bank_flat, row in targets:
        by_bank.setdefault(bank_flat, []).append(row)
    bank_list = sorted(by_bank)
    cursors = {b: 0 for b in bank_list}
    entries = []
    instructions = 0
    bubbles = profile.bubbles_between_acts

    def emit(bank_flat):
        nonlocal instructions
        rows_of_bank = by_bank[bank_flat]
        row = rows_of_bank[cursors[bank_flat] % len(rows_of_bank)]
        cursors[bank_flat] += 1
        rank, bg, bank = geometry.unflatten_bank(bank_flat)
        address = mapping.encode(DramAddress(0, rank, bg, bank, row, 0))
        entries.append(TraceEntry(bubbles, address, False))
        instructions += bubbles + 1

    if profile.stagger_span and len(bank_list) > 1:
        # phase prefix: bank k gets k * span/(n-1) extra activations per row,
        # emitted as interleaved full-bank sweeps to keep the eviction property
        n = len(bank_list)
        sweeps = {b: (k * profile.stagger_span) // (n - 1)
                  for k, b in enumerate(bank_list)}
        rounds = max(sweeps.values())
        for r in range(rounds):
            active = [b for b in bank_list if sweeps[b] > r]
            if not active:
                break
            for _ in range(max(len(by_bank[b]) for b in active)):
                for b in active:
                    emit(b)

    i = 0
    while instructions < length:
        emit(bank_list[i % len(bank_list)])
        i += 1
    return entries


def write_mix_manifest(path: str, runs: list[list[str]]) -> None:
    """One line per run: comma-separated trace paths."""
    with open(path, "w") as fh:
        for run in runs:
            fh.write(",".join(run) + "\n")


def read_mix_manifest(path: str) -> list[list[str]]:
    runs = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            runs.append(line.split(","))
    return runs
