"""DRAM device model: geometry, command timing legality, refresh, and a
ground-truth read-disturbance oracle.

The device is a deterministic state machine advanced by explicit commands
(ACT/PRE/PREab/RD/WR/REF/VRR/RFM). Timing legality is tracked incrementally
per bank/rank/channel; `tests/protocol_check` replays command logs against the
same rules from first principles, so the two implementations must agree.

Units: all timings are integer cycles of the controller clock;
`clock_period_ns` converts to wall time for reports only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields

CMD_ACT = "ACT"
CMD_PRE = "PRE"
CMD_PREAB = "PREab"
CMD_RD = "RD"
CMD_WR = "WR"
CMD_REF = "REF"
CMD_VRR = "VRR"
CMD_RFM = "RFM"

COMMAND_KINDS = (CMD_ACT, CMD_PRE, CMD_PREAB, CMD_RD, CMD_WR, CMD_REF, CMD_VRR, CMD_RFM)


class AddressRangeError(ValueError):
    """Command addresses a channel/rank/bank/row outside the device geometry."""


class ProtocolViolation(AssertionError):
    """An illegal command was issued. This is a simulator bug, not an input error."""


@dataclass(frozen=True)
class DramAddress:
    channel: int
    rank: int
    bankgroup: int
    bank: int
    row: int
    column: int = 0


@dataclass
class DeviceGeometry:
    channels: int = 1
    ranks_per_channel: int = 2
    bankgroups_per_rank: int = 8
    banks_per_bankgroup: int = 2
    rows_per_bank: int = 65536
    columns_per_row: int = 128
    bytes_per_column: int = 64

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if not isinstance(v, int) or v < 1:
                raise ValueError(f"geometry.{f.name} must be a positive integer, got {v!r}")
        if self.rows_per_bank & (self.rows_per_bank - 1):
            raise ValueError("geometry.rows_per_bank must be a power of two")

    @property
    def banks_per_rank(self) -> int:
        return self.bankgroups_per_rank * self.banks_per_bankgroup

    @property
    def banks_per_channel(self) -> int:
        return self.ranks_per_channel * self.banks_per_rank

    def flat_bank(self, rank: int, bankgroup: int, bank: int) -> int:
        """Flatten (rank, bankgroup, bank) into a per-channel bank index."""
        return (rank * self.bankgroups_per_rank + bankgroup) * self.banks_per_bankgroup + bank

    def unflatten_bank(self, flat: int) -> tuple[int, int, int]:
        bank = flat % self.banks_per_bankgroup
        bg = (flat // self.banks_per_bankgroup) % self.bankgroups_per_rank
        rank = flat // self.banks_per_rank
        return rank, bg, bank


@dataclass
class TimingParams:
    clock_period_ns: float = 0.4166  # 2400 MHz command clock
    tRCD: int = 40
    tRAS: int = 77
    tRP: int = 40
    tRC: int = 117
    tCCD_S: int = 8
    tCCD_L: int = 16
    tRRD_S: int = 12
    tRRD_L: int = 16
    tFAW: int = 48
    tWR: int = 72
    tRTP: int = 18
    tRFC: int = 984
    tREFI: int = 9360
    tREFW: int = 76_800_000
    tRFM: int = 468
    tCL: int = 40
    tBL: int = 8

    def __post_init__(self):
        for f in fields(self):
            if f.name == "clock_period_ns":
                continue
            v = getattr(self, f.name)
            if not isinstance(v, int) or v < 1:
                raise ValueError(f"timing.{f.name} must be a positive integer, got {v!r}")
        if self.tRC < self.tRAS + self.tRP:
            raise ValueError("timing requires tRC >= tRAS + tRP")
        if self.tFAW < 4 * self.tRRD_S:
            raise ValueError("timing requires tFAW >= 4 * tRRD_S")
        if self.clock_period_ns <= 0:
            raise ValueError("timing.clock_period_ns must be positive")

    def ref_group_rows(self, geometry: DeviceGeometry) -> int:
        """Rows refreshed per REF so the sweep finishes within tREFW."""
        slots = self.tREFW // self.tREFI
        if slots < 1:
            raise ValueError("timing requires tREFW >= tREFI")
        return max(1, math.ceil(geometry.rows_per_bank / slots))

    def validate_refresh(self, geometry: DeviceGeometry) -> None:
        group = self.ref_group_rows(geometry)
        needed = math.ceil(geometry.rows_per_bank / group)
        if self.tREFW // self.tREFI < needed:
            raise ValueError(
                "timing cannot cover all rows: "
                f"{self.tREFW // self.tREFI} REF slots per tREFW < {needed} needed"
            )


@dataclass(frozen=True)
class DramCommand:
    kind: str
    address: DramAddress
    issue_cycle: int
    # VRR: rows refreshed; RFM: rows serviced (filled in at issue time)
    victim_rows: tuple = ()


class SafetyOracle:
    """Ground-truth disturbance bookkeeping, independent of any mitigation.

    damage[bank, row] counts activations of rows within `blast_radius` of
    `row` since `row` was last refreshed. The oracle only observes; it never
    blocks commands.
    """

    def __init__(self, geometry: DeviceGeometry, blast_radius: int = 1):
        self.geometry = geometry
        self.blast_radius = blast_radius
        self.damage: dict[tuple[int, int], int] = {}
        self.peak_count = 0
        self.peak_loc: tuple[int, int] = (0, 0)

    def on_activation(self, flat_bank: int, row: int) -> None:
        rows = self.geometry.rows_per_bank
        damage = self.damage
        for k in range(1, self.blast_radius + 1):
            for victim in (row - k, row + k):
                if 0 <= victim < rows:
                    key = (flat_bank, victim)
                    count = damage.get(key, 0) + 1
                    damage[key] = count
                    if count > self.peak_count:
                        self.peak_count = count
                        self.peak_loc = key

    def refresh_row(self, flat_bank: int, row: int) -> None:
        self.damage.pop((flat_bank, row), None)

    def refresh_span(self, flat_bank: int, row_start: int, row_end: int) -> None:
        """Reset damage for rows in [row_start, row_end)."""
        if row_end - row_start < len(self.damage) // 4:
            for row in range(row_start, row_end):
                self.damage.pop((flat_bank, row), None)
        else:
            for key in [k for k in self.damage if k[0] == flat_bank and row_start <= k[1] < row_end]:
                del self.damage[key]

    def max_damage(self) -> tuple[tuple[int, int], int]:
        """Current worst (bank, row) and its damage count. Pure query."""
        if not self.damage:
            return (0, 0), 0
        key = max(self.damage, key=lambda k: (self.damage[k], -k[0], -k[1]))
        return key, self.damage[key]

    def peak_damage(self) -> tuple[tuple[int, int], int]:
        """Worst damage ever observed (refreshes do not erase the high-water mark)."""
        return self.peak_loc, self.peak_count


class RowActivationCounters:
    """Device-side per-row activation counters (RFM / per-row-counting modes)."""

    def __init__(self, num_banks: int):
        self.counts: list[dict[int, int]] = [dict() for _ in range(num_banks)]

    def increment(self, flat_bank: int, row: int) -> int:
        d = self.counts[flat_bank]
        c = d.get(row, 0) + 1
        d[row] = c
        return c

    def top_row(self, flat_bank: int) -> int | None:
        d = self.counts[flat_bank]
        if not d:
            return None
        # deterministic: highest count, then lowest row index
        return min(d, key=lambda r: (-d[r], r))

    def reset_row(self, flat_bank: int, row: int) -> None:
        self.counts[flat_bank].pop(row, None)


class _Bank:
    __slots__ = ("open_row", "next_act", "next_rd", "next_wr", "next_pre", "blocked_until")

    def __init__(self):
        self.open_row = -1
        self.next_act = 0
        self.next_rd = 0
        self.next_wr = 0
        self.next_pre = 0
        self.blocked_until = 0


class _Rank:
    __slots__ = ("act_times", "last_act_cycle", "last_act_by_bg", "ref_group", "last_ref_start")

    def __init__(self, n_bankgroups: int):
        self.act_times: list[int] = []          # last 4 ACT cycles, oldest first
        self.last_act_cycle = -(1 << 60)
        self.last_act_by_bg = [-(1 << 60)] * n_bankgroups
        self.ref_group = 0
        self.last_ref_start: list[int] = []     # per REF group, filled by device


class DramDevice:
    """One channel's worth of DRAM plus its command-timing state machine."""

    def __init__(
        self,
        geometry: DeviceGeometry,
        timing: TimingParams,
        blast_radius: int = 1,
        track_row_counters: bool = False,
        victims_per_side: int | None = None,
    ):
        timing.validate_refresh(geometry)
        self.geometry = geometry
        self.timing = timing
        self.banks = [_Bank() for _ in range(geometry.banks_per_channel)]
        self.ranks = [_Rank(geometry.bankgroups_per_rank) for _ in range(geometry.ranks_per_channel)]
        self.oracle = SafetyOracle(geometry, blast_radius)
        self.row_counters = RowActivationCounters(geometry.banks_per_channel) if track_row_counters else None
        self.ref_group_rows = timing.ref_group_rows(geometry)
        self.n_ref_groups = math.ceil(geometry.rows_per_bank / self.ref_group_rows)
        for rank in self.ranks:
            rank.last_ref_start = [0] * self.n_ref_groups
        # victims refreshed per preventive refresh: both sides by default
        self.victims_per_side = blast_radius if victims_per_side is None else victims_per_side
        # channel-wide data bus: last RD/WR issue cycle and its bankgroup
        self.last_data_cycle = -(1 << 60)
        self.last_data_bg = -1
        self.max_ref_gap = 0

    # -- legality ----------------------------------------------------------

    def _check_address(self, flat_bank: int, row: int) -> None:
        if not 0 <= flat_bank < len(self.banks):
            raise AddressRangeError(f"bank index {flat_bank} outside geometry")
        if not 0 <= row < self.geometry.rows_per_bank:
            raise AddressRangeError(f"row {row} outside geometry")

    def earliest_act(self, flat_bank: int, now: int) -> int:
        """Earliest cycle an ACT to this (closed) bank satisfies all constraints."""
        bank = self.banks[flat_bank]
        t = self.timing
        rank = self.ranks[flat_bank // self.geometry.banks_per_rank]
        bg = (flat_bank // self.geometry.banks_per_bankgroup) % self.geometry.bankgroups_per_rank
        earliest = max(
            now,
            bank.next_act,
            bank.blocked_until,
            rank.last_act_cycle + t.tRRD_S,
            rank.last_act_by_bg[bg] + t.tRRD_L,
        )
        if len(rank.act_times) >= 4:
            earliest = max(earliest, rank.act_times[-4] + t.tFAW)
        return earliest

    def earliest_bank_ready(self, flat_bank: int, now: int) -> int:
        """Earliest cycle the bank itself can accept VRR/RFM (no rank ACT gates)."""
        bank = self.banks[flat_bank]
        return max(now, bank.next_act, bank.blocked_until)

    def earliest_data(self, flat_bank: int, is_write: bool, now: int) -> int:
        bank = self.banks[flat_bank]
        t = self.timing
        bg = (flat_bank // self.geometry.banks_per_bankgroup) % self.geometry.bankgroups_per_rank
        ccd = t.tCCD_L if bg == self.last_data_bg else t.tCCD_S
        return max(
            now,
            bank.next_wr if is_write else bank.next_rd,
            bank.blocked_until,
            self.last_data_cycle + ccd,
        )

    def earliest_pre(self, flat_bank: int, now: int) -> int:
        bank = self.banks[flat_bank]
        return max(now, bank.next_pre, bank.blocked_until)

    def earliest_preab(self, rank_idx: int, now: int) -> int:
        base = rank_idx * self.geometry.banks_per_rank
        earliest = now
        for b in range(base, base + self.geometry.banks_per_rank):
            bank = self.banks[b]
            if bank.open_row >= 0:
                earliest = max(earliest, bank.next_pre)
            earliest = max(earliest, bank.blocked_until)
        return earliest

    def earliest_ref(self, rank_idx: int, now: int) -> int:
        """REF needs every bank of the rank precharged and past its ACT gate."""
        base = rank_idx * self.geometry.banks_per_rank
        earliest = now
        for b in range(base, base + self.geometry.banks_per_rank):
            bank = self.banks[b]
            if bank.open_row >= 0:
                return -1  # not legal until precharged; caller sequences PREab first
            earliest = max(earliest, bank.next_act, bank.blocked_until)
        return earliest

    def can_issue(self, cmd: DramCommand, now: int) -> bool:
        """Timing + row-state legality for a fully addressed command."""
        addr = cmd.address
        kind = cmd.kind
        if kind in (CMD_PREAB, CMD_REF):
            if not 0 <= addr.rank < self.geometry.ranks_per_channel:
                raise AddressRangeError(f"rank {addr.rank} outside geometry")
            if kind == CMD_PREAB:
                return self.earliest_preab(addr.rank, now) <= now
            t = self.earliest_ref(addr.rank, now)
            return t >= 0 and t <= now
        flat = self.geometry.flat_bank(addr.rank, addr.bankgroup, addr.bank)
        self._check_address(flat, addr.row)
        bank = self.banks[flat]
        if kind == CMD_ACT:
            return bank.open_row < 0 and self.earliest_act(flat, now) <= now
        if kind in (CMD_RD, CMD_WR):
            return bank.open_row == addr.row and self.earliest_data(flat, kind == CMD_WR, now) <= now
        if kind == CMD_PRE:
            return bank.open_row >= 0 and self.earliest_pre(flat, now) <= now
        if kind in (CMD_VRR, CMD_RFM):
            return bank.open_row < 0 and self.earliest_bank_ready(flat, now) <= now
        raise ValueError(f"unknown command kind {kind!r}")

    # -- effects -----------------------------------------------------------

    def issue(self, cmd: DramCommand, now: int) -> DramCommand:
        """Apply a legal command's effects. Illegal issue is a fatal bug."""
        if not self.can_issue(cmd, now):
            raise ProtocolViolation(f"illegal {cmd.kind} at cycle {now}: {cmd.address}")
        addr = cmd.address
        t = self.timing
        if cmd.kind == CMD_PREAB:
            base = addr.rank * self.geometry.banks_per_rank
            for b in range(base, base + self.geometry.banks_per_rank):
                bank = self.banks[b]
                if bank.open_row >= 0:
                    bank.open_row = -1
                    bank.next_act = max(bank.next_act, now + t.tRP)
            return cmd
        if cmd.kind == CMD_REF:
            self._apply_ref(addr.rank, now)
            return cmd
        flat = self.geometry.flat_bank(addr.rank, addr.bankgroup, addr.bank)
        bank = self.banks[flat]
        if cmd.kind == CMD_ACT:
            bank.open_row = addr.row
            bank.next_rd = max(bank.next_rd, now + t.tRCD)
            bank.next_wr = max(bank.next_wr, now + t.tRCD)
            bank.next_pre = max(bank.next_pre, now + t.tRAS)
            bank.next_act = max(bank.next_act, now + t.tRC)
            rank = self.ranks[addr.rank]
            rank.last_act_cycle = now
            rank.last_act_by_bg[addr.bankgroup] = now
            rank.act_times.append(now)
            if len(rank.act_times) > 4:
                del rank.act_times[0]
            self.oracle.on_activation(flat, addr.row)
            if self.row_counters is not None:
                self.row_counters.increment(flat, addr.row)
        elif cmd.kind == CMD_RD:
            bank.next_pre = max(bank.next_pre, now + t.tRTP)
            self.last_data_cycle = now
            self.last_data_bg = addr.bankgroup
        elif cmd.kind == CMD_WR:
            bank.next_pre = max(bank.next_pre, now + t.tCL + t.tBL + t.tWR)
            self.last_data_cycle = now
            self.last_data_bg = addr.bankgroup
        elif cmd.kind == CMD_PRE:
            bank.open_row = -1
            bank.next_act = max(bank.next_act, now + t.tRP)
        elif cmd.kind == CMD_VRR:
            victims = cmd.victim_rows
            bank.blocked_until = now + len(victims) * t.tRC
            for row in victims:
                self.oracle.refresh_row(flat, row)
        elif cmd.kind == CMD_RFM:
            bank.blocked_until = now + t.tRFM
            serviced = self._service_rfm(flat)
            cmd = DramCommand(cmd.kind, addr, now, victim_rows=tuple(serviced))
        return cmd

    def _apply_ref(self, rank_idx: int, now: int) -> None:
        t = self.timing
        geo = self.geometry
        rank = self.ranks[rank_idx]
        group = rank.ref_group
        row_start = group * self.ref_group_rows
        row_end = min(row_start + self.ref_group_rows, geo.rows_per_bank)
        base = rank_idx * geo.banks_per_rank
        for b in range(base, base + geo.banks_per_rank):
            self.banks[b].blocked_until = now + t.tRFC
            self.oracle.refresh_span(b, row_start, row_end)
        gap = now - rank.last_ref_start[group]
        if gap > self.max_ref_gap:
            self.max_ref_gap = gap
        rank.last_ref_start[group] = now
        rank.ref_group = (group + 1) % self.n_ref_groups

    def _service_rfm(self, flat_bank: int) -> list[int]:
        """Refresh the victims of the bank's hottest counted row, if any."""
        if self.row_counters is None:
            return []
        top = self.row_counters.top_row(flat_bank)
        if top is None:
            return []
        self.row_counters.reset_row(flat_bank, top)
        victims = []
        for k in range(1, self.victims_per_side + 1):
            for v in (top - k, top + k):
                if 0 <= v < self.geometry.rows_per_bank:
                    self.oracle.refresh_row(flat_bank, v)
                    victims.append(v)
        return victims

    def victim_rows_of(self, row: int) -> tuple[int, ...]:
        """Neighbor rows refreshed by a preventive refresh targeting `row`."""
        out = []
        for k in range(1, self.victims_per_side + 1):
            for v in (row - k, row + k):
                if 0 <= v < self.geometry.rows_per_bank:
                    out.append(v)
        return tuple(out)
