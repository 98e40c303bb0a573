"""Per-channel memory controller.

Scheduling policy: row-buffer hits bypass older row misses (FR-FCFS), but
each bank allows at most `cap` consecutive bypasses before its oldest request
is forced. Periodic refresh outranks everything; mitigation-requested
commands (victim refreshes, refresh management) outrank data commands for
their target bank. Writes complete for the issuing core at enqueue and drain
in batches between a high and a low watermark.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass

from .dram import (
    CMD_ACT, CMD_PRE, CMD_PREAB, CMD_RD, CMD_REF, CMD_RFM, CMD_VRR, CMD_WR,
    DramDevice,
)
from .mitigations import ACTION_RFM, ACTION_BACKOFF_BURST, ACTION_VICTIM_REFRESH, Mitigation

NEVER = 1 << 62


@dataclass
class ControllerConfig:
    read_queue_depth: int = 64
    write_queue_depth: int = 64
    cap: int = 4
    write_drain_high: int = 48
    write_drain_low: int = 16


class Request:
    __slots__ = ("thread", "line", "flat_bank", "rank", "bankgroup", "bank",
                 "row", "column", "arrival", "is_write", "seq")

    def __init__(self, thread, line, flat_bank, rank, bankgroup, bank, row, column,
                 arrival, is_write, seq):
        self.thread = thread
        self.line = line
        self.flat_bank = flat_bank
        self.rank = rank
        self.bankgroup = bankgroup
        self.bank = bank
        self.row = row
        self.column = column
        self.arrival = arrival
        self.is_write = is_write
        self.seq = seq


class _PrivOp:
    """A bank-blocking command requested by the mitigation (VRR or RFM)."""

    __slots__ = ("kind", "flat_bank", "victim_rows", "seq")

    def __init__(self, kind, flat_bank, victim_rows, seq):
        self.kind = kind
        self.flat_bank = flat_bank
        self.victim_rows = victim_rows
        self.seq = seq


class MemController:
    def __init__(self, channel: int, device: DramDevice, mitigation: Mitigation,
                 config: ControllerConfig, engine):
        self.channel = channel
        self.device = device
        self.mitigation = mitigation
        self.config = config
        self.engine = engine
        geo = device.geometry
        n_banks = geo.banks_per_channel
        self.reads_by_bank: list[list[Request]] = [[] for _ in range(n_banks)]
        self.writes_by_bank: list[list[Request]] = [[] for _ in range(n_banks)]
        self.read_count = 0
        self.write_count = 0
        self.cap_counters = [0] * n_banks
        self.priv_ops: list[_PrivOp] = []
        self.priv_banks: set[int] = set()
        self.ref_due = [device.timing.tREFI] * geo.ranks_per_channel
        self.completions: list[tuple[int, int, int, int]] = []  # (finish, seq, thread, line/arrival packed)
        self._completion_meta: dict[int, tuple[int, int, int]] = {}
        self.drain_mode = False
        self.seq = 0
        self.last_issue_cycle = -1
        self.dirty = False
        self.stat_ref_count = 0
        self.stat_forced_oldest = 0

    # -- queue interface -------------------------------------------------------

    def read_space(self) -> bool:
        return self.read_count < self.config.read_queue_depth

    def write_space(self) -> bool:
        return self.write_count < self.config.write_queue_depth

    def enqueue(self, req: Request) -> str:
        """Append to the matching queue; 'rejected_full' signals back-pressure."""
        if req.is_write:
            if not self.write_space():
                return "rejected_full"
            self.writes_by_bank[req.flat_bank].append(req)
            self.write_count += 1
            if self.write_count >= self.config.write_drain_high:
                self.drain_mode = True
        else:
            if not self.read_space():
                return "rejected_full"
            self.reads_by_bank[req.flat_bank].append(req)
            self.read_count += 1
        return "accepted"

    def make_request(self, thread, line, addr, arrival, is_write) -> Request:
        flat = self.device.geometry.flat_bank(addr.rank, addr.bankgroup, addr.bank)
        self.seq += 1
        return Request(thread, line, flat, addr.rank, addr.bankgroup, addr.bank,
                       addr.row, addr.column, arrival, is_write, self.seq)

    def add_priv(self, action) -> None:
        """Queue the bank-blocking command(s) for a preventive action."""
        burst = 1
        kind = CMD_VRR
        victims: tuple[int, ...] = ()
        if action.kind == ACTION_VICTIM_REFRESH:
            for row in action.aggressor_rows:
                victims = victims + self.device.victim_rows_of(row)
        elif action.kind == ACTION_RFM:
            kind = CMD_RFM
        elif action.kind == ACTION_BACKOFF_BURST:
            kind = CMD_RFM
            burst = max(1, action.cost_cycles // self.device.timing.tRFM)
        for _ in range(burst):
            self.seq += 1
            self.priv_ops.append(_PrivOp(kind, action.flat_bank, victims, self.seq))
        self.priv_banks.add(action.flat_bank)

    # -- completions -------------------------------------------------------------

    def push_completion(self, finish: int, thread: int, line: int, arrival: int) -> None:
        self.seq += 1
        heapq.heappush(self.completions, (finish, self.seq, thread, line))
        self._completion_meta[self.seq] = (thread, line, arrival)

    def process_completions(self, now: int) -> None:
        while self.completions and self.completions[0][0] <= now:
            finish, seq, thread, line = heapq.heappop(self.completions)
            arrival = self._completion_meta.pop(seq)[2]
            self.engine.on_read_complete(thread, line, arrival, finish)

    def next_completion(self) -> int:
        return self.completions[0][0] if self.completions else NEVER

    # -- scheduling ----------------------------------------------------------------

    def _rank_ref_pending(self, rank: int, now: int) -> bool:
        return now >= self.ref_due[rank]

    def _refresh_candidate(self, now: int):
        """(cycle, descriptor) for the most urgent refresh step, or None."""
        device = self.device
        geo = device.geometry
        best = None
        for rank in range(geo.ranks_per_channel):
            if now < self.ref_due[rank]:
                continue
            base = rank * geo.banks_per_rank
            any_open = any(device.banks[b].open_row >= 0
                           for b in range(base, base + geo.banks_per_rank))
            if any_open:
                cycle = device.earliest_preab(rank, now)
                cand = (cycle, 0, rank, CMD_PREAB)
            else:
                cycle = device.earliest_ref(rank, now)
                cand = (cycle, 0, rank, CMD_REF)
            if best is None or cand[0] < best[0]:
                best = cand
        return best

    def _priv_candidate(self, now: int):
        device = self.device
        geo = device.geometry
        per_rank = geo.banks_per_rank
        best = None
        seen_banks = set()
        for op in self.priv_ops:
            b = op.flat_bank
            if b in seen_banks:
                continue
            seen_banks.add(b)
            if self._rank_ref_pending(b // per_rank, now):
                continue  # REF first
            bank = device.banks[b]
            if bank.open_row >= 0:
                cycle = device.earliest_pre(b, now)
                cand = (cycle, op.seq, op, CMD_PRE)
            else:
                cycle = device.earliest_bank_ready(b, now)
                cand = (cycle, op.seq, op, op.kind)
            if best is None or (cand[0], cand[1]) < (best[0], best[1]):
                best = cand
        return best

    def _data_candidate(self, now: int):
        """Best data command among active-queue requests: (cycle, arrival, req, kind, is_oldest).

        The "oldest" a bank is obliged to serve is its oldest *eligible*
        request: one whose activation is not being delayed by the mitigation
        (blacklist delays gate ACTs only; open-row hits stay eligible).
        """
        device = self.device
        geo = device.geometry
        per_rank = geo.banks_per_rank
        cap = self.config.cap
        use_writes = self.drain_mode or (self.read_count == 0 and self.write_count > 0)
        queues = self.writes_by_bank if use_writes else self.reads_by_bank
        banks = device.banks
        act_allowed_at = self.mitigation.act_allowed_at
        gated = self.mitigation.name == "blockhammer"
        best = None
        for b, q in enumerate(queues):
            if not q:
                continue
            if b in self.priv_banks or self._rank_ref_pending(b // per_rank, now):
                continue
            bank = banks[b]
            open_row = bank.open_row
            oldest = q[0]
            delayed_wake = NEVER
            if gated:
                oldest = None
                for req in q:
                    if req.row == open_row:
                        oldest = req
                        break
                    allowed = act_allowed_at(b, req.row, now)
                    if allowed <= now:
                        oldest = req
                        break
                    if allowed < delayed_wake:
                        delayed_wake = allowed
                if oldest is None:
                    # whole bank blacklisted for now; wake when a delay expires
                    cand = (delayed_wake, q[0].arrival, q[0].seq, q[0], CMD_ACT, True)
                    if best is None or (cand[0], cand[1], cand[2]) < (best[0], best[1], best[2]):
                        best = cand
                    continue
            forced = self.cap_counters[b] >= cap
            cand = None
            if not forced and open_row >= 0:
                for req in q:
                    if req.row == open_row:
                        cycle = device.earliest_data(b, req.is_write, now)
                        cand = (cycle, req.arrival, req.seq, req,
                                CMD_WR if req.is_write else CMD_RD, req is oldest)
                        break
            if cand is None:
                if open_row < 0:
                    cycle = device.earliest_act(b, now)
                    if gated:
                        cycle = max(cycle, act_allowed_at(b, oldest.row, now))
                    cand = (cycle, oldest.arrival, oldest.seq, oldest, CMD_ACT, True)
                elif open_row == oldest.row:
                    cycle = device.earliest_data(b, oldest.is_write, now)
                    cand = (cycle, oldest.arrival, oldest.seq, oldest,
                            CMD_WR if oldest.is_write else CMD_RD, True)
                else:
                    cycle = device.earliest_pre(b, now)
                    cand = (cycle, oldest.arrival, oldest.seq, oldest, CMD_PRE, True)
            if best is None or (cand[0], cand[1], cand[2]) < (best[0], best[1], best[2]):
                best = cand
        return best

    def try_issue(self, now: int):
        """Issue at most one command at `now`; returns the next wake cycle."""
        if self.last_issue_cycle == now:
            return now + 1
        wake = NEVER
        ref = self._refresh_candidate(now)
        if ref is not None:
            if ref[0] <= now:
                self._issue_refresh_step(ref, now)
                return now + 1
            wake = min(wake, ref[0])
        priv = self._priv_candidate(now)
        if priv is not None:
            if priv[0] <= now:
                self._issue_priv_step(priv, now)
                return now + 1
            wake = min(wake, priv[0])
        data = self._data_candidate(now)
        if data is not None:
            if data[0] <= now:
                self._issue_data_step(data, now)
                return now + 1
            wake = min(wake, data[0])
        for rank in range(self.device.geometry.ranks_per_channel):
            if now < self.ref_due[rank]:
                wake = min(wake, self.ref_due[rank])
        return wake

    # -- issue helpers ---------------------------------------------------------------

    def _issue_refresh_step(self, cand, now: int) -> None:
        _, _, rank, kind = cand
        if kind == CMD_PREAB:
            self.engine.issue_command(self, CMD_PREAB, rank, 0, 0, 0, now)
        else:
            self.engine.issue_command(self, CMD_REF, rank, 0, 0, 0, now)
            self.ref_due[rank] += self.device.timing.tREFI
            self.stat_ref_count += 1
        self.last_issue_cycle = now

    def _issue_priv_step(self, cand, now: int) -> None:
        _, _, op, kind = cand
        geo = self.device.geometry
        rank, bg, bank = geo.unflatten_bank(op.flat_bank)
        if kind == CMD_PRE:
            self.engine.issue_command(self, CMD_PRE, rank, bg, bank,
                                      self.device.banks[op.flat_bank].open_row, now)
        else:
            self.engine.issue_command(self, kind, rank, bg, bank, 0, now,
                                      victim_rows=op.victim_rows)
            self.priv_ops.remove(op)
            if not any(o.flat_bank == op.flat_bank for o in self.priv_ops):
                self.priv_banks.discard(op.flat_bank)
        self.last_issue_cycle = now

    def _issue_data_step(self, cand, now: int) -> None:
        _, _, _, req, kind, is_oldest = cand
        b = req.flat_bank
        if kind == CMD_ACT:
            self.engine.issue_command(self, CMD_ACT, req.rank, req.bankgroup, req.bank,
                                      req.row, now, thread=req.thread)
        elif kind == CMD_PRE:
            self.engine.issue_command(self, CMD_PRE, req.rank, req.bankgroup, req.bank,
                                      self.device.banks[b].open_row, now)
        else:
            self.engine.issue_command(self, kind, req.rank, req.bankgroup, req.bank,
                                      req.row, now, thread=req.thread, column=req.column)
            queue = self.writes_by_bank[b] if req.is_write else self.reads_by_bank[b]
            queue.remove(req)
            if req.is_write:
                self.write_count -= 1
                if self.drain_mode and self.write_count <= self.config.write_drain_low:
                    self.drain_mode = False
            else:
                self.read_count -= 1
                t = self.device.timing
                self.push_completion(now + t.tCL + t.tBL, req.thread, req.line, req.arrival)
            if is_oldest:
                if self.cap_counters[b] >= self.config.cap:
                    self.stat_forced_oldest += 1
                self.cap_counters[b] = 0
            else:
                self.cap_counters[b] += 1
                assert self.cap_counters[b] <= self.config.cap, "cap bound violated"
            self.engine.note_dequeue()
        self.last_issue_cycle = now
