"""Independent brute-force replay of a DRAM command log.

Deliberately shares no state-machine code with `dram.DramDevice`: every rule
is recomputed from the raw command history, so a disagreement between the two
implementations surfaces as a reported violation. Used by the protocol
property tests and by `hammersim run --check-protocol`.
"""

from __future__ import annotations

from .dram import (
    CMD_ACT,
    CMD_PRE,
    CMD_PREAB,
    CMD_RD,
    CMD_REF,
    CMD_RFM,
    CMD_VRR,
    CMD_WR,
    DeviceGeometry,
    TimingParams,
)

# log record: (cycle, kind, rank, bankgroup, bank, row, n_victims)
Record = tuple[int, str, int, int, int, int, int]


def replay(log: list[Record], geometry: DeviceGeometry, timing: TimingParams) -> list[str]:
    """Return a list of human-readable violations (empty when the log is clean)."""
    t = timing
    n_banks = geometry.banks_per_channel
    per_rank = geometry.banks_per_rank

    open_row = [-1] * n_banks
    last_act = [None] * n_banks
    last_pre = [None] * n_banks      # PRE or PREab that closed the bank
    last_rd = [None] * n_banks
    last_wr = [None] * n_banks
    busy_until = [0] * n_banks       # REF/VRR/RFM service windows
    rank_acts: list[list[int]] = [[] for _ in range(geometry.ranks_per_channel)]
    bg_acts: dict[tuple[int, int], int] = {}
    last_data: tuple[int, int] | None = None   # (cycle, bankgroup), channel-wide
    prev_cycle = None

    violations: list[str] = []

    def bad(cycle, msg):
        violations.append(f"cycle {cycle}: {msg}")

    def act_ready(b, cycle):
        """Bank-local gate shared by ACT/VRR/RFM/REF: tRC after ACT, tRP after PRE."""
        ok = True
        if last_act[b] is not None and cycle - last_act[b] < t.tRC:
            bad(cycle, f"tRC violated on bank {b} ({cycle - last_act[b]} < {t.tRC})")
            ok = False
        if last_pre[b] is not None and cycle - last_pre[b] < t.tRP:
            bad(cycle, f"tRP violated on bank {b} ({cycle - last_pre[b]} < {t.tRP})")
            ok = False
        if cycle < busy_until[b]:
            bad(cycle, f"bank {b} busy until {busy_until[b]}")
            ok = False
        return ok

    def pre_ready(b, cycle):
        if last_act[b] is not None and cycle - last_act[b] < t.tRAS:
            bad(cycle, f"tRAS violated on bank {b} ({cycle - last_act[b]} < {t.tRAS})")
        if last_rd[b] is not None and cycle - last_rd[b] < t.tRTP:
            bad(cycle, f"tRTP violated on bank {b} ({cycle - last_rd[b]} < {t.tRTP})")
        if last_wr[b] is not None and cycle - last_wr[b] < t.tCL + t.tBL + t.tWR:
            bad(cycle, f"tWR violated on bank {b} ({cycle - last_wr[b]} < {t.tCL + t.tBL + t.tWR})")
        if cycle < busy_until[b]:
            bad(cycle, f"bank {b} busy until {busy_until[b]}")

    for rec in log:
        cycle, kind, rank, bg, bank, row, n_victims = rec
        if prev_cycle is not None and cycle < prev_cycle:
            bad(cycle, "log not sorted by cycle")
        if prev_cycle is not None and cycle == prev_cycle:
            bad(cycle, "two commands share one command-bus cycle")
        prev_cycle = cycle
        b = (rank * geometry.bankgroups_per_rank + bg) * geometry.banks_per_bankgroup + bank

        if kind == CMD_ACT:
            if open_row[b] >= 0:
                bad(cycle, f"ACT to open bank {b}")
            act_ready(b, cycle)
            acts = rank_acts[rank]
            if acts and cycle - acts[-1] < t.tRRD_S:
                bad(cycle, f"tRRD_S violated on rank {rank} ({cycle - acts[-1]} < {t.tRRD_S})")
            prev_bg = bg_acts.get((rank, bg))
            if prev_bg is not None and cycle - prev_bg < t.tRRD_L:
                bad(cycle, f"tRRD_L violated on rank {rank} bg {bg} ({cycle - prev_bg} < {t.tRRD_L})")
            if len(acts) >= 4 and cycle - acts[-4] < t.tFAW:
                bad(cycle, f"tFAW violated on rank {rank}: 5th ACT {cycle - acts[-4]} after 4-ago")
            open_row[b] = row
            last_act[b] = cycle
            acts.append(cycle)
            bg_acts[(rank, bg)] = cycle

        elif kind in (CMD_RD, CMD_WR):
            if open_row[b] != row:
                bad(cycle, f"{kind} to bank {b} row {row} but open row is {open_row[b]}")
            if last_act[b] is not None and cycle - last_act[b] < t.tRCD:
                bad(cycle, f"tRCD violated on bank {b} ({cycle - last_act[b]} < {t.tRCD})")
            if cycle < busy_until[b]:
                bad(cycle, f"bank {b} busy until {busy_until[b]}")
            if last_data is not None:
                ccd = t.tCCD_L if last_data[1] == bg else t.tCCD_S
                if cycle - last_data[0] < ccd:
                    bad(cycle, f"tCCD violated ({cycle - last_data[0]} < {ccd})")
            last_data = (cycle, bg)
            if kind == CMD_RD:
                last_rd[b] = cycle
            else:
                last_wr[b] = cycle

        elif kind == CMD_PRE:
            if open_row[b] < 0:
                bad(cycle, f"PRE to closed bank {b}")
            pre_ready(b, cycle)
            open_row[b] = -1
            last_pre[b] = cycle

        elif kind == CMD_PREAB:
            base = rank * per_rank
            for bb in range(base, base + per_rank):
                if open_row[bb] >= 0:
                    pre_ready(bb, cycle)
                    open_row[bb] = -1
                    last_pre[bb] = cycle

        elif kind == CMD_REF:
            base = rank * per_rank
            for bb in range(base, base + per_rank):
                if open_row[bb] >= 0:
                    bad(cycle, f"REF with open bank {bb}")
                act_ready(bb, cycle)
                busy_until[bb] = cycle + t.tRFC
            # REF resets activation-gap history for its rank's banks: the device
            # does not, so the checker keeps history too (conservative match).

        elif kind == CMD_VRR:
            if open_row[b] >= 0:
                bad(cycle, f"VRR to open bank {b}")
            act_ready(b, cycle)
            busy_until[b] = cycle + n_victims * t.tRC

        elif kind == CMD_RFM:
            if open_row[b] >= 0:
                bad(cycle, f"RFM to open bank {b}")
            act_ready(b, cycle)
            busy_until[b] = cycle + t.tRFM

        else:
            bad(cycle, f"unknown command {kind!r}")

    return violations
