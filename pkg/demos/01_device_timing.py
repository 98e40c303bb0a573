"""Walk the DRAM device model by hand.

Issues a small command sequence against one bank, showing when commands
become legal, how the row buffer behaves, and how the disturbance oracle
counts neighbor activations. Finishes by replaying the command log through
the independent protocol checker.
"""

from hammersim.dram import (
    CMD_ACT, CMD_PRE, CMD_RD, DramAddress, DramCommand, DramDevice,
    DeviceGeometry, TimingParams,
)
from hammersim.protocol_check import replay

geometry = DeviceGeometry(channels=1, ranks_per_channel=1, bankgroups_per_rank=4,
                          banks_per_bankgroup=2, rows_per_bank=4096,
                          columns_per_row=64, bytes_per_column=64)
timing = TimingParams(clock_period_ns=1.0, tRCD=10, tRAS=24, tRP=10, tRC=34,
                      tCCD_S=4, tCCD_L=6, tRRD_S=4, tRRD_L=6, tFAW=16, tWR=12,
                      tRTP=6, tRFC=100, tREFI=2048, tREFW=131072, tRFM=136,
                      tCL=12, tBL=4)
device = DramDevice(geometry, timing)

addr = lambda row: DramAddress(0, 0, 0, 0, row, 0)
log = []


def issue(kind, row, now):
    cmd = DramCommand(kind, addr(row), now)
    legal = device.can_issue(cmd, now)
    print(f"cycle {now:4d}: {kind:4s} row {row:4d} -> {'issue' if legal else 'NOT LEGAL'}")
    if legal:
        device.issue(cmd, now)
        log.append((now, kind, 0, 0, 0, row, 0))
    return legal


print("== opening a row and reading it ==")
issue(CMD_ACT, 100, 0)
issue(CMD_RD, 100, 5)            # too early: tRCD=10 not yet satisfied
issue(CMD_RD, 100, timing.tRCD)  # exactly legal
issue(CMD_ACT, 200, 20)          # bank already open -> refused

print("\n== conflict: precharge then activate the other row ==")
issue(CMD_PRE, 100, timing.tRAS)
issue(CMD_ACT, 200, timing.tRAS + timing.tRP)

print("\n== the disturbance oracle counted neighbor activations ==")
for victim in (99, 101, 199, 201):
    print(f"  damage[row {victim}] = {device.oracle.damage.get((0, victim), 0)}")
loc, peak = device.oracle.peak_damage()
print(f"  worst victim so far: bank {loc[0]} row {loc[1]} at {peak}")

print("\n== independent protocol replay ==")
violations = replay(log, geometry, timing)
print(f"  {len(log)} commands, {len(violations)} violations")
assert not violations
