"""Tour of the mitigation mechanisms.

Feeds each mechanism a hammering activation stream against one bank and
shows when it reacts. Also prints the derived secure parameters across the
disturbance-threshold sweep range.
"""

from hammersim.dram import DeviceGeometry, DramDevice, TimingParams
from hammersim.mitigations import (
    MitigationConfig, SWEEP_NRH, build_mitigation, needs_row_counters, secure_config,
)

geometry = DeviceGeometry(channels=1, ranks_per_channel=1, bankgroups_per_rank=4,
                          banks_per_bankgroup=2, rows_per_bank=4096,
                          columns_per_row=64, bytes_per_column=64)
timing = TimingParams(clock_period_ns=1.0, tRCD=10, tRAS=24, tRP=10, tRC=34,
                      tCCD_S=4, tCCD_L=6, tRRD_S=4, tRRD_L=6, tFAW=16, tWR=12,
                      tRTP=6, tRFC=100, tREFI=2048, tREFW=131072, tRFM=136,
                      tCL=12, tBL=4)

print("== secure parameters by mechanism and threshold ==")
for mechanism in ("para", "graphene", "prac", "blockhammer", "rfm"):
    row = []
    for nrh in SWEEP_NRH:
        params = secure_config(mechanism, nrh, timing)
        row.append(next(iter(params.values())))
    label = next(iter(secure_config(mechanism, 1024, timing)))
    print(f"  {mechanism:12s} {label:22s} " +
          " ".join(f"{v:.4g}" if isinstance(v, float) else f"{v:6d}" for v in row))

print("\n== double-sided hammering of rows 70/72, threshold 256 ==")
for mechanism in ("para", "graphene", "rfm", "prac"):
    device = DramDevice(geometry, timing, track_row_counters=needs_row_counters(mechanism))
    mech = build_mitigation(MitigationConfig(mechanism=mechanism, nrh=256, seed=1),
                            geometry, timing, device)
    first_action, total = None, 0
    for i in range(4000):
        row = 70 if i % 2 == 0 else 72
        if device.row_counters is not None:
            device.row_counters.increment(0, row)
        actions = mech.on_activation(thread=0, flat_bank=0, row=row, now=i * 40)
        total += len(actions)
        if actions and first_action is None:
            first_action = (i + 1, actions[0].kind)
        if actions and device.row_counters is not None:
            # emulate the device servicing the hottest rows during the window
            for _ in range(4):
                device._service_rfm(0)
    print(f"  {mechanism:10s} first action after {first_action[0]:5d} activations"
          f" ({first_action[1]}), {total} total in 4000 ACTs")

print("\n== blockhammer blacklists instead of emitting actions ==")
device = DramDevice(geometry, timing)
mech = build_mitigation(MitigationConfig(mechanism="blockhammer", nrh=256, seed=1),
                        geometry, timing, device)
now = 0
for i in range(200):
    now += 40
    mech.on_activation(0, 0, 70, now)
allowed = mech.act_allowed_at(0, 70, now)
print(f"  after 200 activations of row 70: next activation allowed at cycle "
      f"{allowed} (now {now}) -> delayed {allowed - now} cycles")
