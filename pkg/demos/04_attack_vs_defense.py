"""End-to-end: a hammering thread against three benign threads, with the
throttler off and on. Takes about a minute.

Graphene guards a small desk-scale device at a disturbance threshold of
1024. The attacker spreads double-sided aggressor pairs over all banks and
defeats the cache with set-alias rows. Compare preventive-refresh counts,
benign IPC, and the attacker's quota trajectory.
"""

import time

from hammersim.config import resolve
from hammersim.cores import Trace
from hammersim.engine import Engine
from hammersim.tracegen import AttackerProfile, BenignProfile, gen_attacker, gen_benign


def to_trace(entries):
    return Trace([e.bubble_count for e in entries],
                 [e.address for e in entries],
                 [e.is_write for e in entries])


LLC = {"ways": 2, "size_bytes": 8 << 20, "hit_latency": 20, "total_mshrs": 64}
TARGET = 400_000   # benign instructions per core; raise toward 1M for full effect

print("generating traces (calibrated against a solo run)...")
benign = [to_trace(gen_benign(BenignProfile(target_rbmpki=35.0, seed=41 + i),
                              TARGET + 100_000, sim_config={"llc": dict(LLC)}))
          for i in range(3)]
attacker = to_trace(gen_attacker(
    AttackerProfile(num_aggressor_rows=16, same_bank=False, seed=7, stagger_span=448),
    200_000, sim_config={"llc": dict(LLC)}))

results = {}
for throttling in (False, True):
    cfg = resolve({
        "geometry": {"preset": "desk_8bank"},
        "timing": {"preset": "desk"},
        "llc": dict(LLC),
        "cores": {"instruction_target": TARGET, "max_outstanding_misses": 4,
                  "attacker_max_outstanding": 16},
        "measurement": {"warmup_cycles": 20_000},
        "mitigation": {"mechanism": "graphene", "nrh": 1024},
        "throttler": {"enabled": throttling, "window_cycles": 262_144,
                      "threat_threshold": 1.0},
        "workload": {"traces": [], "attacker_threads": [3]},
    })
    t0 = time.time()
    res = Engine(cfg, traces=benign + [attacker]).run()
    results[throttling] = res
    label = "throttler on " if throttling else "throttler off"
    print(f"{label}: {res.cycles} cycles, benign ipc="
          f"{[round(v, 3) for v in res.ipc[:3]]}, attacker ipc={res.ipc[3]:.3f}, "
          f"refreshes={res.command_counts.get('VRR', 0)}, "
          f"attacker marked={res.ever_marked[3]}  ({time.time() - t0:.0f}s)")
    if throttling:
        for w in res.telemetry:
            print(f"   window {w['window']}: scores="
                  f"{[round(s, 1) for s in w['scores']]} quotas={w['quotas']}")

off, on = results[False], results[True]
vrr_off = off.command_counts.get("VRR", 0)
vrr_on = on.command_counts.get("VRR", 0)
ipc_off = sum(off.ipc[:3])
ipc_on = sum(on.ipc[:3])
print(f"\npreventive refreshes: {vrr_off} -> {vrr_on} "
      f"({100 * (1 - vrr_on / max(vrr_off, 1)):.0f}% fewer)")
print(f"benign throughput:    +{100 * (ipc_on / ipc_off - 1):.1f}%")
