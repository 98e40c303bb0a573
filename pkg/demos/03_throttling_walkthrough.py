"""The throttling mechanism, step by step.

Drives the per-thread score/quota machinery directly with a scripted action
stream: thread 0 hammers, threads 1-3 behave. Shows proportional score
attribution, outlier marking, the quota-shrink schedule, and the restore
after a clean window.
"""

from hammersim.throttle import ThreadThrottler, ThrottlerConfig

cfg = ThrottlerConfig(window_cycles=100_000, threat_threshold=32.0,
                      outlier_ratio=0.65, old_suspect_penalty=1,
                      new_suspect_divisor=10, total_mshrs=64)
thr = ThreadThrottler(cfg, num_threads=4)

print("== one preventive action, activations split 90/5/3/2 ==")
for thread, acts in enumerate((90, 5, 3, 2)):
    for _ in range(acts):
        thr.record_activation(thread)
newly = thr.on_preventive_action()
print(f"  score deltas: {[round(s, 4) for s in thr.active_scores()]}"
      f"  newly marked: {newly}")

print("\n== hammering thread accumulates score until both checks pass ==")
window = 0
for step in range(1, 201):
    thr.activations[0] = 88          # attacker dominates activations
    for i in (1, 2, 3):
        thr.activations[i] = 4
    newly = thr.on_preventive_action()
    if newly:
        scores = thr.active_scores()
        mean = sum(scores) / 4
        print(f"  action {step:3d}: scores={[round(s, 1) for s in scores]}"
              f" mean={mean:.1f} cap={1.65 * mean:.1f} -> marked {newly},"
              f" quota now {thr.quota(0)}")
        break

print("\n== sustained suspicion shrinks the quota one unit per window ==")
for w in range(1, 4):
    thr.on_window_end(w * cfg.window_cycles)
    for _ in range(40):
        thr.activations[0] = 88
        for i in (1, 2, 3):
            thr.activations[i] = 4
        thr.on_preventive_action()
    print(f"  window {w}: recently_suspect={thr.recent_suspect[0]}"
          f" quota={thr.quota(0)}")

print("\n== one clean window restores the full quota ==")
thr.on_window_end(4 * cfg.window_cycles)   # closes the last hammering window
thr.on_window_end(5 * cfg.window_cycles)   # a full window with no marking
print(f"  quota after clean window: {thr.quota(0)} (pool size {cfg.total_mshrs})")
