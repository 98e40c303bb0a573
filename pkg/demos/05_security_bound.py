"""The closed-form multi-threaded attack bound.

How much preventive-action score can an attack thread accumulate, relative
to the benign average, before the outlier test marks it? The bound depends
only on the fraction of threads the attacker controls and the outlier ratio,
and diverges once the attacker owns enough of the mean.
"""

import math

from hammersim.security import BoundQuery, max_attack_ratio, write_sweep_csv

print("== anchors ==")
for f, t in ((0.5, 0.65), (0.9, 0.05), (0.0, 0.65), (0.25, 0.65)):
    ratio = max_attack_ratio(BoundQuery(f, t))
    shown = "unbounded" if math.isinf(ratio) else f"{ratio:.2f}x"
    print(f"  attacker holds {f:4.0%} of threads, outlier ratio {t}: {shown}")

print("\n== where the bound diverges ==")
for t in (0.05, 0.2, 0.65, 1.0):
    pole = 1.0 / (1.0 + t)
    print(f"  outlier ratio {t:4.2f}: unbounded once attacker fraction >= {pole:.2f}")

print("\n== a small table (outlier ratio 0.65) ==")
for f in (0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.55):
    print(f"  f={f:0.2f}  ratio={max_attack_ratio(BoundQuery(f, 0.65)):6.2f}")

write_sweep_csv("security_bound.csv", [0.05, 0.2, 0.65, 1.0],
                [i / 100 for i in range(100)])
print("\nwrote security_bound.csv (f_atk,th_outlier,ratio)")
print("render it with: hammerplots security_bound -i security_bound.csv -o bound.png")
