"""Closed-form bound on multi-threaded memory-performance attacks.

With attack threads holding fraction f of all hardware threads and outlier
ratio t, every attack thread can keep its preventive score at most

    ratio(f, t) = (1 + t) (1 - f) / (1 - (1 + t) f)

times the average benign score without being marked: the bound is the fixed
point of the outlier test when all attack threads sit at the maximum score.
The bound diverges when (1 + t) * f >= 1.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

UNBOUNDED = math.inf


@dataclass(frozen=True)
class BoundQuery:
    f_atk: float          # fraction of threads used by the attacker
    th_outlier: float     # allowed divergence above the mean score

    def __post_init__(self):
        if not 0.0 <= self.f_atk < 1.0:
            raise ValueError(f"f_atk must be in [0, 1), got {self.f_atk}")
        if self.th_outlier < 0.0:
            raise ValueError(f"th_outlier must be >= 0, got {self.th_outlier}")


def max_attack_ratio(query: BoundQuery) -> float:
    """Worst-case attack-thread score, normalized to the benign average.

    Returns math.inf when the pole (1 + t) * f >= 1 is reached: the attacker
    controls enough of the mean that the outlier test can never fire.
    """
    f = query.f_atk
    t = query.th_outlier
    denom = 1.0 - (1.0 + t) * f
    if denom <= 0.0:
        return UNBOUNDED
    return (1.0 + t) * (1.0 - f) / denom


def sweep(th_outliers: list[float], f_grid: list[float]) -> list[tuple[float, float, float]]:
    """Bound surface as (f_atk, th_outlier, ratio) rows, grouped by outlier ratio."""
    rows = []
    for t in th_outliers:
        for f in f_grid:
            rows.append((f, t, max_attack_ratio(BoundQuery(f, t))))
    return rows


def write_sweep_csv(path: str, th_outliers: list[float], f_grid: list[float]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["f_atk", "th_outlier", "ratio"])
        for f, t, ratio in sweep(th_outliers, f_grid):
            writer.writerow([f"{f:.6g}", f"{t:.6g}", "inf" if math.isinf(ratio) else f"{ratio:.6f}"])
