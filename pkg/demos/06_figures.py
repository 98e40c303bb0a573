"""Render the security-bound curves with the companion plotting package.

Requires the `plots/` package (hammersim-plots) to be installed, or run
from the repository root where it is importable via plots/src.
"""

import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "plots", "src"))

from hammersim.security import write_sweep_csv
from hammerplots import FigureSpec, render

csv_path = "security_bound.csv"
write_sweep_csv(csv_path, [0.05, 0.2, 0.65, 1.0], [i / 100 for i in range(100)])
out = render(FigureSpec(input_csv=csv_path, kind="security_bound",
                        output="security_bound.png",
                        title="attack score bound vs. attacker thread share"))
print(f"wrote {out}")
print("the 0.65 curve passes through (0.5, 4.71); steeper outlier ratios")
print("diverge sooner, which is the cost of tolerating benign variance")
