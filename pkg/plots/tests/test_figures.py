"""Secondary acceptance: the security-bound curve passes through (0.5, 4.71)
at outlier ratio 0.65, and rendering is byte-identical across runs."""

from __future__ import annotations

import csv
import math
import os
import subprocess
import sys

import pytest

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from hammerplots import FigureError, FigureSpec, build_figure, render

import matplotlib.pyplot as plt


def write_bound_csv(path):
    """Same closed form the simulator's analyzer emits, same schema."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["f_atk", "th_outlier", "ratio"])
        for t in (0.05, 0.65):
            for i in range(100):
                f = i / 100
                denom = 1 - (1 + t) * f
                ratio = "inf" if denom <= 0 else f"{(1 + t) * (1 - f) / denom:.6f}"
                w.writerow([f"{f:.6g}", f"{t:.6g}", ratio])


def write_sweep_csv(path):
    cols = ["mechanism", "nrh", "mix", "throttler", "status", "weighted_speedup",
            "ws_normalized", "max_slowdown", "actions_total", "energy_total_j",
            "energy_benign_j", "lat_p50_ns", "lat_p90_ns", "lat_p99_ns", "suspects"]
    rows = [
        ["graphene", 4096, "mix0", "off", "ok", 2.8, 0.95, 1.4, 10, 1e-4, 8e-5, 40, 90, 200, 0],
        ["graphene", 1024, "mix0", "off", "ok", 2.2, 0.74, 1.9, 300, 2e-4, 9e-5, 55, 140, 400, 0],
        ["graphene", 256, "mix0", "off", "ok", 1.4, 0.47, 2.8, 3000, 4e-4, 1e-4, 90, 300, 900, 0],
        ["graphene", 1024, "mix0", "on", "ok", 2.6, 0.88, 1.5, 150, 1.5e-4, 8e-5, 45, 100, 250, 1],
        ["graphene", 256, "mix0", "on", "error: boom", "", "", "", "", "", "", "", "", "", ""],
    ]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        w.writerows(rows)


class TestSecurityBound:
    def test_curve_passes_through_anchor(self, tmp_path):
        csv_path = tmp_path / "bound.csv"
        write_bound_csv(csv_path)
        spec = FigureSpec(str(csv_path), "security_bound", str(tmp_path / "b.png"))
        fig, ax = build_figure(spec)
        try:
            anchor = None
            for line in ax.lines:
                xs, ys = line.get_xdata(), line.get_ydata()
                for x, y in zip(xs, ys):
                    if abs(x - 0.5) < 1e-9 and abs(y - 4.71) <= 0.01:
                        anchor = (x, y)
            assert anchor is not None, "no curve point at (0.5, 4.71 +- 0.01)"
        finally:
            plt.close(fig)

    def test_render_byte_identical(self, tmp_path):
        csv_path = tmp_path / "bound.csv"
        write_bound_csv(csv_path)
        out1, out2 = tmp_path / "a.png", tmp_path / "b.png"
        render(FigureSpec(str(csv_path), "security_bound", str(out1)))
        render(FigureSpec(str(csv_path), "security_bound", str(out2)))
        assert out1.read_bytes() == out2.read_bytes()

    def test_svg_byte_identical(self, tmp_path):
        csv_path = tmp_path / "bound.csv"
        write_bound_csv(csv_path)
        out1, out2 = tmp_path / "a.svg", tmp_path / "b.svg"
        render(FigureSpec(str(csv_path), "security_bound", str(out1)))
        render(FigureSpec(str(csv_path), "security_bound", str(out2)))
        assert out1.read_bytes() == out2.read_bytes()


class TestSweepFigures:
    @pytest.mark.parametrize("kind", ["ws_vs_nrh", "actions_vs_nrh",
                                      "energy_vs_nrh", "unfairness_vs_nrh",
                                      "latency_percentiles"])
    def test_kinds_render(self, tmp_path, kind):
        csv_path = tmp_path / "sweep.csv"
        write_sweep_csv(csv_path)
        out = tmp_path / f"{kind}.png"
        render(FigureSpec(str(csv_path), kind, str(out)))
        assert out.stat().st_size > 0

    def test_single_row_no_crash(self, tmp_path):
        csv_path = tmp_path / "one.csv"
        with open(csv_path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["mechanism", "nrh", "mix", "throttler", "status", "ws_normalized"])
            w.writerow(["para", 1024, "mix0", "off", "ok", 0.8])
        out = tmp_path / "one.png"
        render(FigureSpec(str(csv_path), "ws_vs_nrh", str(out)))
        assert out.exists()

    def test_missing_column_named_error(self, tmp_path):
        csv_path = tmp_path / "bad.csv"
        with open(csv_path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["mechanism", "mix", "throttler", "status"])
            w.writerow(["para", "mix0", "off", "ok"])
        with pytest.raises(FigureError, match="nrh"):
            render(FigureSpec(str(csv_path), "ws_vs_nrh", str(tmp_path / "x.png")))

    def test_input_not_mutated(self, tmp_path):
        csv_path = tmp_path / "sweep.csv"
        write_sweep_csv(csv_path)
        before = csv_path.read_bytes()
        render(FigureSpec(str(csv_path), "ws_vs_nrh", str(tmp_path / "f.png")))
        assert csv_path.read_bytes() == before

    def test_unknown_kind_rejected(self, tmp_path):
        with pytest.raises(FigureError):
            FigureSpec("x.csv", "pie_chart", "x.png")


class TestEndToEndWithSimulatorCsv:
    def test_bound_csv_from_primary_cli(self, tmp_path):
        """Consume the primary component's actual analyze-security output."""
        env = dict(os.environ)
        primary_src = os.path.abspath(os.path.join(os.path.dirname(__file__),
                                                   "..", "..", "src"))
        env["PYTHONPATH"] = primary_src + os.pathsep + env.get("PYTHONPATH", "")
        csv_path = tmp_path / "bound.csv"
        ret = subprocess.run([sys.executable, "-m", "hammersim.cli",
                              "analyze-security", "-o", str(csv_path),
                              "--th-outlier", "0.65"],
                             capture_output=True, text=True, env=env)
        assert ret.returncode == 0, ret.stderr
        out = tmp_path / "bound.png"
        render(FigureSpec(str(csv_path), "security_bound", str(out)))
        assert out.stat().st_size > 0
