"""Closed-form attack bound: anchor values, algebraic identity, pole, sweep."""

from __future__ import annotations

import csv
import math

import pytest

from hammersim.security import BoundQuery, max_attack_ratio, sweep, write_sweep_csv


class TestAnchorValues:
    def test_half_threads_at_065(self):
        assert max_attack_ratio(BoundQuery(0.5, 0.65)) == pytest.approx(4.71, abs=0.01)

    def test_ninety_percent_at_005(self):
        assert max_attack_ratio(BoundQuery(0.9, 0.05)) == pytest.approx(1.90, abs=0.01)

    def test_lone_attacker_is_one_plus_t(self):
        for t in (0.0, 0.05, 0.65, 2.0):
            assert max_attack_ratio(BoundQuery(0.0, t)) == pytest.approx(1 + t)

    def test_pole_is_unbounded(self):
        assert math.isinf(max_attack_ratio(BoundQuery(0.5, 1.0)))
        assert math.isinf(max_attack_ratio(BoundQuery(0.8, 0.65)))


class TestAlgebra:
    def test_closed_form_satisfies_fixed_point(self):
        # ratio must satisfy r = (1+t) * (f*r + (1-f)) with benign average 1
        for f in (0.0, 0.1, 0.25, 0.5, 0.55):
            for t in (0.05, 0.2, 0.65):
                if (1 + t) * f >= 1:
                    continue
                r = max_attack_ratio(BoundQuery(f, t))
                assert abs(r - (1 + t) * (f * r + (1 - f))) < 1e-12

    def test_numeric_iteration_converges_to_closed_form(self):
        # derived check: iterate the fixed point directly
        f, t = 0.5, 0.65
        r = 1.0
        for _ in range(200):
            r = (1 + t) * (f * r + (1 - f))
        assert r == pytest.approx(max_attack_ratio(BoundQuery(f, t)), rel=1e-9)

    def test_iteration_diverges_at_pole(self):
        # at (1+t)*f == 1 each iteration adds (1+t)*(1-f): no finite fixed point
        f, t = 0.5, 1.0
        r = 1.0
        seen = []
        for _ in range(200):
            r = (1 + t) * (f * r + (1 - f))
            seen.append(r)
        assert seen[-1] - seen[-2] == pytest.approx((1 + t) * (1 - f))
        assert seen[-1] > 100
        # strictly beyond the pole the growth is geometric
        f = 0.8
        r = 1.0
        for _ in range(200):
            r = (1 + 0.65) * (f * r + (1 - f))
        assert r > 1e10

    def test_monotone_in_f_until_pole(self):
        t = 0.65
        prev = 0.0
        f = 0.0
        while (1 + t) * f < 1 - 1e-9:
            r = max_attack_ratio(BoundQuery(f, t))
            assert r > prev
            prev = r
            f += 0.01


class TestValidation:
    def test_bad_f_rejected(self):
        with pytest.raises(ValueError):
            BoundQuery(1.0, 0.65)
        with pytest.raises(ValueError):
            BoundQuery(-0.1, 0.65)

    def test_bad_outlier_rejected(self):
        with pytest.raises(ValueError):
            BoundQuery(0.5, -0.01)


class TestSweep:
    def test_rows_and_anchor(self):
        rows = sweep([0.65], [0.0, 0.5])
        assert len(rows) == 2
        assert rows[0][2] == pytest.approx(1.65)
        assert rows[1][2] == pytest.approx(4.714285, abs=1e-4)

    def test_csv_schema(self, tmp_path):
        path = tmp_path / "bound.csv"
        write_sweep_csv(str(path), [0.65], [i / 100 for i in range(100)])
        with open(path) as fh:
            reader = csv.DictReader(fh)
            assert reader.fieldnames == ["f_atk", "th_outlier", "ratio"]
            rows = list(reader)
        assert len(rows) == 100
        at_half = [r for r in rows if abs(float(r["f_atk"]) - 0.5) < 1e-9][0]
        assert float(at_half["ratio"]) == pytest.approx(4.71, abs=0.01)
        beyond_pole = [r for r in rows if float(r["f_atk"]) > 0.75]
        assert all(r["ratio"] == "inf" for r in beyond_pole)
