from __future__ import annotations

import math
import random

import pytest

from hammersim.metrics import (
    EnergyModel, StatsReport, latency_percentiles, max_slowdown, weighted_speedup,
)


class TestWeightedSpeedup:
    def test_identity(self):
        assert weighted_speedup([1.0] * 4, [1.0] * 4) == pytest.approx(4.0)

    def test_halved(self):
        assert weighted_speedup([0.5, 1.0, 1.5, 2.0], [1.0, 2.0, 3.0, 4.0]) == pytest.approx(2.0)

    def test_matches_manual_recomputation(self):
        rng = random.Random(1)
        for _ in range(3):
            shared = [rng.uniform(0.1, 3) for _ in range(5)]
            alone = [rng.uniform(0.5, 4) for _ in range(5)]
            expected = 0.0
            for s, a in zip(shared, alone):
                expected += s / a
            assert weighted_speedup(shared, alone) == pytest.approx(expected)

    def test_zero_alone_rejected(self):
        with pytest.raises(ValueError):
            weighted_speedup([1.0], [0.0])


class TestMaxSlowdown:
    def test_identity(self):
        assert max_slowdown([1.0, 2.0], [1.0, 2.0]) == pytest.approx(1.0)

    def test_one_thread_halved(self):
        assert max_slowdown([0.5, 2.0], [1.0, 2.0]) == pytest.approx(2.0)

    def test_matches_brute_force(self):
        rng = random.Random(2)
        for _ in range(3):
            shared = [rng.uniform(0.1, 3) for _ in range(6)]
            alone = [rng.uniform(0.5, 4) for _ in range(6)]
            expected = max(a / s for s, a in zip(shared, alone))
            assert max_slowdown(shared, alone) == pytest.approx(expected)

    def test_starved_thread_is_infinite(self):
        assert math.isinf(max_slowdown([0.0, 1.0], [1.0, 1.0]))


class TestPercentiles:
    def test_nearest_rank_four_values(self):
        # nearest rank: ceil(0.5 * 4) = 2nd smallest
        assert latency_percentiles([10, 20, 30, 40], [50.0]) == [20]

    def test_single_element(self):
        assert latency_percentiles([7], [1.0, 50.0, 99.0]) == [7, 7, 7]

    def test_constant_list(self):
        assert latency_percentiles([5] * 100, [10.0, 90.0]) == [5, 5]

    def test_hand_checked_p90(self):
        data = list(range(1, 11))  # 1..10, ceil(0.9*10)=9 -> value 9
        assert latency_percentiles(data, [90.0]) == [9]

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            latency_percentiles([], [50.0])


class TestEnergy:
    def test_background_only(self):
        model = EnergyModel()
        # 1e6 cycles at 1 ns, 2 ranks, 50 mW/rank -> 50e-3 * 1e-3 s * 2 = 1e-4 J
        e = model.total_energy_joules({}, 1_000_000, 1.0, 2)
        assert e == pytest.approx(50e-3 * 1e-3 * 2)

    def test_one_act_adds_act_energy(self):
        model = EnergyModel()
        base = model.total_energy_joules({}, 1000, 1.0, 1)
        plus = model.total_energy_joules({"ACT": 1}, 1000, 1.0, 1)
        assert plus - base == pytest.approx(model.act_pre_pj * 1e-12)

    def test_matches_brute_force_sum(self):
        rng = random.Random(3)
        model = EnergyModel()
        counts = {k: rng.randrange(1000) for k in ("ACT", "RD", "WR", "REF", "RFM", "vrr_victims")}
        expected_pj = (counts["ACT"] * model.act_pre_pj + counts["RD"] * model.rd_pj
                       + counts["WR"] * model.wr_pj + counts["REF"] * model.ref_pj
                       + counts["RFM"] * model.rfm_pj
                       + counts["vrr_victims"] * model.vrr_victim_pj)
        assert model.command_energy_pj(counts) == pytest.approx(expected_pj)

    def test_additivity(self):
        model = EnergyModel()
        a = {"ACT": 10, "RD": 5}
        b = {"ACT": 3, "REF": 2}
        merged = {"ACT": 13, "RD": 5, "REF": 2}
        ea = model.total_energy_joules(a, 500, 1.0, 1)
        eb = model.total_energy_joules(b, 700, 1.0, 1)
        emerged = model.total_energy_joules(merged, 1200, 1.0, 1)
        assert emerged == pytest.approx(ea + eb)

    def test_negative_constant_rejected(self):
        with pytest.raises(ValueError):
            EnergyModel(rd_pj=-1.0)


def test_report_serialization_is_deterministic():
    report = StatsReport(
        config={"a": 1}, seeds={"mitigation": 1}, cycles=100, warmup_cycles=10,
        ipc_shared=[1.0], ipc_alone=[1.0], benign_threads=[0],
        weighted_speedup=1.0, max_slowdown=1.0, action_counts={"rfm": 2},
        command_counts={"ACT": 5}, suspects_marked=[False], total_marks=0,
        latency_percentiles_ns={"p50": 30.0}, energy_total_j=1e-6,
        energy_benign_j=1e-6, oracle_peak_damage=3, rbmpki=[1.5])
    assert report.to_json() == report.to_json()
    text = report.to_text()
    assert "weighted_speedup = 1.0" in text
    assert text == report.to_text()
