"""DRAM device: legality examples, oracle bookkeeping, refresh model, and the
randomized protocol property checked by the independent replayer."""

from __future__ import annotations

import random

import pytest

from conftest import desk_geometry, desk_timing
from hammersim.dram import (
    CMD_ACT, CMD_PRE, CMD_PREAB, CMD_RD, CMD_REF, CMD_RFM, CMD_VRR, CMD_WR,
    AddressRangeError, DramAddress, DramCommand, DramDevice, ProtocolViolation,
    SafetyOracle, TimingParams,
)
from hammersim.protocol_check import replay


def addr(rank=0, bg=0, bank=0, row=0, col=0):
    return DramAddress(0, rank, bg, bank, row, col)


def make_device(**kw):
    return DramDevice(desk_geometry(), desk_timing(), **kw)


class TestLegality:
    def test_act_to_open_bank_illegal(self, geometry, timing):
        device = make_device()
        device.issue(DramCommand(CMD_ACT, addr(row=5), 0), 0)
        assert not device.can_issue(DramCommand(CMD_ACT, addr(row=6), 100), 100)

    def test_fifth_act_within_tfaw_illegal(self):
        # 4 ACTs to different bank groups spaced at tRRD_S; the 5th must wait tFAW
        t = desk_timing(tFAW=24)
        device = DramDevice(desk_geometry(), t)
        now = 0
        for i in range(4):
            cmd = DramCommand(CMD_ACT, addr(bg=i, row=1), now)
            assert device.can_issue(cmd, now)
            device.issue(cmd, now)
            now += t.tRRD_S
        fifth = DramCommand(CMD_ACT, addr(bg=0, bank=1, row=1), now)
        assert not device.can_issue(fifth, now)
        ok_cycle = 0 + t.tFAW
        assert device.can_issue(DramCommand(CMD_ACT, addr(bg=0, bank=1, row=1), ok_cycle), ok_cycle)

    def test_act_act_same_bank_exactly_trc(self):
        # derived: legal exactly at t + tRC, illegal one cycle earlier
        device = make_device()
        t = desk_timing()
        device.issue(DramCommand(CMD_ACT, addr(row=1), 0), 0)
        device.issue(DramCommand(CMD_PRE, addr(row=1), t.tRAS), t.tRAS)
        early = DramCommand(CMD_ACT, addr(row=2), t.tRC - 1)
        assert not device.can_issue(early, t.tRC - 1)
        exact = DramCommand(CMD_ACT, addr(row=2), t.tRC)
        assert device.can_issue(exact, t.tRC)

    def test_rd_requires_matching_open_row(self):
        device = make_device()
        t = desk_timing()
        device.issue(DramCommand(CMD_ACT, addr(row=3), 0), 0)
        assert device.can_issue(DramCommand(CMD_RD, addr(row=3), t.tRCD), t.tRCD)
        assert not device.can_issue(DramCommand(CMD_RD, addr(row=4), t.tRCD), t.tRCD)

    def test_malformed_address_rejected(self):
        device = make_device()
        with pytest.raises(AddressRangeError):
            device.can_issue(DramCommand(CMD_ACT, addr(row=1 << 20), 0), 0)
        with pytest.raises(AddressRangeError):
            device.can_issue(DramCommand(CMD_RD, addr(bank=9), 0), 0)

    def test_illegal_issue_is_fatal(self):
        device = make_device()
        with pytest.raises(ProtocolViolation):
            device.issue(DramCommand(CMD_RD, addr(row=1), 0), 0)


class TestOracle:
    def test_blast_radius_one_increments_neighbors(self):
        device = make_device()
        device.issue(DramCommand(CMD_ACT, addr(row=100), 0), 0)
        assert device.oracle.damage[(0, 99)] == 1
        assert device.oracle.damage[(0, 101)] == 1
        assert (0, 100) not in device.oracle.damage

    def test_victim_refresh_resets_damage(self):
        device = make_device()
        t = desk_timing()
        now = 0
        for _ in range(3):
            device.issue(DramCommand(CMD_ACT, addr(row=100), now), now)
            now += t.tRAS
            device.issue(DramCommand(CMD_PRE, addr(row=100), now), now)
            now = now - t.tRAS + t.tRC
        victims = device.victim_rows_of(100)
        cmd = DramCommand(CMD_VRR, addr(row=100), now, victim_rows=victims)
        device.issue(cmd, now)
        assert (0, 99) not in device.oracle.damage
        assert (0, 101) not in device.oracle.damage

    def test_500_acts_damage_counting(self):
        oracle = SafetyOracle(desk_geometry(), blast_radius=1)
        for _ in range(500):
            oracle.on_activation(0, 7)
        assert oracle.damage[(0, 6)] == 500
        assert oracle.damage[(0, 8)] == 500
        loc, count = oracle.max_damage()
        assert count == 500 and loc in ((0, 6), (0, 8))

    def test_fresh_device_max_damage_zero(self):
        device = make_device()
        assert device.oracle.max_damage()[1] == 0

    def test_ref_sweep_resets_damage_span(self):
        device = make_device()
        group_rows = device.ref_group_rows
        # touch rows within the first REF group
        device.oracle.on_activation(0, 1)
        device.oracle.on_activation(0, 1)
        assert device.oracle.damage
        device.issue(DramCommand(CMD_REF, addr(), 0), 0)
        for (bank, row), _ in device.oracle.damage.items():
            assert row >= group_rows

    def test_peak_survives_refresh(self):
        device = make_device()
        device.oracle.on_activation(0, 50)
        device.oracle.refresh_row(0, 49)
        device.oracle.refresh_row(0, 51)
        assert device.oracle.max_damage()[1] == 0
        assert device.oracle.peak_damage()[1] == 1


class TestRefreshModel:
    def test_ref_group_rows_covers_bank(self):
        t = desk_timing()
        g = desk_geometry()
        slots = t.tREFW // t.tREFI
        assert slots * t.ref_group_rows(g) >= g.rows_per_bank

    def test_invalid_timing_rejected(self):
        with pytest.raises(ValueError):
            desk_timing(tRC=10)  # < tRAS + tRP
        with pytest.raises(ValueError):
            desk_timing(tFAW=8)  # < 4 * tRRD_S


def _random_legal_stream(seed: int, n_commands: int, with_priv: bool = True):
    """Drive the device with randomly chosen legal commands; return the log."""
    rng = random.Random(seed)
    geometry = desk_geometry()
    timing = desk_timing()
    device = DramDevice(geometry, timing, track_row_counters=with_priv)
    log = []
    now = 0
    n_banks = geometry.banks_per_channel
    while len(log) < n_commands:
        # enumerate a handful of candidate commands and pick one that is legal
        b = rng.randrange(n_banks)
        rank, bg, bank = geometry.unflatten_bank(b)
        open_row = device.banks[b].open_row
        kinds = []
        if open_row < 0:
            kinds = [CMD_ACT, CMD_ACT, CMD_ACT]
            if with_priv:
                kinds += [CMD_VRR, CMD_RFM]
        else:
            kinds = [CMD_RD, CMD_RD, CMD_WR, CMD_PRE]
        if rng.random() < 0.02:
            kinds.append(CMD_REF)
        if rng.random() < 0.02:
            kinds.append(CMD_PREAB)
        kind = rng.choice(kinds)
        row = open_row if open_row >= 0 and kind in (CMD_RD, CMD_WR) else rng.randrange(64)
        victims = device.victim_rows_of(row) if kind == CMD_VRR else ()
        cmd = DramCommand(kind, DramAddress(0, rank, bg, bank, row, 0), now, victim_rows=victims)
        if device.can_issue(cmd, now):
            issued = device.issue(cmd, now)
            n_victims = len(issued.victim_rows) if kind == CMD_VRR else 0
            log.append((now, kind, rank, bg, bank, row, n_victims))
            now += 1
        else:
            now += rng.randrange(1, 4)
    return log, geometry, timing


class TestProtocolProperty:
    def test_random_streams_pass_independent_replay(self):
        for seed in (1, 2, 3):
            log, geometry, timing = _random_legal_stream(seed, 4000)
            violations = replay(log, geometry, timing)
            assert violations == [], violations[:5]

    def test_checker_catches_planted_violations(self):
        geometry = desk_geometry()
        timing = desk_timing()
        # tRCD violation: RD right after ACT
        log = [(0, CMD_ACT, 0, 0, 0, 5, 0), (2, CMD_RD, 0, 0, 0, 5, 0)]
        assert any("tRCD" in v for v in replay(log, geometry, timing))
        # tRC violation: second ACT lands after tRAS+tRP but before a slacker tRC
        slack = desk_timing(tRC=40)
        log = [(0, CMD_ACT, 0, 0, 0, 5, 0), (slack.tRAS, CMD_PRE, 0, 0, 0, 5, 0),
               (slack.tRAS + slack.tRP, CMD_ACT, 0, 0, 0, 6, 0)]
        assert any("tRC" in v for v in replay(log, geometry, slack))
        # tFAW violation: 5 ACTs to distinct banks spaced at tRRD_S, tight window
        faw = desk_timing(tFAW=24)
        log = [(i * faw.tRRD_S, CMD_ACT, 0, i % 4, i // 4, 1, 0) for i in range(5)]
        assert any("tFAW" in v for v in replay(log, geometry, faw))
        # ACT to open bank
        log = [(0, CMD_ACT, 0, 0, 0, 1, 0), (timing.tRC, CMD_ACT, 0, 0, 0, 2, 0)]
        assert any("open bank" in v for v in replay(log, geometry, timing))
