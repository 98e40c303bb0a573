from __future__ import annotations

import os
import sys

import pytest

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from hammersim.dram import DeviceGeometry, TimingParams


def desk_geometry(**overrides) -> DeviceGeometry:
    base = dict(channels=1, ranks_per_channel=1, bankgroups_per_rank=4,
                banks_per_bankgroup=2, rows_per_bank=4096, columns_per_row=64,
                bytes_per_column=64)
    base.update(overrides)
    return DeviceGeometry(**base)


def desk_timing(**overrides) -> TimingParams:
    base = dict(clock_period_ns=1.0, tRCD=10, tRAS=24, tRP=10, tRC=34,
                tCCD_S=4, tCCD_L=6, tRRD_S=4, tRRD_L=6, tFAW=16, tWR=12,
                tRTP=6, tRFC=100, tREFI=2048, tREFW=131072, tRFM=136,
                tCL=12, tBL=4)
    base.update(overrides)
    return TimingParams(**base)


@pytest.fixture
def geometry():
    return desk_geometry()


@pytest.fixture
def timing():
    return desk_timing()
