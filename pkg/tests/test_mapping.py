from __future__ import annotations

import random

import pytest

from conftest import desk_geometry
from hammersim.dram import DeviceGeometry, DramAddress
from hammersim.mapping import AddressMapping, mapping_to_spec, mop_mapping, parse_mapping


def test_roundtrip_default_mop(geometry):
    mapping = mop_mapping(geometry)
    rng = random.Random(7)
    total_bits = mapping.total_bits
    for _ in range(2000):
        phys = rng.randrange(1 << total_bits) & ~0x3F
        addr = mapping.decode(phys)
        assert mapping.encode(addr) == phys


def test_roundtrip_full_scale_geometry():
    geometry = DeviceGeometry()
    mapping = mop_mapping(geometry)
    rng = random.Random(11)
    for _ in range(2000):
        addr = DramAddress(0, rng.randrange(2), rng.randrange(8), rng.randrange(2),
                           rng.randrange(65536), rng.randrange(128))
        assert mapping.decode(mapping.encode(addr)) == addr


def test_mop_interleaves_chunks_over_bankgroups(geometry):
    # consecutive 4-block chunks land on consecutive bank groups within a row span
    mapping = mop_mapping(geometry, blocks_per_chunk=4)
    a0 = mapping.decode(0)
    a_next_chunk = mapping.decode(4 * 64)
    assert a0.bankgroup == 0 and a_next_chunk.bankgroup == 1
    # blocks within a chunk share row and bank
    a_block1 = mapping.decode(64)
    assert (a_block1.row, a_block1.bankgroup, a_block1.bank) == (a0.row, a0.bankgroup, a0.bank)
    assert a_block1.column == a0.column + 1


def test_parse_and_spec_roundtrip():
    spec = "offset:6 column:2 bankgroup:2 bank:1 column:4 row:12"
    mapping = parse_mapping(spec)
    assert mapping_to_spec(mapping) == spec
    phys = 0b1011_0101_0011_0110_1100_0000
    assert mapping.encode(mapping.decode(phys)) == phys


def test_bad_mapping_rejected():
    with pytest.raises(ValueError):
        parse_mapping("offset:6 nonsense:3")
    with pytest.raises(ValueError):
        parse_mapping("offset six")
