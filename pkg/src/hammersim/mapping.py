"""Physical-address-to-DRAM-location mapping.

A mapping is an ordered list of (field, width) slices consuming address bits
from LSB to MSB. The default interleaves consecutive 4-cache-block chunks
across bank groups (MOP style) so streaming accesses spread over banks while
neighboring blocks share a row.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .dram import DeviceGeometry, DramAddress

FIELDS = ("offset", "column", "bankgroup", "bank", "rank", "channel", "row")


@dataclass(frozen=True)
class AddressMapping:
    slices: tuple[tuple[str, int], ...]

    def __post_init__(self):
        seen_widths: dict[str, int] = {}
        for name, width in self.slices:
            if name not in FIELDS:
                raise ValueError(f"unknown address field {name!r}")
            if width < 0:
                raise ValueError("slice widths must be non-negative")
            seen_widths[name] = seen_widths.get(name, 0) + width
        self.__dict__["_widths"] = seen_widths

    @property
    def total_bits(self) -> int:
        return sum(w for _, w in self.slices)

    def decode(self, physical_address: int) -> DramAddress:
        vals = {name: 0 for name in FIELDS}
        shift_in = {name: 0 for name in FIELDS}
        bits = physical_address
        for name, width in self.slices:
            vals[name] |= (bits & ((1 << width) - 1)) << shift_in[name]
            shift_in[name] += width
            bits >>= width
        return DramAddress(
            channel=vals["channel"],
            rank=vals["rank"],
            bankgroup=vals["bankgroup"],
            bank=vals["bank"],
            row=vals["row"],
            column=vals["column"],
        )

    def encode(self, addr: DramAddress) -> int:
        vals = {
            "channel": addr.channel,
            "rank": addr.rank,
            "bankgroup": addr.bankgroup,
            "bank": addr.bank,
            "row": addr.row,
            "column": addr.column,
            "offset": 0,
        }
        remaining = dict(vals)
        out = 0
        shift = 0
        for name, width in self.slices:
            out |= (remaining[name] & ((1 << width) - 1)) << shift
            remaining[name] >>= width
            shift += width
        return out


def _log2_exact(n: int, what: str) -> int:
    bits = int(math.log2(n))
    if 1 << bits != n:
        raise ValueError(f"{what} must be a power of two for bit-sliced mapping, got {n}")
    return bits


def mop_mapping(geometry: DeviceGeometry, blocks_per_chunk: int = 4) -> AddressMapping:
    """Default layout: offset | low column (chunk) | bg | bank | rank | channel | rest of column | row."""
    off_bits = _log2_exact(geometry.bytes_per_column, "bytes_per_column")
    col_bits = _log2_exact(geometry.columns_per_row, "columns_per_row")
    chunk_bits = min(col_bits, _log2_exact(blocks_per_chunk, "blocks_per_chunk"))
    slices = [
        ("offset", off_bits),
        ("column", chunk_bits),
        ("bankgroup", _log2_exact(geometry.bankgroups_per_rank, "bankgroups_per_rank")),
        ("bank", _log2_exact(geometry.banks_per_bankgroup, "banks_per_bankgroup")),
        ("rank", _log2_exact(geometry.ranks_per_channel, "ranks_per_channel")),
        ("channel", _log2_exact(geometry.channels, "channels")),
        ("column", col_bits - chunk_bits),
        ("row", _log2_exact(geometry.rows_per_bank, "rows_per_bank")),
    ]
    return AddressMapping(tuple(s for s in slices if s[1] > 0))


def parse_mapping(spec: str) -> AddressMapping:
    """Parse "offset:6 column:2 bankgroup:3 ..." (LSB first) into a mapping."""
    slices = []
    for token in spec.split():
        name, _, width = token.partition(":")
        if not width:
            raise ValueError(f"bad mapping token {token!r}, expected field:width")
        slices.append((name, int(width)))
    return AddressMapping(tuple(slices))


def mapping_to_spec(mapping: AddressMapping) -> str:
    return " ".join(f"{name}:{width}" for name, width in mapping.slices)
