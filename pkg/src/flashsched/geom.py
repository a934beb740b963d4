"""Device geometry, physical addressing and flash timing parameters.

All times are microseconds (floats). Chips are identified by a flat
``chip_id`` with the channel varying fastest::

    chip_id = chip_offset * num_channels + channel

so ascending chip ids walk chips of equal offset across all channels
before moving to the next offset (the commit traversal several
schedulers rely on), and chips sharing a channel are ``chip_id % C``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple


class PhysicalAddress(NamedTuple):
    """One flash page: (channel, chip, die, plane, block, page)."""

    channel: int
    chip: int
    die: int
    plane: int
    block: int
    page: int


@dataclass(frozen=True)
class Geometry:
    num_channels: int = 3
    chips_per_channel: int = 3
    dies_per_chip: int = 2
    planes_per_die: int = 4
    blocks_per_die: int = 8192
    pages_per_block: int = 128
    page_size: int = 2048

    def __post_init__(self):
        for name in ("num_channels", "chips_per_channel", "dies_per_chip",
                     "planes_per_die", "blocks_per_die", "pages_per_block",
                     "page_size"):
            if getattr(self, name) < 1:
                raise ValueError(f"geometry field {name} must be >= 1")
        if self.blocks_per_die % self.planes_per_die:
            raise ValueError("blocks_per_die must be divisible by planes_per_die")

    @property
    def num_chips(self) -> int:
        return self.num_channels * self.chips_per_channel

    @property
    def blocks_per_plane(self) -> int:
        return self.blocks_per_die // self.planes_per_die

    @property
    def pages_per_plane(self) -> int:
        return self.blocks_per_plane * self.pages_per_block

    @property
    def num_planes(self) -> int:
        return self.num_chips * self.dies_per_chip * self.planes_per_die

    @property
    def raw_pages(self) -> int:
        return self.num_planes * self.pages_per_plane

    def chip_id(self, channel: int, offset: int) -> int:
        return offset * self.num_channels + channel

    def channel_of(self, chip_id: int) -> int:
        return chip_id % self.num_channels

    def plane_id(self, chip_id: int, die: int, plane: int) -> int:
        return (chip_id * self.dies_per_chip + die) * self.planes_per_die + plane

    def pack(self, chip_id: int, die: int, plane: int, block: int, page: int) -> int:
        """Encode a page coordinate as one int (fast map key)."""
        pid = self.plane_id(chip_id, die, plane)
        return (pid * self.blocks_per_plane + block) * self.pages_per_block + page

    def unpack(self, key: int) -> PhysicalAddress:
        page = key % self.pages_per_block
        rest = key // self.pages_per_block
        block = rest % self.blocks_per_plane
        pid = rest // self.blocks_per_plane
        plane = pid % self.planes_per_die
        pid //= self.planes_per_die
        die = pid % self.dies_per_chip
        chip_id = pid // self.dies_per_chip
        return PhysicalAddress(self.channel_of(chip_id), chip_id // self.num_channels,
                               die, plane, block, page)

    def validate_address(self, addr: PhysicalAddress) -> None:
        bounds = (self.num_channels, self.chips_per_channel, self.dies_per_chip,
                  self.planes_per_die, self.blocks_per_plane, self.pages_per_block)
        for value, bound in zip(addr, bounds):
            if not 0 <= value < bound:
                raise ValueError(f"address {addr} outside geometry")


# ONFI 2.x class transfer rate: 166 MT/s, 8-bit bus -> 166 MB/s.
DEFAULT_BUS_RATE_MB_S = 166.0


def page_transfer_time(page_size: int, bus_rate_mb_s: float = DEFAULT_BUS_RATE_MB_S) -> float:
    """Microseconds to move one page over the channel at the given rate."""
    return page_size / bus_rate_mb_s


@dataclass(frozen=True)
class TimingParams:
    read_cell_time: float = 20.0
    program_cell_time_fast: float = 200.0
    program_cell_time_slow: float = 2200.0
    erase_cell_time: float = 1500.0
    bus_transfer_time_per_page: float = field(default=page_transfer_time(2048))
    command_overhead_time: float = 0.2
    txn_decision_window: float = 1.0

    def __post_init__(self):
        for name in ("read_cell_time", "program_cell_time_fast",
                     "program_cell_time_slow", "erase_cell_time",
                     "bus_transfer_time_per_page", "command_overhead_time",
                     "txn_decision_window"):
            if getattr(self, name) <= 0:
                raise ValueError(f"timing field {name} must be > 0")

    def program_cell_time(self, page: int) -> float:
        """Fast/slow program latency by page-address parity (even = fast)."""
        return self.program_cell_time_fast if page % 2 == 0 else self.program_cell_time_slow
