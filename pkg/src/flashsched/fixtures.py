"""Frozen desk-scale worked examples on a 9-chip, 3-channel device.

Two sibling fixtures share the 5-I/O schema:

* ``fig45`` - 19 memory requests; reproduces the inter-chip idle-slot
  counts of the FIFO and physical-address schedulers (20 vs 15), the
  five-chip first stall (C4..C8) and the exact 3-chip collision between
  I/Os #1 and #2.
* ``fig78`` - 18 memory requests, all reads; reproduces the offset-major
  commitment rounds (6, 8 and 4 requests) and the four-request PAL3
  coalescing on chip C3 from I/Os #1, #2, #4 and #5.

Each fixture pins where every virtual page must live. Because first-write
allocation stripes a global cursor over (channel, chip, die, plane), any
layout is constructible by writing pages in cursor order with dummy
filler writes burning the unused slots; ``precondition_records`` emits
exactly that stream.
"""

from __future__ import annotations

from .geom import Geometry, TimingParams, page_transfer_time
from .workload import TraceRecord, WRITE

PAGE = 2048

FIXTURE_GEOMETRY = Geometry(num_channels=3, chips_per_channel=3,
                            dies_per_chip=2, planes_per_die=4,
                            blocks_per_die=16, pages_per_block=32,
                            page_size=PAGE)

# near-zero bus overheads keep the service slots of the worked examples
# clean; cell latencies are the evaluation defaults
FIXTURE_TIMING = TimingParams(read_cell_time=20.0,
                              program_cell_time_fast=200.0,
                              program_cell_time_slow=2200.0,
                              erase_cell_time=1500.0,
                              bus_transfer_time_per_page=page_transfer_time(PAGE, 10240.0),
                              command_overhead_time=0.01,
                              txn_decision_window=0.05)

FIXTURE_QUEUE_DEPTH = 8
FIXTURE_SNAPSHOT_EPS = 2.0

# (vpage, chip_id, die, plane); chips are offset * 3 + channel
_FIG45_PLACEMENTS = [
    (0, 0, 0, 0), (1, 1, 0, 0), (2, 2, 0, 0), (3, 3, 0, 0), (4, 3, 1, 0),
    (5, 0, 1, 0), (6, 1, 1, 0), (7, 2, 1, 0), (8, 4, 1, 0),
    (9, 4, 0, 0), (10, 5, 0, 0), (11, 6, 0, 0), (12, 7, 0, 0), (13, 8, 0, 0),
    (14, 3, 0, 1), (15, 8, 1, 0), (16, 4, 0, 1),
    (17, 4, 1, 1), (18, 5, 1, 0),
]
# (kind, first vpage, page count): five back-to-back I/Os
_FIG45_IOS = [
    ("read", 0, 5),    # C0 C1 C2 C3(d0+d1)
    ("read", 5, 4),    # C0 C1 C2 C4     - collides with #1 on exactly C0..C2
    ("write", 9, 5),   # C4..C8          - runs with #1 under out-of-order PAS
    ("read", 14, 3),   # C3 C8 C4
    ("read", 17, 2),   # C4 C5
]

_FIG78_PLACEMENTS = [
    (0, 0, 0, 0), (1, 1, 0, 0), (2, 2, 0, 0), (3, 3, 0, 0),
    (4, 0, 1, 0), (5, 1, 1, 0), (6, 2, 1, 0), (7, 3, 1, 0),
    (8, 4, 0, 0), (9, 4, 1, 0), (10, 5, 0, 0), (11, 5, 1, 0),
    (12, 3, 0, 1), (13, 6, 0, 0), (14, 7, 0, 0),
    (15, 3, 1, 1), (16, 8, 0, 0), (17, 6, 1, 0),
]
_FIG78_IOS = [
    ("read", 0, 4),    # C0 C1 C2 C3
    ("read", 4, 4),    # C0 C1 C2 C3 (second die)
    ("read", 8, 4),    # C4 C4 C5 C5 (die pairs)
    ("read", 12, 3),   # C3 C6 C7
    ("read", 15, 3),   # C3 C8 C6
]

# expected spk3 commitment on fig78: one cascade, offset-major chip order,
# C3 over-committed as a single four-request batch
FIG78_EXPECTED_COMMITS = [
    (0, [0, 4]), (1, [1, 5]), (2, [2, 6]),
    (3, [3, 12, 7, 15]), (4, [8, 9]), (5, [10, 11]),
    (6, [13, 17]), (7, [14]), (8, [16]),
]

FIG45_VAS_IDLE_SLOTS = 20
FIG45_PAS_IDLE_SLOTS = 15
FIG45_VAS_FIRST_STALL_IDLE = frozenset({4, 5, 6, 7, 8})

_DUMMY_BASE = 200


def _position(geom: Geometry, chip: int, die: int, plane: int) -> int:
    return (plane * geom.dies_per_chip + die) * geom.num_chips + chip


def precondition_records(placements, geom: Geometry = FIXTURE_GEOMETRY):
    """Write stream that lands every placement on its pinned resource:
    pages are written in allocation-cursor order with dummy pages burning
    the cursor positions no placement uses."""
    by_pos = {}
    for vpage, chip, die, plane in placements:
        pos = _position(geom, chip, die, plane)
        if pos in by_pos:
            raise ValueError(f"two placements share cursor position {pos}")
        by_pos[pos] = vpage
    records = []
    dummy = _DUMMY_BASE
    for pos in range(max(by_pos) + 1):
        vpage = by_pos.get(pos)
        if vpage is None:
            vpage = dummy
            dummy += 1
        records.append(TraceRecord(0.0, WRITE, vpage * PAGE, PAGE))
    return records


def measured_records(ios):
    return [TraceRecord(0.0, kind, first * PAGE, count * PAGE)
            for kind, first, count in ios]


def verify_layout(ftl, placements) -> None:
    """Assert the preconditioned mapping matches the pinned layout."""
    for vpage, chip, die, plane in placements:
        packed = ftl.vmap.get(vpage)
        if packed is None:
            raise AssertionError(f"fixture vpage {vpage} is unmapped")
        got = ftl.resource_tuple(packed)
        if got != (chip, die, plane):
            raise AssertionError(
                f"vpage {vpage} landed on {got}, wanted {(chip, die, plane)}")


FIXTURES = {
    "fig45": {"placements": _FIG45_PLACEMENTS, "ios": _FIG45_IOS},
    "fig78": {"placements": _FIG78_PLACEMENTS, "ios": _FIG78_IOS},
}


def fixture_names():
    return sorted(FIXTURES)


def build(name: str):
    """(geometry, timing, precondition records, measured records,
    placements) for one builtin fixture."""
    try:
        fx = FIXTURES[name]
    except KeyError:
        raise ValueError(f"unknown builtin fixture {name!r}; "
                         f"have {', '.join(fixture_names())}") from None
    return (FIXTURE_GEOMETRY, FIXTURE_TIMING,
            precondition_records(fx["placements"]),
            measured_records(fx["ios"]),
            fx["placements"])
