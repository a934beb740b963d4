"""Flash medium model: channel bus arbitration, transaction legality,
FLP classification and the command/cell/transfer timing of one
transaction.

Timing sequences (all per ONFI-style single-channel chips):

* read: per-member command+address slots up front (one bus grant), one
  cell interval per die (plane-shared members share it), then one data-out
  transfer slot per member after its die's cell completes.
* program: per-member command + data-in slot first, then one cell
  interval per die; fast/slow program time selected by page parity.
* erase: one command slot, one cell interval per die, no data.

Dies of one chip operate concurrently; the chip is busy (R/B low) from
its first bus cycle to the last cell/transfer completion.
"""

from __future__ import annotations

from bisect import bisect_right, insort
from enum import IntEnum

from .geom import Geometry, TimingParams

READ, PROGRAM, ERASE = 0, 1, 2
KIND_NAMES = {READ: "read", PROGRAM: "program", ERASE: "erase"}


class FlpClass(IntEnum):
    NON_PAL = 0
    PAL1 = 1   # plane sharing only (single die, >= 2 planes)
    PAL2 = 2   # die interleaving only (>= 2 dies, one request each)
    PAL3 = 3   # die interleaving + plane sharing combined


class ChannelBus:
    """Interval-booked shared data path of one channel.

    ``reserve`` grants the earliest interval at or after the requested
    start that does not overlap any previous grant (gaps between existing
    grants are usable). Grants are remembered; the caller accounts the
    wait (granted start - requested start) as bus contention.
    """

    __slots__ = ("starts", "ends")

    def __init__(self):
        self.starts = []
        self.ends = []

    def reserve(self, start: float, duration: float) -> float:
        if duration <= 0:
            raise ValueError("bus reservation needs a positive duration")
        starts, ends = self.starts, self.ends
        n = len(starts)
        if not n or start >= ends[-1]:
            starts.append(start)
            ends.append(start + duration)
            return start
        i = bisect_right(starts, start)
        # candidate gap begins after the previous grant ends
        t = start if i == 0 else max(start, ends[i - 1])
        while i < n and starts[i] - t < duration:
            t = ends[i]
            i += 1
        starts.insert(i, t)
        ends.insert(i, t + duration)
        return t

    def prune(self, now: float) -> None:
        """Drop grants ending at or before ``now`` (no future request can
        start earlier than the simulation clock)."""
        i = bisect_right(self.ends, now)
        if i:
            del self.starts[:i]
            del self.ends[:i]

    def overlaps(self) -> bool:
        return any(self.ends[i] > self.starts[i + 1] + 1e-12
                   for i in range(len(self.starts) - 1))


def check_plane_share_legal(reqs, geometry: Geometry) -> bool:
    """True iff the requests may share one multi-plane cell operation:
    same page offset within their blocks, pairwise-distinct planes, at
    most planes_per_die members. Caller must pass requests of one chip
    and one die (spanning chips is a caller bug)."""
    if not reqs:
        return False
    chip = reqs[0].chip_id
    die = reqs[0].die
    for r in reqs:
        if r.chip_id != chip:
            raise ValueError("plane-share check spans multiple chips")
        if r.die != die:
            return False
    if len(reqs) > geometry.planes_per_die:
        return False
    pgoff = reqs[0].pgoff
    planes = set()
    for r in reqs:
        if r.pgoff != pgoff or r.plane in planes:
            return False
        planes.add(r.plane)
    return True


def classify_flp(members, geometry: Geometry) -> FlpClass:
    """FLP class of a legal member set (error if any die group is not
    plane-share legal; the caller must split such sets first)."""
    if not members:
        raise ValueError("empty transaction")
    by_die = {}
    for m in members:
        by_die.setdefault(m.die, []).append(m)
    for group in by_die.values():
        if len(group) > 1 and not check_plane_share_legal(group, geometry):
            raise ValueError("illegal die group in transaction")
    if len(members) == 1:
        return FlpClass.NON_PAL
    if len(by_die) == 1:
        return FlpClass.PAL1
    if any(len(g) > 1 for g in by_die.values()):
        return FlpClass.PAL3
    return FlpClass.PAL2


class FlashTransaction:
    """A coalesced batch executed on one chip under one timing sequence."""

    __slots__ = ("txn_id", "chip_id", "kind", "members", "flp_class",
                 "composed_at", "bus_start", "cell_start", "cell_end",
                 "completed_at", "bus_active", "bus_contention",
                 "cell_sum", "die_count")

    def __init__(self, txn_id, chip_id, kind, members, flp_class, composed_at):
        self.txn_id = txn_id
        self.chip_id = chip_id
        self.kind = kind
        self.members = members
        self.flp_class = flp_class
        self.composed_at = composed_at
        self.bus_start = 0.0
        self.cell_start = 0.0
        self.cell_end = 0.0      # end of the latest die's cell interval
        self.completed_at = 0.0
        self.bus_active = 0.0    # sum of this txn's bus grant durations
        self.bus_contention = 0.0  # sum of request-to-grant waits
        self.cell_sum = 0.0      # sum over dies of one cell interval each
        self.die_count = 0

    @property
    def busy_duration(self):
        return self.completed_at - self.bus_start

    @property
    def cell_union(self):
        """Wall-clock cell occupancy (die intervals share one start)."""
        return self.cell_end - self.cell_start


def plan_transaction(txn: FlashTransaction, bus: ChannelBus,
                     timing: TimingParams, now: float) -> None:
    """Book bus slots and cell intervals for ``txn`` starting at ``now``;
    fills the transaction timestamps and writes each member's completion
    time into ``member.complete_t``. Deterministic for a given state."""
    members = txn.members
    cmd = timing.command_overhead_time
    xfer = timing.bus_transfer_time_per_page
    by_die = {}
    for m in members:
        by_die.setdefault(m.die, []).append(m)
    txn.die_count = len(by_die)

    if txn.kind == READ:
        want = now
        cmd_dur = cmd * len(members)
        s0 = bus.reserve(want, cmd_dur)
        txn.bus_start = s0
        txn.bus_active = cmd_dur
        txn.bus_contention = s0 - want
        cell_s = s0 + cmd_dur
        cell_e = cell_s + timing.read_cell_time
        txn.cell_start, txn.cell_end = cell_s, cell_e
        txn.cell_sum = timing.read_cell_time * txn.die_count
        done = cell_e
        for die in sorted(by_die):
            for m in sorted(by_die[die], key=lambda r: r.plane):
                s = bus.reserve(cell_e, xfer)
                txn.bus_active += xfer
                txn.bus_contention += s - cell_e
                m.complete_t = s + xfer
                if m.complete_t > done:
                    done = m.complete_t
        txn.completed_at = done

    elif txn.kind == PROGRAM:
        want = now
        first = None
        end_in = now
        for die in sorted(by_die):
            for m in sorted(by_die[die], key=lambda r: r.plane):
                s = bus.reserve(want, cmd + xfer)
                if first is None:
                    first = s
                txn.bus_contention += s - want
                txn.bus_active += cmd + xfer
                end_in = s + cmd + xfer
                want = end_in
        txn.bus_start = first
        txn.cell_start = end_in
        done = end_in
        for die, group in by_die.items():
            dur = timing.program_cell_time(group[0].pgoff)
            txn.cell_sum += dur
            e = end_in + dur
            for m in group:
                m.complete_t = e
            if e > done:
                done = e
        txn.cell_end = done
        txn.completed_at = done

    else:  # ERASE
        s0 = bus.reserve(now, cmd)
        txn.bus_start = s0
        txn.bus_active = cmd
        txn.bus_contention = s0 - now
        cell_s = s0 + cmd
        e = cell_s + timing.erase_cell_time
        txn.cell_start, txn.cell_end = cell_s, e
        txn.cell_sum = timing.erase_cell_time * txn.die_count
        for m in members:
            m.complete_t = e
        txn.completed_at = e
