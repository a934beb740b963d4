"""Pure page-level FTL: forward/reverse mapping, out-of-place allocation,
greedy garbage collection and the cross-resource readdressing split.

Allocation policy: first writes stripe a global round-robin cursor over
(channel -> chip -> die -> plane), so consecutive allocations land on
consecutive chips; overwrites reallocate within the page's current
(chip, die, plane); GC migrations rotate across the planes of the victim's
die and spill to the globally freest plane when that die is full.

Page lifecycle: free -> pending (allocated, data in flight) -> valid ->
invalid -> free (block erase). Host writes bind the mapping at allocation
time; only GC migrations linger in pending until their program lands.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

from .geom import Geometry, PhysicalAddress

FREE, VALID, INVALID, PENDING = 0, 1, 2, 3


class CapacityError(RuntimeError):
    """No free block and no reclaimable victim: the device is full."""


@dataclass(frozen=True)
class GcConfig:
    free_block_threshold: float = 0.05
    victim_policy: str = "greedy_max_invalid"
    precondition_fill: float = 0.95

    def __post_init__(self):
        if not 0 < self.free_block_threshold < 1:
            raise ValueError("free_block_threshold must be in (0, 1)")
        if not 0 <= self.precondition_fill <= 1:
            raise ValueError("precondition_fill must be in [0, 1]")
        if self.victim_policy != "greedy_max_invalid":
            raise ValueError(f"unknown victim policy {self.victim_policy!r}")


class _Plane:
    __slots__ = ("active_block", "next_page", "free_blocks", "page_state",
                 "valid_count", "invalid_count", "pending_count", "free_pages")

    def __init__(self, blocks_per_plane, pages_per_block):
        self.active_block = -1
        self.next_page = 0
        self.free_blocks = deque(range(blocks_per_plane))
        self.page_state = {}      # block -> bytearray, touched blocks only
        self.valid_count = {}
        self.invalid_count = {}
        self.pending_count = {}
        self.free_pages = blocks_per_plane * pages_per_block


class Ftl:
    def __init__(self, geometry: Geometry, gc_config: GcConfig | None = None,
                 export_fraction: float = 0.9):
        if not 0 < export_fraction <= 1:
            raise ValueError("export_fraction must be in (0, 1]")
        self.geom = geometry
        self.gc = gc_config or GcConfig()
        self.exported_pages = int(geometry.raw_pages * export_fraction)
        self.vmap = {}   # vpage -> packed physical address
        self.rmap = {}   # packed physical address -> vpage
        self.planes = [_Plane(geometry.blocks_per_plane, geometry.pages_per_block)
                       for _ in range(geometry.num_planes)]
        n_dies = geometry.num_chips * geometry.dies_per_chip
        self.free_blocks_per_die = [geometry.blocks_per_die] * n_dies
        self.cursor = 0
        self._mig_cursor = [0] * n_dies
        self.writes = 0
        self.migrated = 0

    # -- address helpers ---------------------------------------------------

    def die_index(self, chip_id: int, die: int) -> int:
        return chip_id * self.geom.dies_per_chip + die

    def _plane_of_pos(self, pos: int) -> int:
        g = self.geom
        per_plane = g.dies_per_chip * g.num_chips
        plane, rem = divmod(pos, per_plane)
        die, chip_id = divmod(rem, g.num_chips)
        return g.plane_id(chip_id, die, plane)

    def _block_of(self, packed: int):
        g = self.geom
        pg = packed % g.pages_per_block
        block_key = packed // g.pages_per_block
        pid, b = divmod(block_key, g.blocks_per_plane)
        return pid, b, pg

    # -- allocation --------------------------------------------------------

    def _take_page(self, pid: int):
        """Reserve the next page of a plane (state becomes pending)."""
        plane = self.planes[pid]
        if plane.active_block < 0:
            if not plane.free_blocks:
                return None
            b = plane.free_blocks.popleft()
            self.free_blocks_per_die[pid // self.geom.planes_per_die] -= 1
            plane.active_block = b
            plane.next_page = 0
            plane.page_state[b] = bytearray(self.geom.pages_per_block)
            plane.valid_count[b] = 0
            plane.invalid_count[b] = 0
            plane.pending_count[b] = 0
        b = plane.active_block
        pg = plane.next_page
        plane.next_page += 1
        if plane.next_page >= self.geom.pages_per_block:
            plane.active_block = -1
        plane.page_state[b][pg] = PENDING
        plane.pending_count[b] += 1
        plane.free_pages -= 1
        return ((pid * self.geom.blocks_per_plane + b)
                * self.geom.pages_per_block + pg)

    def _set_state(self, packed: int, new_state: int) -> None:
        pid, b, pg = self._block_of(packed)
        plane = self.planes[pid]
        state = plane.page_state[b]
        old = state[pg]
        state[pg] = new_state
        if old == VALID:
            plane.valid_count[b] -= 1
        elif old == PENDING:
            plane.pending_count[b] -= 1
        if new_state == VALID:
            plane.valid_count[b] += 1
        elif new_state == INVALID:
            plane.invalid_count[b] += 1

    def _bind(self, vpage: int, packed: int) -> None:
        old = self.vmap.get(vpage)
        if old is not None:
            self._set_state(old, INVALID)
            del self.rmap[old]
        self._set_state(packed, VALID)
        self.vmap[vpage] = packed
        self.rmap[packed] = vpage

    def allocate_write(self, vpage: int) -> int:
        """Physical target for (over)writing ``vpage``; updates both maps.
        Overwrites stay in the old page's plane while it has room."""
        if vpage >= self.exported_pages:
            raise ValueError("virtual page beyond exported capacity")
        old = self.vmap.get(vpage)
        if old is not None:
            pid, _, _ = self._block_of(old)
            packed = self._take_page(pid)
            if packed is None:
                packed = self._scan_alloc()
        else:
            packed = self._cursor_alloc()
        if packed is None:
            raise CapacityError("no free page anywhere")
        self._bind(vpage, packed)
        self.writes += 1
        return packed

    def _cursor_alloc(self):
        total = self.geom.num_planes
        for _ in range(total):
            pid = self._plane_of_pos(self.cursor)
            self.cursor = (self.cursor + 1) % total
            packed = self._take_page(pid)
            if packed is not None:
                return packed
        return None

    def _scan_alloc(self):
        best = -1
        best_free = 0
        for pid, plane in enumerate(self.planes):
            if plane.free_pages > best_free:
                best_free = plane.free_pages
                best = pid
        if best < 0:
            return None
        return self._take_page(best)

    def alloc_for_migration(self, chip_id: int, die: int):
        """GC relocation target (left pending until the program lands):
        round-robin over the die's planes, else the globally freest plane.
        This is what makes cross-resource migrations, and hence
        readdressing notifications, actually happen."""
        g = self.geom
        di = self.die_index(chip_id, die)
        for _ in range(g.planes_per_die):
            plane = self._mig_cursor[di] % g.planes_per_die
            self._mig_cursor[di] += 1
            packed = self._take_page(g.plane_id(chip_id, die, plane))
            if packed is not None:
                return packed
        return self._scan_alloc()

    # -- lookups -----------------------------------------------------------

    def translate_read(self, vpage: int):
        """Current location of ``vpage`` or None for never-written data
        (serviced as an all-zero page by the engine)."""
        if vpage >= self.exported_pages:
            raise ValueError("virtual page beyond exported capacity")
        return self.vmap.get(vpage)

    def address_of(self, packed: int) -> PhysicalAddress:
        return self.geom.unpack(packed)

    def resource_tuple(self, packed: int):
        """(chip_id, die, plane) of a packed address."""
        g = self.geom
        pid = packed // g.pages_per_block // g.blocks_per_plane
        return (pid // (g.dies_per_chip * g.planes_per_die),
                (pid // g.planes_per_die) % g.dies_per_chip,
                pid % g.planes_per_die)

    # -- garbage collection ------------------------------------------------

    def gc_needed(self, chip_id: int, die: int) -> bool:
        limit = self.gc.free_block_threshold * self.geom.blocks_per_die
        return self.free_blocks_per_die[self.die_index(chip_id, die)] < limit

    def pick_victim(self, chip_id: int, die: int):
        """(plane_id, block, valid_vpages) of the max-invalid closed block,
        ties to the lowest index; None if the die has nothing reclaimable.
        Blocks with in-flight migration targets are skipped."""
        g = self.geom
        best = None
        base_pid = self.die_index(chip_id, die) * g.planes_per_die
        for pid in range(base_pid, base_pid + g.planes_per_die):
            plane = self.planes[pid]
            for b, inv in plane.invalid_count.items():
                if inv <= 0 or b == plane.active_block or plane.pending_count[b]:
                    continue
                key = (-inv, pid, b)
                if best is None or key < best[0]:
                    best = (key, pid, b)
        if best is None:
            return None
        _, pid, b = best
        state = self.planes[pid].page_state[b]
        base = (pid * g.blocks_per_plane + b) * g.pages_per_block
        victims = [self.rmap[base + pg]
                   for pg in range(g.pages_per_block) if state[pg] == VALID]
        return pid, b, victims

    def erase_block(self, pid: int, block: int) -> None:
        plane = self.planes[pid]
        if plane.valid_count.get(block) or plane.pending_count.get(block):
            raise AssertionError("erasing a block with live or in-flight pages")
        freed = sum(1 for s in plane.page_state[block] if s != FREE)
        plane.free_pages += freed
        del plane.page_state[block]
        del plane.valid_count[block]
        del plane.invalid_count[block]
        del plane.pending_count[block]
        plane.free_blocks.append(block)
        self.free_blocks_per_die[pid // self.geom.planes_per_die] += 1

    def finish_migration(self, vpage: int, old_packed: int, new_packed: int) -> bool:
        """Commit one migrated page. Returns False when the host overwrote
        the page mid-flight (the fresh copy is stale and is discarded)."""
        if self.vmap.get(vpage) != old_packed:
            self._set_state(new_packed, INVALID)
            return False
        self._bind(vpage, new_packed)
        self.migrated += 1
        return True

    # -- integrity ---------------------------------------------------------

    def audit(self) -> None:
        """Full forward/reverse/state consistency check; raises on breakage."""
        g = self.geom
        for v, p in self.vmap.items():
            if self.rmap.get(p) != v:
                raise AssertionError(f"rmap mismatch for vpage {v}")
        for p, v in self.rmap.items():
            if self.vmap.get(v) != p:
                raise AssertionError(f"vmap mismatch for packed address {p}")
        for pid, plane in enumerate(self.planes):
            free_set = set(plane.free_blocks)
            if len(free_set) != len(plane.free_blocks):
                raise AssertionError("duplicate free block")
            for b, state in plane.page_state.items():
                if b in free_set:
                    raise AssertionError("touched block in free list")
                valid = sum(1 for s in state if s == VALID)
                invalid = sum(1 for s in state if s == INVALID)
                pending = sum(1 for s in state if s == PENDING)
                if (valid != plane.valid_count[b]
                        or invalid != plane.invalid_count[b]
                        or pending != plane.pending_count[b]):
                    raise AssertionError(f"counter drift in plane {pid} block {b}")
                base = (pid * g.blocks_per_plane + b) * g.pages_per_block
                for pg in range(g.pages_per_block):
                    packed = base + pg
                    if state[pg] == VALID:
                        if packed not in self.rmap:
                            raise AssertionError("valid page missing from rmap")
                    elif packed in self.rmap:
                        raise AssertionError("non-valid page present in rmap")


def split_migrations(ftl: Ftl, moves):
    """Partition (old, new) packed-address pairs into those that crossed a
    (chip, die, plane) boundary (the scheduler must be renotified) and
    those that stayed put. Readdressing callbacks fire only for the former."""
    crossed, stayed = [], []
    for old, new in moves:
        if ftl.resource_tuple(old) != ftl.resource_tuple(new):
            crossed.append((old, new))
        else:
            stayed.append((old, new))
    return crossed, stayed
