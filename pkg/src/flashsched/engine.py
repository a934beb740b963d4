"""Discrete-event core: simulated clock, device queue, host admission,
flash controllers, completion bitmaps, in-order DMA delivery and the
wiring between scheduler, FTL and flash medium.

Event economy: one start and one completion event per flash transaction.
Member completion instants inside a transaction are computed exactly at
planning time and recorded as such; the engine processes them when the
transaction's last member finishes (a device-queue entry therefore frees
at transaction end). Runs are fully deterministic for a given
(config, workload, seed).
"""

from __future__ import annotations

import heapq

from . import kernels
from .flash import (READ, PROGRAM, ERASE, ChannelBus, FlashTransaction,
                    classify_flp, plan_transaction)
from .ftl import CapacityError, Ftl, GcConfig, split_migrations
from .geom import Geometry, TimingParams
from .metrics import Metrics
from .policies import COMMITTED, DONE, PENDING, Policy, entry_of, make_policy

EV_ARRIVE, EV_TXN_START, EV_TXN_DONE = 0, 1, 2


class MemoryRequest:
    __slots__ = ("mem_id", "tag", "kind", "vpage", "page_index", "target",
                 "chip_id", "die", "plane", "pgoff", "state", "complete_t",
                 "gc_task")

    def __init__(self, mem_id, tag, kind, vpage, page_index):
        self.mem_id = mem_id
        self.tag = tag
        self.kind = kind
        self.vpage = vpage
        self.page_index = page_index
        self.target = None
        self.chip_id = -1
        self.die = 0
        self.plane = 0
        self.pgoff = 0
        self.state = PENDING
        self.complete_t = 0.0
        self.gc_task = None


class Tag:
    """Device-queue entry of one host I/O."""

    __slots__ = ("tag_id", "seq", "arrival", "admit_t", "kind", "offset",
                 "length", "fua", "reqs", "bitmap", "remaining",
                 "delivered_upto", "last_delivery", "completions", "retire_t")

    def __init__(self, tag_id, seq, arrival, kind, offset, length, fua):
        self.tag_id = tag_id
        self.seq = seq
        self.arrival = arrival
        self.admit_t = arrival
        self.kind = kind
        self.offset = offset
        self.length = length
        self.fua = fua
        self.reqs = []
        self.bitmap = 0
        self.remaining = 0
        self.delivered_upto = 0
        self.last_delivery = 0.0
        self.completions = None
        self.retire_t = 0.0


class Controller:
    __slots__ = ("chip_id", "queue", "active", "start_pending")

    def __init__(self, chip_id):
        self.chip_id = chip_id
        self.queue = []
        self.active = None
        self.start_pending = False


class GcTask:
    """Victim reclamation on one (chip, die): read valid pages, program
    them to fresh locations (remapping as each program lands), erase, then
    notify the scheduler about cross-resource moves."""

    __slots__ = ("eng", "chip_id", "die", "pid", "block", "reads_left",
                 "programs_left", "origin", "settled")

    def __init__(self, eng, chip_id, die, pid, block, victims):
        self.eng = eng
        self.chip_id = chip_id
        self.die = die
        self.pid = pid
        self.block = block
        self.reads_left = len(victims)
        self.programs_left = 0
        self.origin = {}    # program mem_id -> old packed address
        self.settled = []   # accepted (old, new) moves
        if not victims:
            self._erase()
            return
        for vpage in victims:
            req = eng.new_request(None, READ, vpage, 0)
            req.gc_task = self
            eng.set_target(req, eng.ftl.vmap[vpage])
            eng.commit([req], eng.clock)

    def member_done(self, req):
        eng = self.eng
        if req.kind == READ:
            self.reads_left -= 1
            new = eng.ftl.alloc_for_migration(self.chip_id, self.die)
            if new is None:
                raise CapacityError("garbage collection found no free page")
            prog = eng.new_request(None, PROGRAM, req.vpage, 0)
            prog.gc_task = self
            eng.set_target(prog, new)
            self.origin[prog.mem_id] = req.target
            self.programs_left += 1
            eng.commit([prog], eng.clock)
        elif req.kind == PROGRAM:
            self.programs_left -= 1
            old = self.origin.pop(req.mem_id)
            if eng.ftl.finish_migration(req.vpage, old, req.target):
                self.settled.append((old, req.target))
            if self.reads_left == 0 and self.programs_left == 0:
                self._erase()
        else:  # erase finished
            eng.ftl.erase_block(self.pid, self.block)
            crossed, _stayed = split_migrations(eng.ftl, self.settled)
            if crossed and eng.callback_enabled and eng.policy.wants_callback:
                eng.policy.readdress(crossed)
            eng.metrics.on_gc(len(self.settled), len(crossed))
            eng.active_gc.discard((self.chip_id, self.die))
            eng.maybe_gc(self.chip_id, self.die)

    def _erase(self):
        eng = self.eng
        g = eng.geom
        req = eng.new_request(None, ERASE, -1, 0)
        req.gc_task = self
        req.chip_id = self.chip_id
        req.die = self.die
        req.plane = self.pid % g.planes_per_die
        req.pgoff = 0
        eng.commit([req], eng.clock)


class Engine:
    def __init__(self, geometry: Geometry, timing: TimingParams,
                 policy, queue_depth: int = 32,
                 gc_config: GcConfig | None = None,
                 export_fraction: float = 0.9,
                 callback_enabled: bool = True,
                 snapshot_eps: float | None = None,
                 record_commits: bool = False,
                 record_deliveries: bool = False):
        self.geom = geometry
        self.timing = timing
        self.policy: Policy = make_policy(policy) if isinstance(policy, str) else policy
        self.policy.attach(self)
        self.queue_depth = queue_depth
        self.callback_enabled = callback_enabled
        self.snapshot_eps = snapshot_eps
        self.ftl = Ftl(geometry, gc_config, export_fraction)
        self.flp_width = geometry.dies_per_chip * geometry.planes_per_die
        self.controllers = [Controller(c) for c in range(geometry.num_chips)]
        self.buses = [ChannelBus() for _ in range(geometry.num_channels)]
        self.chip_load = [0] * geometry.num_chips
        self.metrics = Metrics(geometry, snapshot_eps)
        self.queue = []
        self.fua_active = 0
        self.clock = 0.0
        self.active_gc = set()
        self.record_commits = record_commits
        self.commit_log = []   # (time, chip_id, [vpages]) per commit call
        self.record_deliveries = record_deliveries
        self.delivery_log = []  # (tag_id, page_index, time)
        self._heap = []
        self._seq = 0
        self._mem_seq = 0
        self._tag_seq = 0
        self._txn_seq = 0
        self._records = iter(())
        self._blocked = None
        self._last_admit = 0.0
        self._dirty = False

    # -- plumbing ------------------------------------------------------------

    def _push(self, t, kind, arg):
        self._seq += 1
        heapq.heappush(self._heap, (t, self._seq, kind, arg))

    def new_request(self, tag, kind, vpage, page_index) -> MemoryRequest:
        self._mem_seq += 1
        return MemoryRequest(self._mem_seq, tag, kind, vpage, page_index)

    def set_target(self, req, packed) -> None:
        g = self.geom
        req.target = packed
        req.pgoff = packed % g.pages_per_block
        pid = packed // g.pages_per_block // g.blocks_per_plane
        req.plane = pid % g.planes_per_die
        pid //= g.planes_per_die
        req.die = pid % g.dies_per_chip
        req.chip_id = pid // g.dies_per_chip

    def retarget_request(self, req, packed) -> None:
        self.set_target(req, packed)

    # -- host admission --------------------------------------------------------

    def _admit(self, record, now, want):
        self._tag_seq += 1
        # the host presents the I/O at `want`; latency spans want -> retire
        tag = Tag(self._tag_seq, self._tag_seq, want,
                  READ if record.kind == "read" else PROGRAM,
                  record.offset, record.length, record.fua)
        tag.admit_t = now
        ps = self.geom.page_size
        first = record.offset // ps
        last = (record.offset + record.length - 1) // ps
        exported = self.ftl.exported_pages
        touched_dies = set()
        zero_fill = []
        for i, page in enumerate(range(first, last + 1)):
            vpage = page % exported
            req = self.new_request(tag, tag.kind, vpage, i)
            if tag.kind == PROGRAM:
                packed = self.ftl.allocate_write(vpage)
                self.set_target(req, packed)
                touched_dies.add((req.chip_id, req.die))
            else:
                packed = self.ftl.translate_read(vpage)
                if packed is not None:
                    self.set_target(req, packed)
                else:
                    zero_fill.append(req)  # never-written data: all zeroes
            tag.reqs.append(req)
        tag.remaining = len(tag.reqs)
        if tag.kind == READ:
            tag.completions = [None] * len(tag.reqs)
        self.queue.append(tag)
        if tag.fua:
            self.fua_active += 1
        self.metrics.on_accept(tag, now, now - want)
        self.policy.on_admit(tag)
        if zero_fill:
            self.commit(zero_fill, now)
        self._dirty = True
        for chip_id, die in sorted(touched_dies):
            self.maybe_gc(chip_id, die)

    def _fetch_next(self, now):
        try:
            record = next(self._records)
        except StopIteration:
            return
        want = max(record.timestamp, self._last_admit)
        self._push(max(want, now), EV_ARRIVE, (record, want))

    def _on_arrive(self, now, payload):
        record, want = payload
        if len(self.queue) >= self.queue_depth:
            self._blocked = (record, want)
            return
        self._last_admit = now
        self._admit(record, now, want)
        self._fetch_next(now)

    # -- commitment ------------------------------------------------------------

    def commit(self, reqs, now) -> None:
        """Route committed memory requests to their flash controllers;
        zero-fill reads (never-written data) complete on the spot."""
        self.metrics.on_commit(reqs, now)
        if self.record_commits:
            by_chip = {}
            for r in reqs:
                if r.tag is not None:
                    by_chip.setdefault(r.chip_id, []).append(r.vpage)
            for chip in by_chip:
                self.commit_log.append((now, chip, by_chip[chip]))
        for r in reqs:
            if r.state != PENDING:
                raise AssertionError("double commitment")
            r.state = COMMITTED
            tag = r.tag
            if tag is not None:
                tag.bitmap |= 1 << r.page_index
                if r.kind == READ and r.target is not None:
                    current = self.ftl.vmap.get(r.vpage)
                    if current is not None and current != r.target:
                        self.set_target(r, current)  # migrated while queued
            if r.chip_id < 0:
                r.complete_t = now
                self._member_done(r, now)
                continue
            ctl = self.controllers[r.chip_id]
            ctl.queue.append(r)
            self.chip_load[r.chip_id] += 1
            if ctl.active is None and not ctl.start_pending:
                ctl.start_pending = True
                self._push(now + self.timing.txn_decision_window,
                           EV_TXN_START, r.chip_id)

    # -- flash controller ------------------------------------------------------

    def _on_txn_start(self, now, chip_id):
        ctl = self.controllers[chip_id]
        ctl.start_pending = False
        if ctl.active is not None or not ctl.queue:
            return
        picked = kernels.fifo_pick([entry_of(r) for r in ctl.queue],
                                   self.flp_width)
        members = [ctl.queue[i] for i in picked]
        for i in reversed(picked):
            del ctl.queue[i]
        kind = members[0].kind
        flp = classify_flp(members, self.geom) if kind != ERASE else 0
        self._txn_seq += 1
        txn = FlashTransaction(self._txn_seq, chip_id, kind, members, flp, now)
        plan_transaction(txn, self.buses[self.geom.channel_of(chip_id)],
                         self.timing, now)
        ctl.active = txn
        self.metrics.on_txn_start(txn)
        self._push(txn.completed_at, EV_TXN_DONE, txn)

    def _on_txn_done(self, now, txn):
        ctl = self.controllers[txn.chip_id]
        if ctl.active is not txn:
            raise AssertionError("completion for a foreign transaction")
        ctl.active = None
        self.metrics.on_txn_done(txn)
        for m in txn.members:
            m.state = DONE
            self.chip_load[txn.chip_id] -= 1
            self._member_done(m, m.complete_t)
        if ctl.queue and not ctl.start_pending:
            ctl.start_pending = True
            self._push(now + self.timing.txn_decision_window,
                       EV_TXN_START, txn.chip_id)
        self._dirty = True

    def _member_done(self, req, at):
        req.state = DONE
        if req.gc_task is not None:
            req.gc_task.member_done(req)
            return
        tag = req.tag
        bit = 1 << req.page_index
        if not tag.bitmap & bit:
            raise AssertionError("completion bit already cleared")
        tag.bitmap &= ~bit
        tag.remaining -= 1
        if tag.kind == READ:
            tag.completions[req.page_index] = at
            k = tag.delivered_upto
            comps = tag.completions
            while k < len(comps) and comps[k] is not None:
                tag.last_delivery = max(tag.last_delivery, comps[k])
                if self.record_deliveries:
                    self.delivery_log.append((tag.tag_id, k, tag.last_delivery))
                k += 1
            tag.delivered_upto = k
            if k == len(comps):
                self._retire(tag, tag.last_delivery)
        else:
            if at > tag.retire_t:
                tag.retire_t = at
            if tag.remaining == 0:
                self._retire(tag, tag.retire_t)

    def _retire(self, tag, at):
        if tag.bitmap != 0 or tag.remaining != 0:
            raise AssertionError("retiring an unfinished tag")
        tag.retire_t = at
        self.queue.remove(tag)
        if tag.fua:
            self.fua_active -= 1
        self.metrics.on_retire(tag, self.clock)
        self.policy.on_retire(tag)
        self._dirty = True

    # -- garbage collection ------------------------------------------------------

    def maybe_gc(self, chip_id, die):
        key = (chip_id, die)
        if key in self.active_gc or not self.ftl.gc_needed(chip_id, die):
            return
        victim = self.ftl.pick_victim(chip_id, die)
        if victim is None:
            if self.ftl.free_blocks_per_die[self.ftl.die_index(chip_id, die)] == 0:
                raise CapacityError(
                    f"chip {chip_id} die {die}: no free block and nothing "
                    "reclaimable")
            return
        pid, block, victims = victim
        self.active_gc.add(key)
        GcTask(self, chip_id, die, pid, block, victims)

    # -- main loop ------------------------------------------------------------

    def run(self, records) -> Metrics:
        """Drive a record stream to completion and return the accumulators."""
        self._records = iter(records)
        self._fetch_next(0.0)
        heap = self._heap
        handlers = {EV_ARRIVE: self._on_arrive,
                    EV_TXN_START: self._on_txn_start,
                    EV_TXN_DONE: self._on_txn_done}
        prune_tick = 0
        while heap:
            t, _seq, kind, arg = heapq.heappop(heap)
            self.clock = t
            handlers[kind](t, arg)
            if heap and heap[0][0] <= t:
                continue
            # end of this timestamp: unblock the host, step the scheduler
            while (self._blocked is not None
                   and len(self.queue) < self.queue_depth):
                record, want = self._blocked
                self._blocked = None
                self._last_admit = t
                self._admit(record, t, want)
                self._fetch_next(t)
            if self._dirty:
                self._dirty = False
                self.policy.pump(t)
            prune_tick += 1
            if prune_tick >= 2048:
                prune_tick = 0
                for bus in self.buses:
                    bus.prune(t)
        if self.queue or self._blocked is not None:
            raise AssertionError("run drained with unfinished tags")
        self.metrics.advance(self.clock)
        return self.metrics

    def reset_measurement(self) -> None:
        """Keep device state (FTL, mapping), restart clocks and metrics;
        used between a preconditioning pass and the measured run."""
        if self._heap or self.queue:
            raise AssertionError("reset during an active run")
        self.clock = 0.0
        self._last_admit = 0.0
        self.metrics = Metrics(self.geom, self.snapshot_eps)
        self.commit_log = []
        self.delivery_log = []
        for bus in self.buses:
            bus.starts.clear()
            bus.ends.clear()
