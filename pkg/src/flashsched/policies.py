"""Device-level I/O scheduling policies behind one interface.

vas  - FIFO over whole I/Os; commits blindly and stalls the pipeline on
       any chip collision with in-flight committed work.
pas  - coarse-grain out-of-order: scans arrival order and commits whole
       I/Os whose chip sets are collision-free against in-flight work and
       against each other; never reorders inside an I/O.
spk1 - arrival-order tag processing with per-chip over-commitment by
       overlap depth / connectivity priority.
spk2 - resource-order chip traversal (equal chip offset across channels,
       then the next offset), FIFO one-transaction-worth per idle chip,
       no over-commitment.
spk3 - resource-order traversal plus prioritized over-commitment: the
       full fine-grain out-of-order strategy.

Any queued force-unit-access tag freezes every policy into arrival-order
commitment until it retires.
"""

from __future__ import annotations

from . import kernels
from .flash import READ, PROGRAM

PENDING, COMMITTED, DONE = 0, 1, 2


def chip_visit_order(geometry, rounds: int = 1):
    """Offset-major chip traversal: all chips of offset 0 across the
    channels, then offset 1, ... repeated ``rounds`` times. Flat chip ids
    already enumerate in this order, never channel-first."""
    order = []
    for _ in range(rounds):
        for offset in range(geometry.chips_per_channel):
            for ch in range(geometry.num_channels):
                order.append(geometry.chip_id(ch, offset))
    return order


def rios_traverse(layout, geometry):
    """Yield chip ids offset-major, cycling until every bucket drains.

    ``layout`` maps chip_id -> bucket (anything with truthiness); the
    caller mutates buckets while consuming the generator.
    """
    while any(layout.get(c) for c in range(geometry.num_chips)):
        progressed = False
        for chip in chip_visit_order(geometry):
            if layout.get(chip):
                progressed = True
                yield chip
        if not progressed:
            return


def entry_of(req):
    """Kernel-format bucket entry for a memory request."""
    tag_seq = req.tag.seq if req.tag is not None else -1
    return (req.die, req.plane, req.pgoff, req.kind, tag_seq, req.mem_id)


def faro_priority(bucket_reqs):
    """(overlap_depth, connectivity) per pending request of one chip."""
    return kernels.score_bucket([entry_of(r) for r in bucket_reqs])


def faro_select(bucket_reqs, cap):
    """Prioritized over-commitment batch for one chip's pending bucket:
    the highest (overlap depth, connectivity) entry and its maximal legal
    coalition, at most ``cap`` requests."""
    entries = [entry_of(r) for r in bucket_reqs]
    picked, depth, conn = kernels.priority_pick(entries, cap)
    return [bucket_reqs[i] for i in picked], depth, conn


def hazard_filter(batch, pending):
    """Write-after-read control: any pending read older than a write in
    the batch and aimed at the same (die, plane) is prepended so it
    commits first. Read-after-write and write-after-write need nothing
    (the host buffer resolves them)."""
    writes = [r for r in batch if r.kind == PROGRAM]
    if not writes:
        return batch
    in_batch = set(map(id, batch))
    prefix = []
    for w in writes:
        for r in pending:
            if (r.kind == READ and r.mem_id < w.mem_id
                    and r.die == w.die and r.plane == w.plane
                    and id(r) not in in_batch):
                prefix.append(r)
                in_batch.add(id(r))
    prefix.sort(key=lambda r: r.mem_id)
    return prefix + batch


class LayoutIndex:
    """Per-chip buckets of secured-but-uncommitted memory requests."""

    def __init__(self):
        self.buckets = {}

    def insert(self, req):
        self.buckets.setdefault(req.chip_id, []).append(req)

    def pending(self, chip_id):
        """Live entries of one bucket (drops committed ones lazily)."""
        bucket = self.buckets.get(chip_id)
        if not bucket:
            return []
        live = [r for r in bucket if r.state == PENDING]
        if len(live) != len(bucket):
            if live:
                self.buckets[chip_id] = live
            else:
                del self.buckets[chip_id]
        return live

    def chips(self):
        return sorted(self.buckets)

    def retarget(self, req, old_chip):
        bucket = self.buckets.get(old_chip)
        if bucket is not None:
            try:
                bucket.remove(req)
            except ValueError:
                pass
            if not bucket:
                del self.buckets[old_chip]
        self.insert(req)


class Policy:
    name = "base"
    wants_callback = False

    def attach(self, eng):
        self.eng = eng

    def on_admit(self, tag):
        pass

    def on_retire(self, tag):
        pass

    def readdress(self, moves):
        pass

    def pump(self, now):
        raise NotImplementedError

    # shared arrival-order commitment: plain VAS and the FUA fallback
    def _fifo_pump(self, now):
        eng = self.eng
        for tag in list(eng.queue):
            reqs = [r for r in tag.reqs if r.state == PENDING]
            if not reqs:
                continue
            if any(eng.chip_load[r.chip_id] for r in reqs):
                return
            eng.commit(reqs, now)


class VasPolicy(Policy):
    name = "vas"

    def pump(self, now):
        self._fifo_pump(now)


class PasPolicy(Policy):
    name = "pas"

    def pump(self, now):
        eng = self.eng
        if eng.fua_active:
            self._fifo_pump(now)
            return
        busy = {c for c, n in enumerate(eng.chip_load) if n}
        read_planes_before = set()
        for tag in list(eng.queue):
            reqs = [r for r in tag.reqs if r.state == PENDING]
            if not reqs:
                continue
            chips = {r.chip_id for r in reqs if r.chip_id >= 0}
            if chips & busy:
                if tag.kind == READ:
                    read_planes_before.update(
                        (r.chip_id, r.die, r.plane) for r in reqs)
                continue
            if tag.kind == PROGRAM and any(
                    (r.chip_id, r.die, r.plane) in read_planes_before
                    for r in reqs):
                continue  # would overtake an older read of the same plane
            eng.commit(reqs, now)
            busy |= chips


class _SprinklerBase(Policy):
    """Shared securing machinery for the spk policies."""

    wants_callback = True
    over_commit = True

    def __init__(self):
        self.layout = LayoutIndex()

    def on_admit(self, tag):
        for r in tag.reqs:
            if r.state == PENDING and r.chip_id >= 0:
                self.layout.insert(r)

    def readdress(self, moves):
        """Relocate secured entries whose physical resource moved."""
        eng = self.eng
        by_old = {old: new for old, new in moves}
        for chip in list(self.layout.buckets):
            for req in list(self.layout.buckets.get(chip, ())):
                if req.state != PENDING or req.target not in by_old:
                    continue
                new = by_old[req.target]
                old_chip = req.chip_id
                eng.retarget_request(req, new)
                if req.chip_id != old_chip:
                    self.layout.retarget(req, old_chip)

    def _cap(self, chip):
        eng = self.eng
        limit = eng.flp_width  # dies * planes
        return limit - len(eng.controllers[chip].queue)

    def _commit_chip(self, chip, now):
        """One batch for one chip; returns number committed."""
        eng = self.eng
        bucket = self.layout.pending(chip)
        if not bucket:
            return 0
        if self.over_commit:
            cap = self._cap(chip)
            if cap <= 0:
                return 0
            batch, _, _ = faro_select(bucket, cap)
            batch = hazard_filter(batch, bucket)
        else:
            ctl = eng.controllers[chip]
            if ctl.active is not None or ctl.queue:
                return 0
            picked = kernels.fifo_pick([entry_of(r) for r in bucket],
                                       eng.flp_width)
            batch = hazard_filter([bucket[i] for i in picked], bucket)
        eng.commit(batch, now)
        return len(batch)


class Spk3Policy(_SprinklerBase):
    name = "spk3"

    def pump(self, now):
        if self.eng.fua_active:
            self._fifo_pump(now)
            return
        # resource-order sweep, cycling while any bucket still yields
        progressed = True
        while progressed:
            progressed = False
            for chip in self.layout.chips():
                if self._commit_chip(chip, now):
                    progressed = True


class Spk2Policy(_SprinklerBase):
    name = "spk2"
    over_commit = False

    pump = Spk3Policy.pump


class Spk1Policy(_SprinklerBase):
    name = "spk1"

    def pump(self, now):
        if self.eng.fua_active:
            self._fifo_pump(now)
            return
        progressed = True
        while progressed:
            progressed = False
            for tag in list(self.eng.queue):
                chips = sorted({r.chip_id for r in tag.reqs
                                if r.state == PENDING and r.chip_id >= 0})
                for chip in chips:
                    if self._commit_chip(chip, now):
                        progressed = True


POLICIES = {
    "vas": VasPolicy,
    "pas": PasPolicy,
    "spk1": Spk1Policy,
    "spk2": Spk2Policy,
    "spk3": Spk3Policy,
}


def make_policy(name: str) -> Policy:
    try:
        return POLICIES[name]()
    except KeyError:
        raise ValueError(f"unknown policy {name!r}; pick one of "
                         f"{'|'.join(POLICIES)}") from None
