"""Time-integral accounting and report generation.

Two idleness views coexist:

* ``inter_chip_idle_us`` integrates chip-idle time over the periods where
  at least one schedulable (accepted but uncommitted) memory request
  exists anywhere; quiet tails do not count as idleness.
* ``idle_chip_slots`` (optional, diagram-style) counts idle boxes per
  service snapshot the way the worked-example figures do: snapshot
  boundaries are commit cascades and tag retirements (epsilon-merged),
  a chip is a busy box if any transaction activity falls inside the
  snapshot, and snapshots at or after the final commit cascade are
  excluded because nothing schedulable remains.
"""

from __future__ import annotations

from bisect import bisect_left, insort

from .flash import FlpClass


class SnapshotTracker:
    def __init__(self, num_chips: int, merge_eps: float = 2.0):
        self.num_chips = num_chips
        self.eps = merge_eps
        self.cascades = []
        self.marks = []
        self.activity = [[] for _ in range(num_chips)]

    def note_cascade(self, t: float) -> None:
        if not self.cascades or self.cascades[-1] != t:
            self.cascades.append(t)

    def note_retire(self, t: float) -> None:
        self.marks.append(t)

    def note_txn(self, chip: int, start: float, end: float) -> None:
        self.activity[chip].append((start, end))

    def snapshots(self, makespan: float):
        """(start, end, busy_set, counted) per snapshot."""
        if not self.cascades:
            return []
        eps = self.eps
        bounds = []
        for t in sorted(set(self.cascades) | set(self.marks) | {0.0}):
            if not bounds or t - bounds[-1] > eps:
                bounds.append(t)
        if makespan - bounds[-1] > eps:
            bounds.append(makespan)
        last_cascade = self.cascades[-1]
        out = []
        for s, e in zip(bounds, bounds[1:]):
            delta = eps if (e - s) > 3 * eps else 0.0
            busy = set()
            for chip in range(self.num_chips):
                for (a, b) in self.activity[chip]:
                    if a < e and b > s + delta:
                        busy.add(chip)
                        break
            counted = s < last_cascade - eps / 2
            out.append((s, e, busy, counted))
        return out

    def idle_slots(self, makespan: float) -> int:
        return sum(self.num_chips - len(busy)
                   for _, _, busy, counted in self.snapshots(makespan) if counted)


class _ChipAcc:
    __slots__ = ("bus_active", "cell_union", "cell_sum", "busy",
                 "stall_inside", "txns", "class_time", "class_count")

    def __init__(self):
        self.bus_active = 0.0
        self.cell_union = 0.0
        self.cell_sum = 0.0
        self.busy = 0.0
        self.stall_inside = 0.0
        self.txns = 0
        self.class_time = [0.0, 0.0, 0.0, 0.0]
        self.class_count = [0, 0, 0, 0]


class Metrics:
    """Run accumulators; the engine feeds it, ``build_report`` drains it."""

    def __init__(self, geometry, snapshot_eps: float | None = None):
        self.geom = geometry
        n = geometry.num_chips
        self.chips = [_ChipAcc() for _ in range(n)]
        self.tracker = (SnapshotTracker(n, snapshot_eps)
                        if snapshot_eps is not None else None)
        self.last_t = 0.0
        self.busy_chips = 0
        self.pending_uncommitted = 0
        self.inter_idle_us = 0.0
        self.intra_idle_us = 0.0
        self.queue_stall_us = 0.0
        self.latencies = []
        self.bytes_retired = 0
        self.tags_retired = 0
        self.txn_count = 0
        self.request_count = 0
        self.commit_count = 0
        self.bus_wait_us = 0.0
        self.gc_migrations = 0
        self.gc_erases = 0
        self.gc_callbacks = 0
        self.makespan = 0.0

    # -- time base ----------------------------------------------------------

    def advance(self, t: float) -> None:
        if t > self.last_t:
            if self.pending_uncommitted > 0:
                idle = self.geom.num_chips - self.busy_chips
                if idle > 0:
                    self.inter_idle_us += idle * (t - self.last_t)
            self.last_t = t
        if t > self.makespan:
            self.makespan = t

    # -- engine hooks ---------------------------------------------------------

    def on_accept(self, tag, t, stall: float) -> None:
        self.advance(t)
        self.pending_uncommitted += len(tag.reqs)
        self.request_count += len(tag.reqs)
        self.queue_stall_us += stall

    def on_commit(self, reqs, t) -> None:
        self.advance(t)
        host = sum(1 for r in reqs if r.tag is not None)
        self.pending_uncommitted -= host
        self.commit_count += len(reqs)
        if self.tracker is not None and host:
            self.tracker.note_cascade(t)

    def on_txn_start(self, txn) -> None:
        self.advance(txn.composed_at)
        self.busy_chips += 1

    def on_txn_done(self, txn) -> None:
        self.advance(txn.completed_at)
        self.busy_chips -= 1
        self.txn_count += 1
        acc = self.chips[txn.chip_id]
        busy = txn.busy_duration
        cell = txn.cell_union
        acc.bus_active += txn.bus_active
        acc.cell_union += cell
        acc.cell_sum += txn.cell_sum
        acc.busy += busy
        acc.stall_inside += busy - cell - txn.bus_active
        acc.txns += 1
        acc.class_time[txn.flp_class] += busy
        acc.class_count[txn.flp_class] += 1
        self.bus_wait_us += txn.bus_contention
        self.intra_idle_us += self.geom.dies_per_chip * busy - txn.cell_sum
        if self.tracker is not None:
            self.tracker.note_txn(txn.chip_id, txn.bus_start, txn.completed_at)

    def on_retire(self, tag, t) -> None:
        self.advance(t)
        self.tags_retired += 1
        self.bytes_retired += tag.length
        self.latencies.append(tag.retire_t - tag.arrival)
        if self.tracker is not None:
            self.tracker.note_retire(tag.retire_t)

    def on_gc(self, migrations: int, crossed: int) -> None:
        self.gc_migrations += migrations
        self.gc_erases += 1
        self.gc_callbacks += 1 if crossed else 0


def _percentile(sorted_xs, q):
    if not sorted_xs:
        return 0.0
    k = min(len(sorted_xs) - 1, max(0, round(q * (len(sorted_xs) - 1))))
    return sorted_xs[k]


def build_report(m: Metrics, policy: str, digest: str, config=None) -> dict:
    """Assemble the structured report (plain dict, JSON-ready)."""
    span = m.makespan
    n = m.geom.num_chips
    lat = sorted(m.latencies)
    util = [(c.bus_active + c.cell_union) / span if span else 0.0
            for c in m.chips]
    busy_all = sum(c.busy for c in m.chips)
    bus_all = sum(c.bus_active for c in m.chips)
    cell_all = sum(c.cell_union for c in m.chips)
    stall_all = sum(c.stall_inside for c in m.chips)
    denom = n * span if span else 1.0
    class_time = [0.0] * 4
    for c in m.chips:
        for k in range(4):
            class_time[k] += c.class_time[k]
    class_total = sum(class_time)
    report = {
        "policy": policy,
        "workload_digest": digest,
        "makespan_us": span,
        "io_count": m.tags_retired,
        "request_count": m.request_count,
        "txn_count": m.txn_count,
        "bandwidth_mb_s": (m.bytes_retired / span) if span else 0.0,
        "iops": (m.tags_retired / span * 1e6) if span else 0.0,
        "latency_us": {
            "mean": sum(lat) / len(lat) if lat else 0.0,
            "p50": _percentile(lat, 0.50),
            "p99": _percentile(lat, 0.99),
            "max": lat[-1] if lat else 0.0,
        },
        "queue_stall_us": m.queue_stall_us,
        "inter_chip_idle_us": m.inter_idle_us,
        "intra_chip_idle_us": m.intra_idle_us,
        "bus_wait_us": m.bus_wait_us,
        "chip_utilization": {
            "mean": sum(util) / n,
            "min": min(util),
            "max": max(util),
        },
        "breakdown": {
            "bus_activate": bus_all / denom,
            "bus_contention": stall_all / denom,
            "cell_activate": cell_all / denom,
            "idle": (n * span - busy_all) / denom if span else 1.0,
        },
        "pal_histogram": {
            cls.name: (class_time[cls] / class_total if class_total else 0.0)
            for cls in FlpClass
        },
        "pal_txn_counts": {
            cls.name: sum(c.class_count[cls] for c in m.chips)
            for cls in FlpClass
        },
        "gc": {
            "migrations": m.gc_migrations,
            "erases": m.gc_erases,
            "callbacks": m.gc_callbacks,
        },
        "idle_chip_slots": (m.tracker.idle_slots(span)
                            if m.tracker is not None else None),
        "per_chip_utilization": util,
    }
    if config is not None:
        report["config"] = config
    return report


def attach_baseline(report: dict, baseline: dict) -> dict:
    """Derived ratios against a baseline run of the same workload."""
    if baseline["workload_digest"] != report["workload_digest"]:
        raise ValueError("baseline run used a different workload digest")
    if baseline["txn_count"]:
        report["txn_reduction_vs_baseline"] = \
            1.0 - report["txn_count"] / baseline["txn_count"]
    if baseline["queue_stall_us"] > 0:
        report["queue_stall_normalized"] = \
            report["queue_stall_us"] / baseline["queue_stall_us"]
    report["baseline_policy"] = baseline["policy"]
    return report


def merge_reports(reports):
    """Aggregate reports of independent sweep cells (plain means over the
    scalar figures; used for sweep summaries only)."""
    if not reports:
        return {}
    keys = ("bandwidth_mb_s", "iops", "makespan_us", "txn_count",
            "inter_chip_idle_us", "intra_chip_idle_us", "queue_stall_us")
    out = {"cells": len(reports)}
    for k in keys:
        out[k] = sum(r[k] for r in reports) / len(reports)
    out["chip_utilization_mean"] = (
        sum(r["chip_utilization"]["mean"] for r in reports) / len(reports))
    return out
