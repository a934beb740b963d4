"""Trace ingestion and synthetic workload generation.

Traces follow the public MSR-Cambridge block-trace format: CSV lines of
``timestamp,hostname,disk,type,offset,size,response_time`` with the
timestamp in 100 ns ticks. Surplus fields are ignored; timestamps are
normalized to microseconds from the first record.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Iterable, Iterator, List, NamedTuple

READ, WRITE = "read", "write"

SIZE_STEP = 4096  # synthetic sizes are multiples of 4 KB


class TraceRecord(NamedTuple):
    timestamp: float      # us since trace start
    kind: str             # "read" | "write"
    offset: int           # bytes
    length: int           # bytes
    fua: bool = False


class TraceError(ValueError):
    pass


def parse_trace(lines: Iterable[str], error_budget: int = 100) -> List[TraceRecord]:
    """Parse MSR-style CSV lines into normalized records.

    Malformed lines are skipped and counted up to ``error_budget``;
    out-of-order timestamps are stably sorted (counted as warnings).
    Raises on empty input or a blown budget.
    """
    records = []
    bad = 0
    for lineno, line in enumerate(lines, 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split(",")
        try:
            if len(parts) < 6:
                raise ValueError("too few fields")
            ts = int(parts[0])
            kind = parts[3].strip().lower()
            if kind not in (READ, WRITE):
                raise ValueError(f"bad op {parts[3]!r}")
            offset = int(parts[4])
            length = int(parts[5])
            if length <= 0 or offset < 0:
                raise ValueError("bad offset/length")
        except ValueError as exc:
            bad += 1
            if bad > error_budget:
                raise TraceError(
                    f"more than {error_budget} malformed lines "
                    f"(line {lineno}: {exc})") from exc
            continue
        records.append((ts, kind, offset, length))
    if not records:
        raise TraceError("trace contains no records")
    out_of_order = sum(1 for a, b in zip(records, records[1:]) if b[0] < a[0])
    if out_of_order:
        records.sort(key=lambda r: r[0])
    t0 = records[0][0]
    normalized = [TraceRecord((ts - t0) / 10.0, kind, offset, length)
                  for ts, kind, offset, length in records]
    normalized[0] = normalized[0]._replace(timestamp=0.0)
    return normalized


def parse_trace_file(path, error_budget: int = 100) -> List[TraceRecord]:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_trace(fh, error_budget)


def serialize_trace(records: Iterable[TraceRecord]) -> str:
    """Inverse of parse_trace (modulo the ignored host fields)."""
    lines = []
    for r in records:
        ticks = int(round(r.timestamp * 10.0))
        lines.append(f"{ticks},host,0,{'Read' if r.kind == READ else 'Write'},"
                     f"{r.offset},{r.length},0")
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class SynthSpec:
    count: int = 1000
    read_fraction: float = 1.0
    # size mixture: {bytes: weight}; a single entry means fixed size
    size_distribution: dict = field(default_factory=lambda: {4096: 1.0})
    address_pattern: str = "uniform_random"   # sequential | uniform_random | locality
    hot_fraction: float = 0.2
    hot_ratio: float = 0.8
    inter_arrival: str = "closed_loop"        # closed_loop | poisson
    arrival_rate: float = 1000.0              # I/Os per second (poisson)
    address_space: int = 64 << 20             # bytes the offsets are drawn from
    seed: int = 1

    def __post_init__(self):
        if not 0 <= self.read_fraction <= 1:
            raise ValueError("read_fraction must be in [0, 1]")
        if self.address_pattern not in ("sequential", "uniform_random", "locality"):
            raise ValueError(f"unknown address pattern {self.address_pattern!r}")
        if self.inter_arrival not in ("closed_loop", "poisson"):
            raise ValueError(f"unknown inter_arrival {self.inter_arrival!r}")
        if not self.size_distribution:
            raise ValueError("empty size distribution")
        if not 0 < self.hot_fraction <= 1 or not 0 <= self.hot_ratio <= 1:
            raise ValueError("bad locality parameters")


def generate(spec: SynthSpec) -> Iterator[TraceRecord]:
    """Deterministic record stream for a spec (same seed, same stream).

    Closed-loop streams carry timestamp 0 for every record: the engine
    admits them back-to-back as queue slots free up.
    """
    rng = random.Random(spec.seed)
    sizes = sorted(spec.size_distribution)
    weights = [spec.size_distribution[s] for s in sizes]
    space = max(spec.address_space, max(sizes))
    hot_bytes = max(SIZE_STEP, int(space * spec.hot_fraction) // SIZE_STEP * SIZE_STEP)
    seq_cursor = 0
    now = 0.0
    for _ in range(spec.count):
        size = rng.choices(sizes, weights)[0] if len(sizes) > 1 else sizes[0]
        kind = READ if rng.random() < spec.read_fraction else WRITE
        if spec.address_pattern == "sequential":
            offset = seq_cursor
            seq_cursor += size
        elif spec.address_pattern == "uniform_random":
            slots = max(1, (space - size) // SIZE_STEP + 1)
            offset = rng.randrange(slots) * SIZE_STEP
        else:  # locality: hot_ratio of accesses hit the first hot_fraction bytes
            region = hot_bytes if rng.random() < spec.hot_ratio else space
            slots = max(1, (region - size) // SIZE_STEP + 1)
            offset = rng.randrange(slots) * SIZE_STEP
        if spec.inter_arrival == "poisson":
            now += rng.expovariate(spec.arrival_rate / 1e6)
            ts = now
        else:
            ts = 0.0
        yield TraceRecord(ts, kind, offset, size)


def sequential_fill(pages: int, page_size: int, start_page: int = 0) -> Iterator[TraceRecord]:
    """Back-to-back single-page writes covering a page range (preconditioning)."""
    for v in range(start_page, start_page + pages):
        yield TraceRecord(0.0, WRITE, v * page_size, page_size)


def workload_digest(records: Iterable[TraceRecord]) -> str:
    """Stable digest used to pair baseline runs with the same workload."""
    import hashlib
    h = hashlib.sha1()
    for r in records:
        h.update(f"{r.timestamp:.3f},{r.kind},{r.offset},{r.length},{int(r.fua)};"
                 .encode())
    return h.hexdigest()
