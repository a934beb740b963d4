"""Build and execute simulations from an effective config dict."""

from __future__ import annotations

import random

from . import fixtures
from .config import ConfigError, build_gc, build_geometry, build_timing
from .engine import Engine
from .metrics import attach_baseline, build_report
from .workload import (WRITE, SynthSpec, TraceRecord, generate,
                       parse_trace_file, sequential_fill, workload_digest)


def synth_spec_from(cfg: dict) -> SynthSpec:
    w = cfg["workload"]
    sizes = {int(k): float(v) for k, v in w["sizes"].items()}
    return SynthSpec(count=w["count"], read_fraction=w["read_fraction"],
                     size_distribution=sizes,
                     address_pattern=w["address_pattern"],
                     hot_fraction=w["hot_fraction"], hot_ratio=w["hot_ratio"],
                     inter_arrival=w["inter_arrival"],
                     arrival_rate=w["arrival_rate"],
                     address_space=w["address_space_mb"] << 20,
                     seed=w["seed"])


def random_fill_records(exported_bytes: int, fill: float, seed: int,
                        chunk: int = 1 << 20):
    """Randomly ordered chunk writes covering ``fill`` of the space once
    (the fragmented-device preconditioning)."""
    slots = exported_bytes // chunk
    take = int(slots * fill)
    order = list(range(slots))
    random.Random(seed).shuffle(order)
    return [TraceRecord(0.0, WRITE, s * chunk, chunk) for s in order[:take]]


def build_engine(cfg: dict, policy: str | None = None,
                 record_commits: bool = False) -> Engine:
    geom = build_geometry(cfg)
    timing = build_timing(cfg)
    w = cfg["workload"]
    if w["kind"] == "builtin":
        geom, timing, _, _, _ = fixtures.build(w["builtin"])
    eps = cfg["report"]["snapshot_eps"]
    return Engine(geom, timing,
                  policy or cfg["policy"]["name"],
                  queue_depth=cfg["queue"]["depth"],
                  gc_config=build_gc(cfg),
                  export_fraction=cfg["ftl"]["export_fraction"],
                  callback_enabled=cfg["ftl"]["readdressing_callback"],
                  snapshot_eps=eps if eps > 0 else None,
                  record_commits=record_commits)


def workload_records(cfg: dict, eng: Engine):
    """(precondition records, measured records) for the config."""
    w = cfg["workload"]
    if w["kind"] == "builtin":
        _, _, pre, measured, _ = fixtures.build(w["builtin"])
        return pre, measured
    if w["kind"] == "trace":
        if not w["trace_path"]:
            raise ConfigError("workload.kind=trace needs workload.trace_path")
        measured = parse_trace_file(w["trace_path"])
    elif w["kind"] == "synthetic":
        measured = list(generate(synth_spec_from(cfg)))
    else:
        raise ConfigError(f"unknown workload kind {w['kind']!r}")
    mode = w["precondition"]
    ps = eng.geom.page_size
    if mode == "region":
        pages = min((w["address_space_mb"] << 20) // ps,
                    eng.ftl.exported_pages)
        pre = list(sequential_fill(pages, ps))
    elif mode == "random_fill":
        pre = random_fill_records(eng.ftl.exported_pages * ps,
                                  eng.ftl.gc.precondition_fill, w["seed"])
    elif mode == "none":
        pre = []
    else:
        raise ConfigError(f"unknown precondition mode {mode!r}")
    return pre, measured


def fast_fill(eng: Engine, records) -> None:
    """Apply a preconditioning write stream straight to the FTL.

    Preconditioning only exists to shape the mapping state and the run's
    metrics are reset afterwards, so simulating its timing is wasted work;
    allocation happens at admission in record order either way, giving a
    state identical to an engine-driven pass. Refuses streams that would
    have tripped garbage collection (those need a simulated pass)."""
    ftl = eng.ftl
    ps = eng.geom.page_size
    exported = ftl.exported_pages
    for rec in records:
        if rec.kind != WRITE:
            raise ValueError("precondition streams must be write-only")
        first = rec.offset // ps
        last = (rec.offset + rec.length - 1) // ps
        for page in range(first, last + 1):
            ftl.allocate_write(page % exported)
    g = eng.geom
    for chip in range(g.num_chips):
        for die in range(g.dies_per_chip):
            if ftl.gc_needed(chip, die):
                raise ValueError(
                    "preconditioning pushed a die below the GC threshold; "
                    "lower the fill or raise capacity")


def run_config(cfg: dict, policy: str | None = None,
               record_commits: bool = False) -> dict:
    """One full simulation: precondition, measure, report."""
    eng = build_engine(cfg, policy, record_commits)
    pre, measured = workload_records(cfg, eng)
    if pre:
        fast_fill(eng, pre)
        eng.reset_measurement()
    eng.run(measured)
    report = build_report(eng.metrics, eng.policy.name,
                          workload_digest(measured), config=cfg)
    if record_commits:
        report["commit_log"] = eng.commit_log
    return report


def run_with_baseline(cfg: dict, baseline: dict | None) -> dict:
    report = run_config(cfg)
    if baseline is not None:
        attach_baseline(report, baseline)
    return report


def chips_to_channels(chips: int) -> int:
    """Square-ish channel split: 64 -> 8x8, 256 -> 16x16, 1024 -> 32x32."""
    c = max(1, int(round(chips ** 0.5)))
    while chips % c:
        c -= 1
    return c


def sweep_cells(cfg: dict, chips_axis, size_axis, policy_axis, root_seed: int):
    """Cross-product of sweep coordinates -> per-cell effective configs."""
    import copy
    cells = []
    coord_idx = 0
    for chips in (chips_axis or [None]):
        for size in (size_axis or [None]):
            # one workload per (chips, size) coordinate: policies compete
            # on identical streams
            seed = root_seed + 1000003 * coord_idx
            coord_idx += 1
            for policy in (policy_axis or [cfg["policy"]["name"]]):
                cell = copy.deepcopy(cfg)
                coord = {}
                if chips is not None:
                    ch = chips_to_channels(chips)
                    cell["geometry"]["num_channels"] = ch
                    cell["geometry"]["chips_per_channel"] = chips // ch
                    coord["chips"] = chips
                if size is not None:
                    cell["workload"]["sizes"] = {str(int(size)): 1.0}
                    coord["transfer_size"] = int(size)
                cell["policy"]["name"] = policy
                coord["policy"] = policy
                cell["workload"]["seed"] = seed
                cells.append((coord, cell))
    return cells
