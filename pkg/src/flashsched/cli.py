"""Command-line interface: run | sweep | validate-trace | print-config.

Reports land in --out (or $FLASHSCHED_OUT, default ./out) as a JSON
document plus a per-chip CSV appendix; sweeps add one tidy CSV with a row
per cell. Exit codes: 0 ok, 1 config error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys

from .config import ConfigError, load_config
from .ftl import CapacityError
from .metrics import attach_baseline
from .runner import run_config, sweep_cells
from .workload import TraceError, parse_trace_file


def _out_dir(args) -> str:
    path = args.out or os.environ.get("FLASHSCHED_OUT", "out")
    os.makedirs(path, exist_ok=True)
    return path


def _write_report(report: dict, out_dir: str, stem: str) -> str:
    path = os.path.join(out_dir, stem + ".json")
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    os.replace(tmp, path)
    csv_path = os.path.join(out_dir, stem + "_chips.csv")
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["chip", "utilization"])
        for chip, util in enumerate(report["per_chip_utilization"]):
            w.writerow([chip, f"{util:.6f}"])
    return path


def _summary_line(report: dict) -> str:
    return (f"{report['policy']}: bandwidth {report['bandwidth_mb_s']:.2f} MB/s, "
            f"mean latency {report['latency_us']['mean']:.1f} us, "
            f"utilization {report['chip_utilization']['mean']:.3f}")


def _scalar_row(coord: dict, report: dict) -> dict:
    row = dict(coord)
    row.update({
        "bandwidth_mb_s": report["bandwidth_mb_s"],
        "iops": report["iops"],
        "latency_mean_us": report["latency_us"]["mean"],
        "latency_p50_us": report["latency_us"]["p50"],
        "latency_p99_us": report["latency_us"]["p99"],
        "queue_stall_us": report["queue_stall_us"],
        "inter_chip_idle_us": report["inter_chip_idle_us"],
        "intra_chip_idle_us": report["intra_chip_idle_us"],
        "chip_utilization_mean": report["chip_utilization"]["mean"],
        "txn_count": report["txn_count"],
        "request_count": report["request_count"],
        "io_count": report["io_count"],
        "makespan_us": report["makespan_us"],
        "bus_activate": report["breakdown"]["bus_activate"],
        "bus_contention": report["breakdown"]["bus_contention"],
        "cell_activate": report["breakdown"]["cell_activate"],
        "idle": report["breakdown"]["idle"],
        "pal3_fraction": report["pal_histogram"]["PAL3"],
        "gc_migrations": report["gc"]["migrations"],
    })
    return row


def cmd_run(args) -> int:
    cfg = load_config(args.config, args.set)
    if args.policy:
        cfg["policy"]["name"] = args.policy
    baseline = None
    if args.baseline:
        with open(args.baseline, "r", encoding="utf-8") as fh:
            baseline = json.load(fh)
    report = run_config(cfg)
    if baseline is not None:
        attach_baseline(report, baseline)
    out = _out_dir(args)
    path = _write_report(report, out, args.name or f"run_{cfg['policy']['name']}")
    print(_summary_line(report))
    print(f"report: {path}")
    return 0


def cmd_sweep(args) -> int:
    cfg = load_config(args.config, args.set)
    chips = [int(x) for x in args.chips.split(",")] if args.chips else None
    sizes = [int(x) for x in args.sizes.split(",")] if args.sizes else None
    policies = args.policies.split(",") if args.policies else None
    cells = sweep_cells(cfg, chips, sizes, policies, args.seed)
    out = _out_dir(args)
    rows = []
    failures = 0
    for i, (coord, cell) in enumerate(cells):
        stem = "cell_" + "_".join(f"{k}-{v}" for k, v in sorted(coord.items()))
        try:
            report = run_config(cell)
        except (ConfigError, CapacityError, TraceError, OSError) as exc:
            failures += 1
            rows.append({**coord, "error": str(exc)})
            print(f"[{i + 1}/{len(cells)}] {stem}: FAILED: {exc}", file=sys.stderr)
            continue
        _write_report(report, out, stem)
        rows.append(_scalar_row(coord, report))
        print(f"[{i + 1}/{len(cells)}] {_summary_line(report)}")
    fields = sorted({k for row in rows for k in row})
    csv_path = os.path.join(out, "sweep.csv")
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=fields)
        w.writeheader()
        w.writerows(rows)
    print(f"sweep matrix: {csv_path} ({len(rows)} cells, {failures} failed)")
    return 0 if failures == 0 else 2


def cmd_validate_trace(args) -> int:
    records = parse_trace_file(args.trace)
    reads = sum(1 for r in records if r.kind == "read")
    total_bytes = sum(r.length for r in records)
    span = records[-1].timestamp if len(records) > 1 else 0.0
    print(f"{args.trace}: {len(records)} records, {reads} reads, "
          f"{total_bytes >> 20} MiB, span {span / 1e6:.3f} s")
    return 0


def cmd_print_config(args) -> int:
    cfg = load_config(args.config, args.set)
    json.dump(cfg, sys.stdout, indent=2, sort_keys=True)
    print()
    return 0


def make_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="flashsched",
                                description="many-chip SSD scheduling simulator")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="TOML config file")
        sp.add_argument("--set", action="append", default=[],
                        metavar="SEC.KEY=VALUE", help="override a config field")

    run = sub.add_parser("run", help="execute one simulation")
    common(run)
    run.add_argument("--policy", choices=["vas", "pas", "spk1", "spk2", "spk3"])
    run.add_argument("--baseline", help="baseline report JSON for ratios")
    run.add_argument("--out", help="output directory (or $FLASHSCHED_OUT)")
    run.add_argument("--name", help="report file stem")
    run.set_defaults(func=cmd_run)

    sweep = sub.add_parser("sweep", help="run an axis cross-product")
    common(sweep)
    sweep.add_argument("--chips", help="comma list, e.g. 64,256,1024")
    sweep.add_argument("--sizes", help="comma list of transfer bytes")
    sweep.add_argument("--policies", help="comma list of policies")
    sweep.add_argument("--seed", type=int, default=1, help="root seed")
    sweep.add_argument("--out", help="output directory (or $FLASHSCHED_OUT)")
    sweep.set_defaults(func=cmd_sweep)

    val = sub.add_parser("validate-trace", help="parse and summarize a trace")
    val.add_argument("trace")
    val.set_defaults(func=cmd_validate_trace)

    pc = sub.add_parser("print-config", help="echo the effective config")
    common(pc)
    pc.set_defaults(func=cmd_print_config)
    return p


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except (TraceError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except CapacityError as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
