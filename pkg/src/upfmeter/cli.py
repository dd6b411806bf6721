"""Command-line surface.

Subcommands:
  replay  - correlate existing trace files into datasets
  synth   - generate a synthetic experiment, replay it, self-check
  stats   - summarise datasets as JSON
  report  - render Markdown tables and CDF exports from datasets
  attach  - install live probes in UPF namespaces (root only)

Exit codes: 0 success, 1 generic failure, 2 usage, 3 I/O, 4 dataset
schema, 5 privilege, 6 namespace, 7 interface, 8 probe load.
"""

from __future__ import annotations

import argparse
import json
import sys
from collections import Counter
from pathlib import Path

from . import __version__
from .attach import run_attach
from .codec import emit_trace_line
from .config import (
    ExperimentConfig,
    load_config_file,
    parse_duration_ns,
    parse_slices,
)
from .dataset import (
    PairCsvWriter,
    PfcpCsvWriter,
    read_pair_csv,
    read_pfcp_csv,
)
from .errors import (
    EXIT_OK,
    UpfmeterError,
    exit_code_for,
)
from .pipeline import PAIRS_CSV, PFCP_CSV, ReplayPipeline
from .report import collect_forwarding_stats, collect_pfcp_stats, write_report
from .synth import ImpairmentModel, generate, generate_pfcp, merge_streams, profile_for

TRACE_TXT = "trace.txt"
TRUTH_PAIRS_CSV = "truth_pairs.csv"
TRUTH_PFCP_CSV = "truth_pfcp.csv"


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, help="INI config file")
    parser.add_argument("--out", type=Path, help="output directory")
    parser.add_argument("--window", help="matching window (default 10ms)")
    parser.add_argument("--capacity", type=int,
                        help="per-namespace M1 buffer entries (default 500)")
    parser.add_argument("--reorder-slack",
                        help="stream reorder tolerance (default 1ms)")
    parser.add_argument("--seed", type=int, help="generator seed")
    parser.add_argument("--include-retransmitted", action="store_true",
                        help="keep retransmitted PFCP transactions in stats")


def _build_config(args: argparse.Namespace) -> ExperimentConfig:
    cfg = ExperimentConfig()
    if args.config:
        cfg = load_config_file(args.config, cfg)
    if args.out is not None:
        cfg.out_dir = args.out
    if args.window is not None:
        cfg.window_ns = parse_duration_ns(args.window)
    if args.capacity is not None:
        cfg.capacity = args.capacity
    if args.reorder_slack is not None:
        cfg.reorder_slack_ns = parse_duration_ns(args.reorder_slack)
    if args.seed is not None:
        cfg.seed = args.seed
    for attr in ("load", "duration", "slices"):
        value = getattr(args, attr, None)
        if value is None:
            continue
        if attr == "duration":
            cfg.duration_s = parse_duration_ns(value, "s") / 1e9
        elif attr == "slices":
            cfg.slices = parse_slices(value)
        else:
            cfg.load = value
    return cfg


def _print_accounting(summary: dict) -> None:
    m = summary["matcher"]
    print(f"m1={m['m1_total']} m3={m['m3_total']} matched={m['matched']} "
          f"evicted={m['m1_evicted']} expired={m['m1_expired']} "
          f"orphaned={m['m3_orphaned']} pending={m['pending_m1']}+{m['pending_m3']} "
          f"malformed={m['malformed']} match_rate={m['match_rate']:.4f}")
    p = summary["pfcp"]
    if p["requests"]:
        print(f"pfcp requests={p['requests']} transactions={p['transactions']} "
              f"retransmits={p['retransmits']} orphans={p['orphans']} "
              f"lost={p['lost']} pending={p['pending']}")


def cmd_replay(args: argparse.Namespace) -> int:
    cfg = _build_config(args)
    for path in args.traces:
        if not path.is_file():
            raise FileNotFoundError(f"trace file {path} not found")
    pipeline = ReplayPipeline(cfg.out_dir, load_label=args.load or "unknown",
                              matcher_config=cfg.matcher_config(),
                              include_retransmitted=args.include_retransmitted)
    try:
        for path in args.traces:
            pipeline.feed_file(path)
    except KeyboardInterrupt:
        print("interrupted; writing partial datasets", file=sys.stderr)
    summary = pipeline.finalize()
    _print_accounting(summary)
    return EXIT_OK


def _csv_body(path: Path) -> Counter:
    with open(path) as fh:
        next(fh, None)
        return Counter(line for line in fh if line.strip())


def _self_check(name: str, truth_path: Path, got_path: Path,
                expect_exact: bool) -> bool:
    truth = _csv_body(truth_path)
    got = _csv_body(got_path)
    missing = sum((truth - got).values())
    extra = sum((got - truth).values())
    status = "ok" if not (missing or extra) else "divergent"
    print(f"self-check {name}: truth={sum(truth.values())} "
          f"got={sum(got.values())} missing={missing} extra={extra} [{status}]")
    if expect_exact and status != "ok":
        print(f"error: {name} diverged from ground truth on a lossless run",
              file=sys.stderr)
        return False
    return True


def cmd_synth(args: argparse.Namespace) -> int:
    cfg = _build_config(args)
    impairments = ImpairmentModel(
        m3_loss_prob=args.m3_loss,
        m1_loss_prob=args.m1_loss,
        reorder_prob=args.reorder_prob,
        reorder_jitter=parse_duration_ns(args.reorder_jitter)
        if args.reorder_jitter else 0,
        duplicate_prob=args.duplicate_prob,
    )
    load = cfg.load_condition()
    out = cfg.out_dir
    out.mkdir(parents=True, exist_ok=True)

    traces = []
    for idx, kind in enumerate(cfg.slices):
        profile = profile_for(kind, load)
        traces.append(generate(profile, load, impairments,
                               seed=cfg.seed * 1000 + idx))
    pfcp_trace = generate_pfcp(load, rate=args.pfcp_rate,
                               seed=cfg.seed * 1000 + 99)
    events = merge_streams(*traces, pfcp_trace)

    with open(out / TRACE_TXT, "w", newline="\n") as fh:
        for event in events:
            fh.write(emit_trace_line(event))
    with open(out / TRUTH_PAIRS_CSV, "w", newline="\n") as fh:
        writer = PairCsvWriter(fh, load.name)
        for trace in traces:
            for pair in trace.truth:
                writer.write(pair)
    with open(out / TRUTH_PFCP_CSV, "w", newline="\n") as fh:
        writer = PfcpCsvWriter(fh, load.name)
        for txn in pfcp_trace.truth:
            writer.write(txn)

    pipeline = ReplayPipeline(out, load_label=load.name,
                              matcher_config=cfg.matcher_config(),
                              include_retransmitted=args.include_retransmitted)
    pipeline.feed_file(out / TRACE_TXT)
    summary = pipeline.finalize()
    _print_accounting(summary)

    lossless = impairments == ImpairmentModel()
    ok = _self_check("pairs", out / TRUTH_PAIRS_CSV, out / PAIRS_CSV, lossless)
    ok &= _self_check("pfcp", out / TRUTH_PFCP_CSV, out / PFCP_CSV, lossless)
    if not summary["matcher"]["conservation_ok"]:
        print("error: accounting conservation identity violated", file=sys.stderr)
        ok = False
    return EXIT_OK if ok else 1


def cmd_stats(args: argparse.Namespace) -> int:
    with open(args.pairs) as fh:
        grouped = collect_forwarding_stats(read_pair_csv(fh, str(args.pairs)))
    doc = {
        "forwarding": {f"{label}/{load}": stats.summary()
                       for (label, load), stats in sorted(grouped.items())},
    }
    if args.pfcp:
        with open(args.pfcp) as fh:
            pfcp = collect_pfcp_stats(
                read_pfcp_csv(fh, str(args.pfcp)),
                include_retransmitted=args.include_retransmitted)
        doc["pfcp_modification"] = {load: stats.summary()
                                    for load, stats in sorted(pfcp.items())}
    json.dump(doc, sys.stdout, indent=2, sort_keys=True)
    print()
    return EXIT_OK


def cmd_report(args: argparse.Namespace) -> int:
    cfg = _build_config(args)
    with open(args.pairs) as fh:
        pair_rows = list(read_pair_csv(fh, str(args.pairs)))
    pfcp_rows = None
    if args.pfcp:
        with open(args.pfcp) as fh:
            pfcp_rows = list(read_pfcp_csv(fh, str(args.pfcp)))
    written = write_report(cfg.out_dir, pair_rows, pfcp_rows,
                           cdf_resolution=args.cdf_resolution,
                           include_retransmitted=args.include_retransmitted)
    print((cfg.out_dir / "report.md").read_text(), end="")
    print(f"wrote {len(written)} files under {cfg.out_dir}", file=sys.stderr)
    return EXIT_OK


def cmd_attach(args: argparse.Namespace) -> int:
    cfg = _build_config(args)
    if args.probe_obj is not None:
        cfg.attach.probe_object = args.probe_obj
    if args.n3_iface:
        cfg.attach.n3_interface = args.n3_iface
    if args.tun_iface:
        cfg.attach.tun_interface = args.tun_iface
    for spec in args.upf_pid or []:
        name, _, pid = spec.partition("=")
        if not pid.isdigit():
            raise UpfmeterError(f"--upf-pid wants name=pid, got {spec!r}")
        cfg.attach.upf_pids[name] = int(pid)
    pipeline = ReplayPipeline(cfg.out_dir, load_label=args.load or "live",
                              matcher_config=cfg.matcher_config())
    summary = run_attach(cfg.attach, pipeline)
    _print_accounting(summary)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="upfmeter",
        description="Per-slice UPF forwarding-delay and PFCP latency toolkit")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("replay", help="correlate trace files into datasets")
    _add_common(p)
    p.add_argument("traces", nargs="+", type=Path)
    p.add_argument("--load", help="load label for dataset rows")
    p.set_defaults(func=cmd_replay)

    p = sub.add_parser("synth", help="synthetic experiment with self-check")
    _add_common(p)
    p.add_argument("--load", choices=["Light", "Medium", "Heavy"])
    p.add_argument("--duration", help="experiment length (default 600s)")
    p.add_argument("--slices", help="comma list: eMBB,URLLC,mMTC")
    p.add_argument("--m1-loss", type=float, default=0.0)
    p.add_argument("--m3-loss", type=float, default=0.0)
    p.add_argument("--reorder-prob", type=float, default=0.0)
    p.add_argument("--reorder-jitter", help="e.g. 400us")
    p.add_argument("--duplicate-prob", type=float, default=0.0)
    p.add_argument("--pfcp-rate", type=float, default=0.1,
                   help="PFCP transactions per second")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("stats", help="summarise datasets as JSON")
    _add_common(p)
    p.add_argument("pairs", type=Path, help="matched-pair CSV")
    p.add_argument("--pfcp", type=Path, help="PFCP transaction CSV")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("report", help="Markdown tables and CDF exports")
    _add_common(p)
    p.add_argument("pairs", type=Path, help="matched-pair CSV")
    p.add_argument("--pfcp", type=Path, help="PFCP transaction CSV")
    p.add_argument("--cdf-resolution", type=int, default=200)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("attach", help="live probe capture (root)")
    _add_common(p)
    p.add_argument("--probe-obj", type=Path, help="compiled TC-BPF object")
    p.add_argument("--upf-pid", action="append",
                   help="namespace=pid, e.g. upf1=1234 (repeatable)")
    p.add_argument("--n3-iface", help="N3-facing interface (default eth0)")
    p.add_argument("--tun-iface", help="TUN interface (default ogstun)")
    p.add_argument("--load", help="load label for dataset rows")
    p.set_defaults(func=cmd_attach)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (UpfmeterError, OSError) as exc:
        print(f"upfmeter: error: {exc}", file=sys.stderr)
        return exit_code_for(exc)


if __name__ == "__main__":
    sys.exit(main())
