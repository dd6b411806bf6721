"""Report rendering: per-slice delay tables and CDF exports.

Mirrors the layout of the measurement campaign's summary tables: one
forwarding-delay row per slice and load with N/P50/P99 in microseconds,
one PFCP row per load with N/Mean/P99, and CDF point files suitable for
direct plotting. PFCP CDF files carry the 2 ms orchestration budget as
metadata so plots can draw the reference line.
"""

from __future__ import annotations

from pathlib import Path
from typing import Iterable

from .dataset import PairRow, PfcpRow, write_cdf_csv
from .pfcp import MsgClass
from .slices import SliceKind
from .stats import DelayStats

FORWARDING_TABLE_HEADER = "| Slice | Load | N | P50 (µs) | P99 (µs) |"
PFCP_TABLE_HEADER = "| Load | N | Mean (µs) | P99 (µs) |"

# Reference line for PFCP latency plots: the session-modification budget
# assumed by closed-loop UPF re-anchoring designs.
ORCHESTRATION_BUDGET_NS = 2_000_000

_SLICE_ORDER = {kind.value: i for i, kind in enumerate(SliceKind)}
_LOAD_ORDER = {"Light": 0, "Medium": 1, "Heavy": 2}


def _us(ns: float) -> int:
    return round(ns / 1000)


def _group_sort_key(group: tuple[str, str]):
    label, load = group
    return (_SLICE_ORDER.get(label, len(_SLICE_ORDER)), label,
            _LOAD_ORDER.get(load, len(_LOAD_ORDER)), load)


def collect_forwarding_stats(rows: Iterable[PairRow]) -> dict[tuple[str, str], DelayStats]:
    """Aggregate matched pairs into per-(slice, load) delay statistics."""
    grouped: dict[tuple[str, str], DelayStats] = {}
    for row in rows:
        key = (row.slice, row.load)
        stats = grouped.get(key)
        if stats is None:
            stats = grouped[key] = DelayStats()
        stats.observe(row.delay_ns)
    return grouped


def collect_pfcp_stats(rows: Iterable[PfcpRow],
                       include_retransmitted: bool = False,
                       msg_class: MsgClass = MsgClass.MODIFICATION,
                       ) -> dict[str, DelayStats]:
    """Aggregate PFCP transactions into per-load RTT statistics for one
    message class; retransmitted transactions are excluded by default."""
    grouped: dict[str, DelayStats] = {}
    for row in rows:
        if row.msg_class != msg_class.value:
            continue
        if row.retransmitted and not include_retransmitted:
            continue
        stats = grouped.get(row.load)
        if stats is None:
            stats = grouped[row.load] = DelayStats()
        stats.observe(row.rtt_ns)
    return grouped


def forwarding_table(grouped: dict[tuple[str, str], DelayStats]) -> str:
    lines = [FORWARDING_TABLE_HEADER, "|---|---|---:|---:|---:|"]
    if not grouped:
        lines.append("| no data | - | 0 | - | - |")
    for (label, load) in sorted(grouped, key=_group_sort_key):
        stats = grouped[(label, load)]
        if stats.count == 0:
            lines.append(f"| {label} | {load} | 0 | - | - |")
            continue
        lines.append(f"| {label} | {load} | {stats.count} "
                     f"| {_us(stats.quantile(0.50))} "
                     f"| {_us(stats.quantile(0.99))} |")
    return "\n".join(lines) + "\n"


def pfcp_table(grouped: dict[str, DelayStats]) -> str:
    lines = [PFCP_TABLE_HEADER, "|---|---:|---:|---:|"]
    if not grouped:
        lines.append("| no data | 0 | - | - |")
    order = sorted(grouped, key=lambda l: (_LOAD_ORDER.get(l, 3), l))
    for load in order:
        stats = grouped[load]
        lines.append(f"| {load} | {stats.count} | {_us(stats.mean)} "
                     f"| {_us(stats.quantile(0.99))} |")
    return "\n".join(lines) + "\n"


def write_report(out_dir: Path,
                 pair_rows: Iterable[PairRow],
                 pfcp_rows: Iterable[PfcpRow] | None = None,
                 cdf_resolution: int = 200,
                 include_retransmitted: bool = False) -> list[Path]:
    """Render report.md plus per-group CDF CSVs; returns written paths."""
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []

    forwarding = collect_forwarding_stats(pair_rows)
    sections = ["# Per-slice N3→N6 forwarding delay", "",
                forwarding_table(forwarding)]
    for (label, load), stats in sorted(forwarding.items(),
                                       key=lambda kv: _group_sort_key(kv[0])):
        if stats.count == 0:
            continue
        path = out_dir / f"forwarding_cdf_{label}_{load}.csv"
        with open(path, "w", newline="\n") as fh:
            write_cdf_csv(fh, stats.cdf_points(cdf_resolution))
        written.append(path)

    if pfcp_rows is not None:
        pfcp = collect_pfcp_stats(pfcp_rows,
                                  include_retransmitted=include_retransmitted)
        sections += ["", "# N4 PFCP session modification latency", "",
                     pfcp_table(pfcp)]
        for load, stats in sorted(pfcp.items()):
            path = out_dir / f"pfcp_cdf_Modification_{load}.csv"
            with open(path, "w", newline="\n") as fh:
                write_cdf_csv(fh, stats.cdf_points(cdf_resolution),
                              metadata={"budget_ns": ORCHESTRATION_BUDGET_NS})
            written.append(path)

    report_path = out_dir / "report.md"
    report_path.write_text("\n".join(sections), encoding="utf-8")
    written.insert(0, report_path)
    return written
