"""Streaming ingestion: trace lines in, datasets out.

One pipeline owns a matcher, a PFCP tracker, per-namespace delay
statistics, and the open dataset writers. Input is consumed line by
line, so arbitrarily large traces replay in bounded memory. Malformed
lines are counted and skipped, never fatal.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Iterable

from .codec import MeasurePoint, ProbeEvent, parse_trace_line
from .dataset import PairCsvWriter, PfcpCsvWriter
from .errors import MalformedLine
from .matcher import MatchAccounting, Matcher, MatcherConfig
from .pfcp import DEFAULT_TIMEOUT_NS, MsgClass, PfcpTracker
from .stats import DelayStats

PAIRS_CSV = "pairs.csv"
PFCP_CSV = "pfcp.csv"
ACCOUNTING_JSON = "accounting.json"
STATS_JSON = "stats.json"


def conservation_holds(acc: MatchAccounting) -> bool:
    """The two counter identities every run must satisfy."""
    return (acc.matched + acc.m1_evicted + acc.m1_expired + acc.pending_m1
            == acc.m1_total
            and acc.matched + acc.m3_orphaned + acc.pending_m3
            == acc.m3_total)


class ReplayPipeline:
    """Feeds probe events through matching, pairing, and statistics."""

    def __init__(self, out_dir: Path, load_label: str = "unknown",
                 matcher_config: MatcherConfig | None = None,
                 include_retransmitted: bool = False):
        self.out_dir = Path(out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.load_label = load_label
        self.matcher = Matcher(matcher_config)
        self.pfcp = PfcpTracker()
        self.include_retransmitted = include_retransmitted
        self.forwarding_stats: dict[str, DelayStats] = {}
        self.pfcp_stats: dict[MsgClass, DelayStats] = {}
        self.malformed = 0
        self._watermark = 0
        self._pairs_fh = open(self.out_dir / PAIRS_CSV, "w", newline="\n")
        self._pairs = PairCsvWriter(self._pairs_fh, load_label)
        self._pfcp_fh = open(self.out_dir / PFCP_CSV, "w", newline="\n")
        self._pfcp_csv = PfcpCsvWriter(self._pfcp_fh, load_label)
        self._finalized = False

    def feed_event(self, event: ProbeEvent) -> None:
        if event.timestamp > self._watermark:
            self._watermark = event.timestamp
        if event.point in (MeasurePoint.M1, MeasurePoint.M3):
            pair = self.matcher.on_event(event)
            if pair is not None:
                self._pairs.write(pair)
                stats = self.forwarding_stats.get(pair.namespace)
                if stats is None:
                    stats = self.forwarding_stats[pair.namespace] = DelayStats()
                stats.observe(pair.delay)
            return
        txn = self.pfcp.on_event(event)
        if txn is not None:
            self._pfcp_csv.write(txn)
            if txn.retransmitted and not self.include_retransmitted:
                return
            stats = self.pfcp_stats.get(txn.msg_class)
            if stats is None:
                stats = self.pfcp_stats[txn.msg_class] = DelayStats()
            stats.observe(txn.rtt)

    def feed_lines(self, lines: Iterable[str]) -> None:
        for line in lines:
            if not line.strip():
                continue
            try:
                event = parse_trace_line(line)
            except MalformedLine:
                self.malformed += 1
                continue
            self.feed_event(event)

    def feed_file(self, path: Path) -> None:
        with open(path, "r", errors="replace") as fh:
            self.feed_lines(fh)

    def finalize(self) -> dict:
        """Drain buffers, write accounting and statistics summaries, and
        close the dataset files. Returns the accounting summary dict."""
        if self._finalized:
            raise RuntimeError("pipeline already finalized")
        self._finalized = True
        cfg = self.matcher.config
        drain_clock = self._watermark + cfg.window + cfg.reorder_slack + 1
        self.matcher.flush(drain_clock)
        self.matcher.count_malformed(self.malformed)
        self.pfcp.timeout_sweep(self._watermark + DEFAULT_TIMEOUT_NS + 1)
        self._pairs_fh.close()
        self._pfcp_fh.close()

        acc = self.matcher.accounting()
        summary = {
            "load": self.load_label,
            "matcher": {
                "m1_total": acc.m1_total,
                "m3_total": acc.m3_total,
                "matched": acc.matched,
                "m1_evicted": acc.m1_evicted,
                "m1_expired": acc.m1_expired,
                "m3_orphaned": acc.m3_orphaned,
                "pending_m1": acc.pending_m1,
                "pending_m3": acc.pending_m3,
                "malformed": acc.malformed,
                "match_rate": acc.match_rate,
                "conservation_ok": conservation_holds(acc),
            },
            "per_namespace": {
                ns: {
                    "matched": a.matched,
                    "m1_total": a.m1_total,
                    "m3_total": a.m3_total,
                    "match_rate": a.match_rate,
                }
                for ns in self.matcher.namespaces
                for a in [self.matcher.accounting_for(ns)]
            },
            "pfcp": {
                k: getattr(self.pfcp.accounting(), k)
                for k in ("requests", "retransmits", "recvs", "transactions",
                          "orphans", "lost", "pending")
            },
        }
        with open(self.out_dir / ACCOUNTING_JSON, "w") as fh:
            json.dump(summary, fh, indent=2, sort_keys=True)
            fh.write("\n")

        stats_doc = {
            "forwarding": {ns: st.summary()
                           for ns, st in sorted(self.forwarding_stats.items())},
            "pfcp": {cls.value: st.summary()
                     for cls, st in sorted(self.pfcp_stats.items(),
                                           key=lambda kv: kv[0].value)},
        }
        with open(self.out_dir / STATS_JSON, "w") as fh:
            json.dump(stats_doc, fh, indent=2, sort_keys=True)
            fh.write("\n")
        return summary
