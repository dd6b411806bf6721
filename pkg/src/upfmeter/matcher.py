"""Stream correlation of M1/M3 events into forwarding-delay pairs.

Each UPF namespace gets an independent bounded buffer of unmatched M1
events (a 500-entry ring by default) and a short hold queue for M3
events that arrive in the stream before their M1 (per-CPU trace buffers
interleave, so small stream-order inversions are normal even on one
monotonic clock).

Matching rule, applied identically by the brute-force oracle in the test
suite: an M3 pairs with the oldest live M1 in the same namespace with an
equal flow key whose delay t_m3 - t_m1 lies in [0, window], oldest
meaning minimum t_m1 with ties broken by insertion order. An arriving M1
is first offered to held M3 events under the same rule (minimum t_m3,
ties by hold order) and is buffered only if none accepts.

Expiry discipline: the matcher tracks a stream watermark (largest
timestamp seen). While streaming, an M1 entry expires once
watermark - t_m1 > window + reorder_slack, the earliest point at which
no in-slack future M3 can still pair with it; a held M3 is orphaned once
watermark - t_m3 > reorder_slack. An explicit flush(now) checkpoint
tightens the M1 horizon to now - t_m1 > window.

A matcher instance is single-writer: deliver events in stream order from
one context. Distinct instances may run concurrently.
"""

from __future__ import annotations

import heapq
from collections import defaultdict, deque
from dataclasses import dataclass

from .codec import MeasurePoint, ProbeEvent
from .errors import ClockRegression, InvalidConfig, WrongEventKind


@dataclass(frozen=True)
class MatcherConfig:
    """Knobs for the correlation window and buffer sizing.

    Defaults mirror the production deployment: 10 ms window, 500-entry
    per-namespace ring, 1 ms reorder slack.
    """

    window: int = 10_000_000
    capacity: int = 500
    reorder_slack: int = 1_000_000

    def __post_init__(self):
        if self.window <= 0:
            raise InvalidConfig(f"window must be > 0, got {self.window}")
        if self.capacity <= 0:
            raise InvalidConfig(f"capacity must be > 0, got {self.capacity}")
        if not 0 <= self.reorder_slack < self.window:
            raise InvalidConfig(
                f"reorder_slack must be in [0, window), got {self.reorder_slack}")


@dataclass(frozen=True)
class MatchedPair:
    """One N3-to-N6 forwarding-delay sample. TEID comes from the M1 side;
    the M3 view has no tunnel header left to read it from."""

    namespace: str
    teid: int
    flow_key: int
    t_m1: int
    t_m3: int
    delay: int


@dataclass(frozen=True)
class Expiration:
    point: MeasurePoint
    namespace: str
    flow_key: int
    timestamp: int


@dataclass(frozen=True)
class MatchAccounting:
    """Conservation ledger over everything the matcher has seen.

    Identities (checked by the test suite after every run):
      matched + m1_evicted + m1_expired + pending_m1 == m1_total
      matched + m3_orphaned + pending_m3 == m3_total
    """

    m1_total: int = 0
    m3_total: int = 0
    matched: int = 0
    m1_evicted: int = 0
    m1_expired: int = 0
    m3_orphaned: int = 0
    pending_m1: int = 0
    pending_m3: int = 0
    malformed: int = 0

    @property
    def match_rate(self) -> float:
        # Fraction of observation opportunities completed: one-sided probe
        # loss must show up here, so the denominator is the larger side.
        # All counters are reported, so other conventions stay recomputable.
        base = max(self.m1_total, self.m3_total)
        return self.matched / base if base else 0.0


class _Entry:
    __slots__ = ("seq", "t", "teid", "key", "alive")

    def __init__(self, seq, t, key, teid=None):
        self.seq = seq
        self.t = t
        self.key = key
        self.teid = teid
        self.alive = True

    def __lt__(self, other):  # heap tie-break only
        return self.seq < other.seq


class _NamespaceState:
    """Buffers and counters for one UPF namespace."""

    __slots__ = ("by_key", "fifo", "heap", "live",
                 "held_by_key", "held_heap", "held_live", "counters")

    def __init__(self):
        self.by_key: dict[int, list[_Entry]] = defaultdict(list)
        self.fifo: deque[_Entry] = deque()
        self.heap: list[tuple[int, _Entry]] = []
        self.live = 0
        self.held_by_key: dict[int, list[_Entry]] = defaultdict(list)
        self.held_heap: list[tuple[int, _Entry]] = []
        self.held_live = 0
        self.counters = {
            "m1_total": 0, "m3_total": 0, "matched": 0,
            "m1_evicted": 0, "m1_expired": 0, "m3_orphaned": 0,
        }

    def kill(self, entry: _Entry, held: bool) -> None:
        entry.alive = False
        table = self.held_by_key if held else self.by_key
        bucket = table[entry.key]
        bucket.remove(entry)
        if not bucket:
            del table[entry.key]
        if held:
            self.held_live -= 1
        else:
            self.live -= 1


class Matcher:
    """Single-writer streaming matcher over M1/M3 probe events."""

    def __init__(self, config: MatcherConfig | None = None):
        self.config = config or MatcherConfig()
        self._ns: dict[str, _NamespaceState] = {}
        self._watermark = 0
        self._seq = 0
        self._malformed = 0

    def _state(self, namespace: str) -> _NamespaceState:
        st = self._ns.get(namespace)
        if st is None:
            st = self._ns[namespace] = _NamespaceState()
        return st

    def count_malformed(self, n: int = 1) -> None:
        """Fold the feeding pipeline's malformed-line count into accounting."""
        self._malformed += n

    def on_event(self, event: ProbeEvent) -> MatchedPair | None:
        """Process one M1 or M3 event; returns a pair when one completes."""
        if event.point not in (MeasurePoint.M1, MeasurePoint.M3):
            raise WrongEventKind(f"matcher cannot take {event.point.value} events")
        if event.timestamp > self._watermark:
            self._watermark = event.timestamp
        w = self.config.window
        slack = self.config.reorder_slack
        # Streaming expiry with the slack margin: entries past this horizon
        # cannot pair with any event still within the reorder tolerance.
        self._expire(self._watermark - w - slack, self._watermark - slack, None)

        st = self._state(event.namespace)
        if event.point is MeasurePoint.M1:
            st.counters["m1_total"] += 1
            held = self._take_held(st, event)
            if held is not None:
                st.counters["matched"] += 1
                return MatchedPair(event.namespace, event.teid, event.flow_key,
                                   event.timestamp, held.t, held.t - event.timestamp)
            if st.live == self.config.capacity:
                self._evict_oldest(st)
            self._seq += 1
            entry = _Entry(self._seq, event.timestamp, event.flow_key, event.teid)
            st.by_key[event.flow_key].append(entry)
            st.fifo.append(entry)
            heapq.heappush(st.heap, (entry.t, entry))
            st.live += 1
            # Matched/expired entries linger in the fifo until eviction
            # would pop them; compact before dead weight accumulates.
            if len(st.fifo) > 2 * self.config.capacity + 16:
                st.fifo = deque(e for e in st.fifo if e.alive)
            return None

        st.counters["m3_total"] += 1
        m1 = self._take_buffered(st, event)
        if m1 is not None:
            st.counters["matched"] += 1
            return MatchedPair(event.namespace, m1.teid, event.flow_key,
                               m1.t, event.timestamp, event.timestamp - m1.t)
        self._seq += 1
        entry = _Entry(self._seq, event.timestamp, event.flow_key)
        st.held_by_key[event.flow_key].append(entry)
        heapq.heappush(st.held_heap, (entry.t, entry))
        st.held_live += 1
        return None

    def _take_buffered(self, st: _NamespaceState, m3: ProbeEvent) -> _Entry | None:
        candidates = st.by_key.get(m3.flow_key)
        if not candidates:
            return None
        w = self.config.window
        best = None
        for e in candidates:
            if 0 <= m3.timestamp - e.t <= w:
                if best is None or (e.t, e.seq) < (best.t, best.seq):
                    best = e
        if best is not None:
            st.kill(best, held=False)
        return best

    def _take_held(self, st: _NamespaceState, m1: ProbeEvent) -> _Entry | None:
        candidates = st.held_by_key.get(m1.flow_key)
        if not candidates:
            return None
        w = self.config.window
        best = None
        for e in candidates:
            if 0 <= e.t - m1.timestamp <= w:
                if best is None or (e.t, e.seq) < (best.t, best.seq):
                    best = e
        if best is not None:
            st.kill(best, held=True)
        return best

    def _evict_oldest(self, st: _NamespaceState) -> None:
        while st.fifo:
            entry = st.fifo.popleft()
            if entry.alive:
                st.kill(entry, held=False)
                st.counters["m1_evicted"] += 1
                return

    def _expire(self, m1_horizon: int, m3_horizon: int,
                out: list[Expiration] | None) -> None:
        # Strictly older-than: an entry at exactly the horizon must stay
        # matchable (the window boundary is inclusive).
        for name, st in self._ns.items():
            heap = st.heap
            while heap:
                t, entry = heap[0]
                if entry.alive and t >= m1_horizon:
                    break
                heapq.heappop(heap)
                if entry.alive:
                    st.kill(entry, held=False)
                    st.counters["m1_expired"] += 1
                    if out is not None:
                        out.append(Expiration(MeasurePoint.M1, name, entry.key, t))
            heap = st.held_heap
            while heap:
                t, entry = heap[0]
                if entry.alive and t >= m3_horizon:
                    break
                heapq.heappop(heap)
                if entry.alive:
                    st.kill(entry, held=True)
                    st.counters["m3_orphaned"] += 1
                    if out is not None:
                        out.append(Expiration(MeasurePoint.M3, name, entry.key, t))

    def flush(self, now: int) -> list[Expiration]:
        """Checkpoint the stream clock at `now` and expire what it strands.

        M1 entries older than the window are counted expired; held M3
        events older than the reorder slack are counted orphaned. Flushing
        twice at the same clock is a no-op the second time.
        """
        if now < self._watermark - self.config.reorder_slack:
            raise ClockRegression(
                f"flush clock {now} behind watermark {self._watermark} "
                f"by more than reorder_slack")
        if now > self._watermark:
            self._watermark = now
        out: list[Expiration] = []
        self._expire(now - self.config.window, now - self.config.reorder_slack, out)
        return out

    def accounting(self) -> MatchAccounting:
        """Counter snapshot across all namespaces."""
        totals = {k: 0 for k in ("m1_total", "m3_total", "matched",
                                 "m1_evicted", "m1_expired", "m3_orphaned")}
        pending_m1 = pending_m3 = 0
        for st in self._ns.values():
            for k in totals:
                totals[k] += st.counters[k]
            pending_m1 += st.live
            pending_m3 += st.held_live
        return MatchAccounting(pending_m1=pending_m1, pending_m3=pending_m3,
                               malformed=self._malformed, **totals)

    def accounting_for(self, namespace: str) -> MatchAccounting:
        st = self._ns.get(namespace)
        if st is None:
            return MatchAccounting(malformed=0)
        return MatchAccounting(pending_m1=st.live, pending_m3=st.held_live,
                               malformed=0, **st.counters)

    @property
    def namespaces(self) -> list[str]:
        return sorted(self._ns)
