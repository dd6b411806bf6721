"""Matcher behaviour: windowing, FIFO discipline, accounting, oracle."""

import random

import pytest

from upfmeter.codec import MeasurePoint, ProbeEvent, SMF_NAMESPACE
from upfmeter.errors import ClockRegression, InvalidConfig, WrongEventKind
from upfmeter.matcher import Matcher, MatcherConfig
from upfmeter.pipeline import conservation_holds

from oracle_matcher import OracleMatcher, run_both

WINDOW = 10_000_000


def m1(ts, key=1, ns="upf1", teid=7):
    return ProbeEvent(MeasurePoint.M1, ns, ts, teid=teid, flow_key=key)


def m3(ts, key=1, ns="upf1"):
    return ProbeEvent(MeasurePoint.M3, ns, ts, flow_key=key)


class TestConfig:
    def test_defaults_match_deployment(self):
        cfg = MatcherConfig()
        assert cfg.window == 10_000_000
        assert cfg.capacity == 500
        assert cfg.reorder_slack == 1_000_000

    def test_zero_capacity_rejected(self):
        with pytest.raises(InvalidConfig):
            MatcherConfig(capacity=0)

    def test_degenerate_window_allowed(self):
        # 1 ns window is valid, just useless: only zero/one-ns delays match
        cfg = MatcherConfig(window=1, reorder_slack=0)
        m = Matcher(cfg)
        assert m.on_event(m1(100)) is None
        assert m.on_event(m3(101)) is not None

    def test_slack_must_stay_below_window(self):
        with pytest.raises(InvalidConfig):
            MatcherConfig(window=1000, reorder_slack=1000)


class TestMatching:
    def test_basic_pair(self):
        m = Matcher()
        assert m.on_event(m1(1000, key=5)) is None
        pair = m.on_event(m3(1500, key=5))
        assert pair is not None
        assert pair.delay == 500
        assert pair.teid == 7
        assert pair.namespace == "upf1"

    def test_window_boundary_inclusive(self):
        m = Matcher()
        m.on_event(m1(1000))
        pair = m.on_event(m3(1000 + WINDOW))
        assert pair is not None and pair.delay == WINDOW

    def test_window_boundary_exclusive_past(self):
        m = Matcher()
        m.on_event(m1(1000))
        assert m.on_event(m3(1000 + WINDOW + 1)) is None
        m.flush(1000 + 2 * WINDOW)
        acc = m.accounting()
        assert acc.m1_expired == 1
        assert acc.m3_orphaned == 1
        assert acc.matched == 0

    def test_fifo_oldest_first_within_key(self):
        m = Matcher()
        m.on_event(m1(100, key=9, teid=1))
        m.on_event(m1(200, key=9, teid=2))
        pair = m.on_event(m3(250, key=9))
        assert pair.t_m1 == 100 and pair.teid == 1
        pair = m.on_event(m3(260, key=9))
        assert pair.t_m1 == 200 and pair.teid == 2

    def test_same_timestamp_ties_by_insertion(self):
        m = Matcher()
        m.on_event(m1(100, key=9, teid=1))
        m.on_event(m1(100, key=9, teid=2))
        assert m.on_event(m3(150, key=9)).teid == 1

    def test_keys_do_not_match_across_namespaces(self):
        m = Matcher()
        m.on_event(m1(100, key=9, ns="upf1"))
        assert m.on_event(m3(200, key=9, ns="upf2")) is None

    def test_reordered_m3_held_then_matched(self):
        m = Matcher()
        assert m.on_event(m3(1500, key=4)) is None
        pair = m.on_event(m1(1000, key=4))
        assert pair is not None and pair.delay == 500

    def test_negative_delay_never_pairs(self):
        m = Matcher()
        m.on_event(m1(2000, key=4))
        assert m.on_event(m3(1000, key=4)) is None  # held, not mispaired

    def test_capacity_eviction_counts(self):
        m = Matcher(MatcherConfig(capacity=3))
        for i in range(5):
            m.on_event(m1(1000 + i, key=100 + i))
        acc = m.accounting()
        assert acc.m1_evicted == 2
        assert acc.pending_m1 == 3
        # oldest two are gone; their M3s orphan
        assert m.on_event(m3(2000, key=100)) is None
        assert m.on_event(m3(2001, key=102)) is not None

    def test_capacity_bound_holds(self):
        m = Matcher(MatcherConfig(capacity=10))
        for i in range(200):
            m.on_event(m1(1000 + i, key=i))
            assert m.accounting().pending_m1 <= 10

    def test_wrong_event_kind(self):
        m = Matcher()
        pfcp = ProbeEvent(MeasurePoint.PFCP_SEND, SMF_NAMESPACE, 1,
                          pfcp_seq=1, pfcp_msg_type=52)
        with pytest.raises(WrongEventKind):
            m.on_event(pfcp)


class TestFlush:
    def test_empty(self):
        assert Matcher().flush(10_000_000) == []

    def test_one_stale_entry(self):
        m = Matcher()
        m.on_event(m1(1000, key=3))
        out = m.flush(1000 + WINDOW + 1)
        assert len(out) == 1
        assert out[0].flow_key == 3
        assert m.accounting().m1_expired == 1

    def test_idempotent(self):
        m = Matcher()
        m.on_event(m1(1000))
        now = 1000 + WINDOW + 1
        assert len(m.flush(now)) == 1
        assert m.flush(now) == []

    def test_exactly_window_old_survives(self):
        m = Matcher()
        m.on_event(m1(1000))
        assert m.flush(1000 + WINDOW) == []
        assert m.on_event(m3(1000 + WINDOW)) is not None

    def test_clock_regression(self):
        m = Matcher()
        m.on_event(m1(50_000_000))
        with pytest.raises(ClockRegression):
            m.flush(48_000_000)

    def test_small_regression_tolerated(self):
        m = Matcher()
        m.on_event(m1(50_000_000))
        m.flush(49_500_000)  # within reorder slack


class TestAccounting:
    def test_empty_is_all_zeros(self):
        acc = Matcher().accounting()
        assert acc == type(acc)()
        assert acc.match_rate == 0.0

    def test_lossless_run_rate_one(self):
        m = Matcher()
        for i in range(1000):
            m.on_event(m1(1_000_000 + i * 1000, key=i))
            m.on_event(m3(1_000_500 + i * 1000, key=i))
        acc = m.accounting()
        assert acc.match_rate == 1.0
        assert conservation_holds(acc)

    def test_conservation_after_noise(self):
        rng = random.Random(5)
        m = Matcher(MatcherConfig(capacity=20))
        for _ in range(5000):
            ts = rng.randrange(1, 50_000_000)
            key = rng.randrange(50)
            if rng.random() < 0.5:
                m.on_event(m1(ts, key=key))
            else:
                m.on_event(m3(ts, key=key))
        m.flush(60_000_000 + WINDOW)
        assert conservation_holds(m.accounting())

    def test_per_namespace_breakdown(self):
        m = Matcher()
        m.on_event(m1(100, ns="upf1", key=1))
        m.on_event(m3(150, ns="upf1", key=1))
        m.on_event(m1(100, ns="upf2", key=1))
        assert m.accounting_for("upf1").matched == 1
        assert m.accounting_for("upf2").pending_m1 == 1
        assert m.accounting_for("nonesuch").m1_total == 0


def _random_stream(rng, n, keys=40, namespaces=("upf1", "upf2"),
                   span=80_000_000, reorder_jitter=0):
    events = []
    for i in range(n):
        ts = rng.randrange(1, span)
        key = rng.randrange(keys)
        ns = rng.choice(namespaces)
        if rng.random() < 0.5:
            events.append((ts, i, m1(ts, key=key, ns=ns, teid=key)))
        else:
            events.append((ts, i, m3(ts, key=key, ns=ns)))
    # stream order = timestamp order with optional extra shuffling
    keyed = [(t + (rng.randint(-reorder_jitter, reorder_jitter)
                   if reorder_jitter else 0), i, e) for t, i, e in events]
    keyed.sort(key=lambda x: (x[0], x[1]))
    return [e for _, _, e in keyed]


class TestOracleEquivalence:
    @pytest.mark.parametrize("seed", range(20))
    def test_random_streams(self, seed):
        rng = random.Random(seed)
        cfg = MatcherConfig(window=WINDOW, capacity=25, reorder_slack=1_000_000)
        events = _random_stream(rng, 2000, reorder_jitter=500_000)
        got, want = run_both(events, Matcher(cfg),
                             OracleMatcher(cfg.window, cfg.capacity,
                                           cfg.reorder_slack))
        assert got == want

    def test_excess_jitter_still_equivalent(self):
        # jitter beyond the slack: matches are lost but both sides must
        # lose exactly the same ones
        rng = random.Random(99)
        cfg = MatcherConfig(window=WINDOW, capacity=25, reorder_slack=100_000)
        events = _random_stream(rng, 3000, reorder_jitter=3_000_000)
        matcher, oracle = Matcher(cfg), OracleMatcher(
            cfg.window, cfg.capacity, cfg.reorder_slack)
        got, want = run_both(events, matcher, oracle)
        assert got == want
        assert matcher.accounting() == oracle.accounting()

    def test_accounting_equivalence(self):
        rng = random.Random(1234)
        cfg = MatcherConfig(window=2_000_000, capacity=10, reorder_slack=50_000)
        events = _random_stream(rng, 4000, keys=15, span=20_000_000)
        matcher, oracle = Matcher(cfg), OracleMatcher(
            cfg.window, cfg.capacity, cfg.reorder_slack)
        got, want = run_both(events, matcher, oracle)
        assert got == want
        assert matcher.accounting() == oracle.accounting()
        assert conservation_holds(matcher.accounting())
