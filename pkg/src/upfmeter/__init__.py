"""Per-slice 5G user-plane latency measurement toolkit.

Correlates kernel probe events from each UPF network namespace into
N3-to-N6 forwarding-delay samples, pairs N4 PFCP request/response
round trips, and summarises both with mergeable streaming statistics.
A deterministic synthetic generator provides desk-scale verification
without a live core.
"""

__version__ = "0.1.0"

from .codec import (
    FiveTuple,
    FlowKey,
    GtpuHeader,
    MeasurePoint,
    PfcpHeader,
    ProbeEvent,
    emit_trace_line,
    extract_flow_key,
    flow_key_digest,
    parse_gtpu,
    parse_pfcp,
    parse_trace_line,
)
from .matcher import MatchAccounting, MatchedPair, Matcher, MatcherConfig
from .pfcp import MsgClass, PfcpTracker, PfcpTransaction
from .stats import DelayStats, HistogramLayout, merge
from .synth import (
    DelayModel,
    ImpairmentModel,
    LoadCondition,
    SliceProfile,
    generate,
    generate_pfcp,
    profile_for,
)
from .slices import SliceKind

__all__ = [name for name in dir() if not name.startswith("_")]
