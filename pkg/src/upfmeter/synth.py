"""Deterministic synthetic probe-event traces.

Models the three slices under the three load conditions and applies a
configurable impairment layer (loss, duplication, stream reordering) so
the matcher, PFCP tracker, and statistics can be verified at desk scale
against known ground truth. One seeded Mersenne Twister (random.Random)
drives everything; identical inputs give byte-identical traces.

The delay distributions are this toolkit's own modelling choice
(lognormal bodies with a Pareto tail mixture, hard-capped below the
matching window): the measured platform published no distributional
form, only per-load percentiles, so the defaults are tuned to land in
the same order of magnitude and are not calibrated findings.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from enum import Enum

from .codec import MeasurePoint, ProbeEvent, SMF_NAMESPACE, flow_key_digest
from .codec import (
    PFCP_SESSION_ESTABLISHMENT_REQUEST,
    PFCP_SESSION_MODIFICATION_REQUEST,
)
from .errors import InvalidProfile
from .matcher import MatchedPair
from .pfcp import PfcpTransaction, msg_class_for_request
from .slices import NAMESPACE_BY_SLICE, SliceKind

# Load table of the reference experiment: broadband rate, voice call
# rate, and run length.
LOAD_TABLE = {
    "Light": (5, 2),
    "Medium": (20, 4),
    "Heavy": (50, 8),
}
DEFAULT_DURATION_S = 600.0

EMBB_PAYLOAD_BYTES = 1400      # iperf3-style UDP payload
URLLC_PACKETS_PER_CALL = 3
URLLC_CALL_PACKET_GAP_NS = 20_000_000
MMTC_PACKET_RATE = 2000.0      # machine-type rate is load-independent here
MMTC_MEAN_BURST = 4
MMTC_BURST_GAP_NS = 50_000

_START_NS = 1_000_000  # keep every timestamp strictly positive


class Transport(Enum):
    UDP_CBR = "udp-cbr"
    UDP_CALLS = "udp-calls"
    TCP_LIKE = "tcp-like"


@dataclass(frozen=True)
class DelayModel:
    """Lognormal body with a Pareto tail mixture, truncated at a cap.

    mu/sigma parameterise the lognormal in ln-nanoseconds. tail_weight is
    the probability a sample comes from the Pareto component instead.
    cap_ns keeps every sample below the default matching window so a
    lossless run is fully matchable.
    """

    mu: float
    sigma: float
    tail_weight: float = 0.0
    pareto_scale: float = 300_000.0
    pareto_alpha: float = 1.5
    cap_ns: int = 9_000_000

    def __post_init__(self):
        if self.sigma <= 0 or not 0.0 <= self.tail_weight < 1.0:
            raise InvalidProfile("bad delay model parameters")
        if self.cap_ns <= 0:
            raise InvalidProfile("cap_ns must be positive")

    @classmethod
    def lognormal_with_mean(cls, mean_ns: float, sigma: float = 0.3,
                            **kwargs) -> "DelayModel":
        return cls(mu=math.log(mean_ns) - sigma * sigma / 2.0,
                   sigma=sigma, **kwargs)

    @property
    def mean_body_ns(self) -> float:
        return math.exp(self.mu + self.sigma * self.sigma / 2.0)

    def sample(self, rng: random.Random) -> int:
        while True:
            if self.tail_weight and rng.random() < self.tail_weight:
                value = self.pareto_scale * rng.paretovariate(self.pareto_alpha)
            else:
                value = rng.lognormvariate(self.mu, self.sigma)
            if value <= self.cap_ns:
                return max(0, round(value))

    def cdf(self, x: float) -> float:
        """Analytic CDF of the truncated mixture (for fidelity checks)."""
        if x >= self.cap_ns:
            return 1.0
        if x <= 0:
            return 0.0
        return self._mixture_cdf(x) / self._mixture_cdf(self.cap_ns)

    def _mixture_cdf(self, x: float) -> float:
        body = 0.5 * (1.0 + math.erf(
            (math.log(x) - self.mu) / (self.sigma * math.sqrt(2.0))))
        if not self.tail_weight:
            return body
        if x <= self.pareto_scale:
            tail = 0.0
        else:
            tail = 1.0 - (self.pareto_scale / x) ** self.pareto_alpha
        return (1.0 - self.tail_weight) * body + self.tail_weight * tail

    def quantile(self, q: float) -> float:
        """Invert the CDF by bisection (monotone, so this is exact to tol)."""
        lo, hi = 0.0, float(self.cap_ns)
        for _ in range(80):
            mid = (lo + hi) / 2.0
            if self.cdf(mid) < q:
                lo = mid
            else:
                hi = mid
        return (lo + hi) / 2.0


# Qualitative per-slice defaults: medians of tens of microseconds, tails
# from hundreds of microseconds into the millisecond range; the
# machine-type slice gets the widest tail (TCP-like behaviour).
DEFAULT_DELAY_MODELS = {
    SliceKind.EMBB: DelayModel(mu=math.log(40_000), sigma=0.8,
                               tail_weight=0.02, pareto_scale=300_000.0,
                               pareto_alpha=1.5),
    SliceKind.URLLC: DelayModel(mu=math.log(65_000), sigma=0.5,
                                tail_weight=0.01, pareto_scale=250_000.0,
                                pareto_alpha=2.0),
    SliceKind.MMTC: DelayModel(mu=math.log(22_000), sigma=0.6,
                               tail_weight=0.05, pareto_scale=400_000.0,
                               pareto_alpha=1.2),
}

DEFAULT_PFCP_RTT_MODEL = DelayModel.lognormal_with_mean(125_000.0, sigma=0.3)


@dataclass(frozen=True)
class LoadCondition:
    name: str
    embb_rate_mbps: int
    urllc_calls_per_s: int
    duration_s: float = DEFAULT_DURATION_S

    def __post_init__(self):
        expected = LOAD_TABLE.get(self.name)
        if expected is None:
            raise InvalidProfile(f"unknown load {self.name!r}")
        if (self.embb_rate_mbps, self.urllc_calls_per_s) != expected:
            raise InvalidProfile(
                f"{self.name} load must use {expected}, got "
                f"({self.embb_rate_mbps}, {self.urllc_calls_per_s})")
        if self.duration_s <= 0:
            raise InvalidProfile("duration_s must be positive")

    @classmethod
    def named(cls, name: str, duration_s: float = DEFAULT_DURATION_S) -> "LoadCondition":
        if name not in LOAD_TABLE:
            raise InvalidProfile(f"unknown load {name!r}")
        mbps, calls = LOAD_TABLE[name]
        return cls(name, mbps, calls, duration_s)


@dataclass(frozen=True)
class SliceProfile:
    name: SliceKind
    transport: Transport
    packet_rate: float
    flows: int
    delay_model: DelayModel
    inner_length: int
    base_teid: int

    def __post_init__(self):
        if self.packet_rate <= 0:
            raise InvalidProfile("packet_rate must be positive")
        if self.flows < 1:
            raise InvalidProfile("flows must be >= 1")
        if not 28 <= self.inner_length <= 0xFFFF:
            raise InvalidProfile("inner_length out of range")


def profile_for(kind: SliceKind, load: LoadCondition) -> SliceProfile:
    """Default profile for a slice under a load condition."""
    if kind is SliceKind.EMBB:
        rate = load.embb_rate_mbps * 1e6 / (8 * EMBB_PAYLOAD_BYTES)
        return SliceProfile(kind, Transport.UDP_CBR, rate, flows=2,
                            delay_model=DEFAULT_DELAY_MODELS[kind],
                            inner_length=EMBB_PAYLOAD_BYTES + 28,
                            base_teid=0x100)
    if kind is SliceKind.URLLC:
        rate = load.urllc_calls_per_s * URLLC_PACKETS_PER_CALL
        return SliceProfile(kind, Transport.UDP_CALLS, rate, flows=2,
                            delay_model=DEFAULT_DELAY_MODELS[kind],
                            inner_length=200, base_teid=0x200)
    return SliceProfile(kind, Transport.TCP_LIKE, MMTC_PACKET_RATE, flows=4,
                        delay_model=DEFAULT_DELAY_MODELS[kind],
                        inner_length=1480, base_teid=0x300)


@dataclass(frozen=True)
class ImpairmentModel:
    m3_loss_prob: float = 0.0
    m1_loss_prob: float = 0.0
    reorder_prob: float = 0.0
    reorder_jitter: int = 0
    duplicate_prob: float = 0.0

    def __post_init__(self):
        for name in ("m3_loss_prob", "m1_loss_prob", "reorder_prob",
                     "duplicate_prob"):
            p = getattr(self, name)
            if not 0.0 <= p < 1.0:
                raise InvalidProfile(f"{name} must be in [0, 1), got {p}")
        if self.reorder_jitter < 0:
            raise InvalidProfile("reorder_jitter must be >= 0")


NO_IMPAIRMENTS = ImpairmentModel()

_SLICE_INDEX = {SliceKind.EMBB: 1, SliceKind.URLLC: 2, SliceKind.MMTC: 3}
_PROTO_BY_TRANSPORT = {Transport.UDP_CBR: 17, Transport.UDP_CALLS: 17,
                       Transport.TCP_LIKE: 6}
_DPORT_BY_TRANSPORT = {Transport.UDP_CBR: 5201, Transport.UDP_CALLS: 4000,
                       Transport.TCP_LIKE: 80}


@dataclass
class SynthTrace:
    """A generated stream plus its ground truth.

    events are in stream order (timestamp order perturbed by the reorder
    model); truth lists every pair whose M1 and M3 events both survived
    the impairment layer.
    """

    namespace: str
    events: list[ProbeEvent] = field(default_factory=list)
    truth: list[MatchedPair] = field(default_factory=list)
    stream_keys: list[int] = field(default_factory=list)


@dataclass
class SynthPfcpTrace:
    events: list[ProbeEvent] = field(default_factory=list)
    truth: list[PfcpTransaction] = field(default_factory=list)
    stream_keys: list[int] = field(default_factory=list)


def _arrival_times(profile: SliceProfile, duration_ns: int, n: int,
                   rng: random.Random) -> list[int]:
    if profile.transport is Transport.UDP_CBR:
        period = duration_ns / n
        return [_START_NS + round(i * period) for i in range(n)]
    if profile.transport is Transport.UDP_CALLS:
        per_call = URLLC_PACKETS_PER_CALL
        n_calls = (n + per_call - 1) // per_call
        call_period = duration_ns / n_calls
        times = []
        for c in range(n_calls):
            start = _START_NS + round(c * call_period)
            for k in range(min(per_call, n - len(times))):
                times.append(start + k * URLLC_CALL_PACKET_GAP_NS)
        return times
    # TCP-like: bursts of random size at uniform start times.
    sizes = []
    assigned = 0
    while assigned < n:
        burst = min(rng.randint(1, 2 * MMTC_MEAN_BURST - 1), n - assigned)
        sizes.append(burst)
        assigned += burst
    starts = sorted(_START_NS + rng.randrange(duration_ns) for _ in sizes)
    times = []
    for start, size in zip(starts, sizes):
        times.extend(start + k * MMTC_BURST_GAP_NS for k in range(size))
    return times


def generate(profile: SliceProfile, load: LoadCondition,
             impairments: ImpairmentModel = NO_IMPAIRMENTS,
             seed: int = 0) -> SynthTrace:
    """Generate one slice's probe-event stream under a load condition.

    Every logical packet yields an M1 event at its arrival time and,
    unless lost, an M3 event offset by a delay sample. The packet count
    is exactly round(packet_rate * duration), so the realised rate always
    sits within one packet of the configured one.
    """
    rng = random.Random(seed)
    namespace = NAMESPACE_BY_SLICE[profile.name]
    duration_ns = round(load.duration_s * 1e9)
    n = round(profile.packet_rate * load.duration_s)
    if n <= 0:
        raise InvalidProfile("profile/load yields no packets")
    arrivals = _arrival_times(profile, duration_ns, n, rng)

    s_idx = _SLICE_INDEX[profile.name]
    proto = _PROTO_BY_TRANSPORT[profile.transport]
    dport = _DPORT_BY_TRANSPORT[profile.transport]
    dst = (10 << 24) | (70 << 16) | (s_idx << 8) | 1
    idents = [0] * profile.flows

    trace = SynthTrace(namespace=namespace)
    keyed: list[tuple[int, int, ProbeEvent]] = []
    emit_seq = 0

    def push(event: ProbeEvent):
        nonlocal emit_seq
        key = event.timestamp
        if impairments.reorder_prob and rng.random() < impairments.reorder_prob:
            key += rng.randint(-impairments.reorder_jitter,
                               impairments.reorder_jitter)
        keyed.append((max(key, 1), emit_seq, event))
        emit_seq += 1

    for t_m1 in arrivals:
        flow = rng.randrange(profile.flows)
        idents[flow] = (idents[flow] + 1) & 0xFFFF
        src = (10 << 24) | (60 << 16) | (s_idx << 8) | (flow + 1)
        digest = flow_key_digest(src, dst, proto, 40000 + flow, dport,
                                 idents[flow], profile.inner_length)
        teid = profile.base_teid + flow
        delay = profile.delay_model.sample(rng)
        t_m3 = t_m1 + delay

        keep_m1 = not (impairments.m1_loss_prob
                       and rng.random() < impairments.m1_loss_prob)
        keep_m3 = not (impairments.m3_loss_prob
                       and rng.random() < impairments.m3_loss_prob)
        m1 = m3 = None
        if keep_m1:
            m1 = ProbeEvent(MeasurePoint.M1, namespace, t_m1,
                            teid=teid, flow_key=digest)
            push(m1)
        if keep_m3:
            m3 = ProbeEvent(MeasurePoint.M3, namespace, t_m3, flow_key=digest)
            push(m3)
        if keep_m1 and keep_m3:
            trace.truth.append(MatchedPair(namespace, teid, digest,
                                           t_m1, t_m3, delay))
        if impairments.duplicate_prob and rng.random() < impairments.duplicate_prob:
            dup = m1 if (m1 is not None and (m3 is None or rng.random() < 0.5)) else m3
            if dup is not None:
                push(dup)

    keyed.sort(key=lambda item: (item[0], item[1]))
    trace.events = [e for _, _, e in keyed]
    trace.stream_keys = [k for k, _, _ in keyed]
    return trace


def generate_pfcp(load: LoadCondition,
                  rtt_model: DelayModel = DEFAULT_PFCP_RTT_MODEL,
                  rate: float = 0.1,
                  retransmit_prob: float = 0.02,
                  response_loss_prob: float = 0.0,
                  establishment_fraction: float = 0.25,
                  seed: int = 0) -> SynthPfcpTrace:
    """Generate paired P4 send/recv events with occasional retransmissions.

    The default RTT model's mean is 125 microseconds. A zero rate yields
    an empty stream.
    """
    if rate < 0:
        raise InvalidProfile("rate must be >= 0")
    rng = random.Random(seed)
    duration_ns = round(load.duration_s * 1e9)
    n = round(rate * load.duration_s)
    trace = SynthPfcpTrace()
    if n == 0:
        return trace

    keyed: list[tuple[int, int, ProbeEvent]] = []
    emit_seq = 0

    def push(event: ProbeEvent):
        nonlocal emit_seq
        keyed.append((event.timestamp, emit_seq, event))
        emit_seq += 1

    period = duration_ns / n
    for i in range(n):
        seq = (i + 1) & 0xFFFFFF
        t_send = _START_NS + round(i * period) + rng.randrange(1000)
        req_mt = (PFCP_SESSION_ESTABLISHMENT_REQUEST
                  if rng.random() < establishment_fraction
                  else PFCP_SESSION_MODIFICATION_REQUEST)
        rtt = max(1, rtt_model.sample(rng))
        retransmitted = rng.random() < retransmit_prob
        lost = response_loss_prob and rng.random() < response_loss_prob

        push(ProbeEvent(MeasurePoint.PFCP_SEND, SMF_NAMESPACE, t_send,
                        pfcp_seq=seq, pfcp_msg_type=req_mt))
        if retransmitted:
            push(ProbeEvent(MeasurePoint.PFCP_SEND, SMF_NAMESPACE,
                            t_send + max(1, rtt // 2),
                            pfcp_seq=seq, pfcp_msg_type=req_mt))
        if not lost:
            t_recv = t_send + rtt
            push(ProbeEvent(MeasurePoint.PFCP_RECV, SMF_NAMESPACE, t_recv,
                            pfcp_seq=seq, pfcp_msg_type=req_mt + 1))
            trace.truth.append(PfcpTransaction(
                sequence=seq, msg_class=msg_class_for_request(req_mt),
                t_send=t_send, t_recv=t_recv, rtt=rtt,
                retransmitted=retransmitted))

    keyed.sort(key=lambda item: (item[0], item[1]))
    trace.events = [e for _, _, e in keyed]
    trace.stream_keys = [k for k, _, _ in keyed]
    return trace


def merge_streams(*traces) -> list[ProbeEvent]:
    """Interleave generated streams into one global stream, preserving
    each stream's internal (possibly perturbed) order."""
    keyed = []
    for t_idx, trace in enumerate(traces):
        keyed.extend((key, t_idx, pos, event)
                     for pos, (key, event) in enumerate(zip(trace.stream_keys,
                                                            trace.events)))
    keyed.sort(key=lambda item: (item[0], item[1], item[2]))
    return [event for _, _, _, event in keyed]
