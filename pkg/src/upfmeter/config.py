"""Experiment configuration: CLI defaults, duration units, config files.

Config files are line-oriented `key = value` under section headers
(configparser INI dialect):

    [experiment]
    mode = synth
    load = Light
    slices = eMBB,URLLC,mMTC
    seed = 42
    duration = 30s

    [matcher]
    window = 10ms
    capacity = 500
    reorder_slack = 1ms

    [attach]
    probe_object = probes/upf_measure.o
    n3_interface = eth0
    tun_interface = ogstun
    upf1_pid = 1234
    upf2_pid = 1235
    upf3_pid = 1236

Durations accept ns/us/ms/s suffixes; a bare number means milliseconds
for window/reorder_slack and seconds for duration.
"""

from __future__ import annotations

import configparser
import re
from dataclasses import dataclass, field
from pathlib import Path

from .errors import InvalidConfig
from .matcher import MatcherConfig
from .slices import SliceKind
from .synth import DEFAULT_DURATION_S, ImpairmentModel, LoadCondition

_DURATION_RE = re.compile(r"\s*([0-9]+(?:\.[0-9]+)?)\s*(ns|us|ms|s)?\s*\Z")
_SCALE = {"ns": 1, "us": 1_000, "ms": 1_000_000, "s": 1_000_000_000}

# Kernel trace buffer sizing for live capture; the stream overflows under
# heavy broadband load with the stock 7 MB buffer.
TRACE_BUFFER_KB = 32 * 1024


def parse_duration_ns(text: str, default_unit: str = "ms") -> int:
    """Parse `10ms` / `500us` / `2.5s` / bare numbers into nanoseconds."""
    m = _DURATION_RE.match(str(text))
    if not m:
        raise InvalidConfig(f"bad duration {text!r}")
    value = float(m.group(1))
    unit = m.group(2) or default_unit
    return round(value * _SCALE[unit])


_SLICE_BY_NAME = {kind.value.lower(): kind for kind in SliceKind}


def parse_slices(text: str) -> list[SliceKind]:
    kinds = []
    for token in text.split(","):
        token = token.strip()
        if not token:
            continue
        kind = _SLICE_BY_NAME.get(token.lower())
        if kind is None:
            raise InvalidConfig(f"unknown slice {token!r}")
        kinds.append(kind)
    if not kinds:
        raise InvalidConfig("no slices selected")
    return kinds


@dataclass
class AttachConfig:
    probe_object: Path | None = None
    n3_interface: str = "eth0"
    tun_interface: str = "ogstun"
    upf_pids: dict[str, int] = field(default_factory=dict)


@dataclass
class ExperimentConfig:
    """Everything one CLI invocation needs; built from defaults, then the
    config file, then command-line flags (later wins)."""

    mode: str = "synth"
    load: str = "Light"
    slices: list[SliceKind] = field(
        default_factory=lambda: list(SliceKind))
    seed: int = 0
    duration_s: float = DEFAULT_DURATION_S
    inputs: list[Path] = field(default_factory=list)
    out_dir: Path = Path("out")
    window_ns: int = MatcherConfig.window
    capacity: int = MatcherConfig.capacity
    reorder_slack_ns: int = MatcherConfig.reorder_slack
    impairments: ImpairmentModel = field(default_factory=ImpairmentModel)
    pfcp_rate: float = 0.1
    attach: AttachConfig = field(default_factory=AttachConfig)

    def matcher_config(self) -> MatcherConfig:
        return MatcherConfig(window=self.window_ns, capacity=self.capacity,
                             reorder_slack=self.reorder_slack_ns)

    def load_condition(self) -> LoadCondition:
        return LoadCondition.named(self.load, duration_s=self.duration_s)


def load_config_file(path: Path, into: ExperimentConfig | None = None) -> ExperimentConfig:
    """Fold a config file into an ExperimentConfig."""
    cfg = into or ExperimentConfig()
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise FileNotFoundError(f"config file {path} not readable")

    if parser.has_section("experiment"):
        sec = parser["experiment"]
        cfg.mode = sec.get("mode", cfg.mode)
        cfg.load = sec.get("load", cfg.load)
        if "slices" in sec:
            cfg.slices = parse_slices(sec["slices"])
        cfg.seed = sec.getint("seed", cfg.seed)
        if "duration" in sec:
            cfg.duration_s = parse_duration_ns(sec["duration"], "s") / 1e9
        if "out" in sec:
            cfg.out_dir = Path(sec["out"])

    if parser.has_section("matcher"):
        sec = parser["matcher"]
        if "window" in sec:
            cfg.window_ns = parse_duration_ns(sec["window"])
        if "reorder_slack" in sec:
            cfg.reorder_slack_ns = parse_duration_ns(sec["reorder_slack"])
        cfg.capacity = sec.getint("capacity", cfg.capacity)

    if parser.has_section("impairments"):
        sec = parser["impairments"]
        cfg.impairments = ImpairmentModel(
            m3_loss_prob=sec.getfloat("m3_loss", 0.0),
            m1_loss_prob=sec.getfloat("m1_loss", 0.0),
            reorder_prob=sec.getfloat("reorder", 0.0),
            reorder_jitter=parse_duration_ns(sec.get("reorder_jitter", "0ns")),
            duplicate_prob=sec.getfloat("duplicate", 0.0),
        )

    if parser.has_section("attach"):
        sec = parser["attach"]
        if "probe_object" in sec:
            cfg.attach.probe_object = Path(sec["probe_object"])
        cfg.attach.n3_interface = sec.get("n3_interface", cfg.attach.n3_interface)
        cfg.attach.tun_interface = sec.get("tun_interface", cfg.attach.tun_interface)
        for key in sec:
            if key.endswith("_pid"):
                cfg.attach.upf_pids[key[:-4]] = sec.getint(key)

    return cfg
