"""Live probe attachment inside UPF network namespaces.

Container interfaces are invisible from the host namespace, so every tc
command is wrapped in `nsenter -t <pid> -n`. The TUN device index is not
stable across UPF restarts; interfaces are therefore re-resolved from
the target's /proc view at attach time, never cached between runs.

Everything else in the toolkit runs unprivileged; this module is the one
place that needs root, and it fails fast with distinct errors for each
precondition so the CLI can map them to distinct exit codes.
"""

from __future__ import annotations

import os
import signal
import subprocess
from dataclasses import dataclass
from pathlib import Path

from .config import AttachConfig, TRACE_BUFFER_KB
from .errors import (
    InterfaceNotFound,
    NamespaceNotFound,
    PrivilegeError,
    ProbeLoadError,
)
from .pipeline import ReplayPipeline

TRACEFS = Path("/sys/kernel/debug/tracing")


def require_root() -> None:
    if os.geteuid() != 0:
        raise PrivilegeError("live attach needs root (tc/nsenter/tracefs)")


def require_probe_object(path: Path | None) -> Path:
    if path is None:
        raise ProbeLoadError("no probe object configured")
    try:
        with open(path, "rb") as fh:
            magic = fh.read(4)
    except OSError as exc:
        raise ProbeLoadError(f"cannot read probe object {path}: {exc}") from exc
    if magic != b"\x7fELF":
        raise ProbeLoadError(f"{path} is not an ELF object")
    return path


def namespace_proc(pid: int) -> Path:
    """The /proc entry proving the target process and its netns exist."""
    ns_path = Path(f"/proc/{pid}/ns/net")
    if not ns_path.exists():
        raise NamespaceNotFound(f"pid {pid} has no network namespace")
    return ns_path


def interfaces_of(pid: int) -> list[str]:
    """Interface names inside the target's namespace, read through its
    /proc view (no nsenter needed just to look)."""
    dev = Path(f"/proc/{pid}/net/dev")
    try:
        lines = dev.read_text().splitlines()
    except OSError as exc:
        raise NamespaceNotFound(f"cannot read {dev}: {exc}") from exc
    names = []
    for line in lines[2:]:
        name, _, _ = line.partition(":")
        name = name.strip()
        if name:
            names.append(name)
    return names


def resolve_interface(pid: int, name: str) -> str:
    names = interfaces_of(pid)
    if name not in names:
        raise InterfaceNotFound(
            f"interface {name!r} not present in pid {pid} namespace "
            f"(have: {', '.join(names)})")
    return name


@dataclass
class _Attachment:
    namespace: str
    pid: int
    device: str
    section: str


class ProbeSession:
    """Installs the M1/M3 classifier pair in each UPF namespace and
    streams the kernel trace output until interrupted."""

    def __init__(self, config: AttachConfig, runner=None):
        self.config = config
        self._run = runner or self._run_checked
        self.attachments: list[_Attachment] = []

    @staticmethod
    def _run_checked(argv: list[str]) -> None:
        proc = subprocess.run(argv, capture_output=True, text=True)
        if proc.returncode != 0:
            raise ProbeLoadError(
                f"{' '.join(argv)} failed ({proc.returncode}): "
                f"{proc.stderr.strip()}")

    def _ns_tc(self, pid: int, *tc_args: str) -> None:
        self._run(["nsenter", "-t", str(pid), "-n", "tc", *tc_args])

    def prepare(self) -> None:
        """Run every precondition check before touching any namespace."""
        require_root()
        self.obj = require_probe_object(self.config.probe_object)
        if not self.config.upf_pids:
            raise NamespaceNotFound("no UPF process ids configured")
        for pid in self.config.upf_pids.values():
            namespace_proc(pid)
            resolve_interface(pid, self.config.n3_interface)
            resolve_interface(pid, self.config.tun_interface)

    def attach_all(self) -> None:
        obj = str(self.obj)
        for ns_name, pid in self.config.upf_pids.items():
            # The TUN index changes on every UPF restart; resolve now.
            n3 = resolve_interface(pid, self.config.n3_interface)
            tun = resolve_interface(pid, self.config.tun_interface)
            for dev, section in ((n3, f"m1_{ns_name}"), (tun, f"m3_{ns_name}")):
                self._ns_tc(pid, "qdisc", "replace", "dev", dev, "clsact")
                self._ns_tc(pid, "filter", "replace", "dev", dev, "ingress",
                            "bpf", "da", "obj", obj, "sec", section)
                self.attachments.append(_Attachment(ns_name, pid, dev, section))

    def detach_all(self) -> None:
        for att in reversed(self.attachments):
            try:
                self._ns_tc(att.pid, "filter", "del", "dev", att.device,
                            "ingress")
            except ProbeLoadError:
                pass  # already gone; keep detaching the rest
        self.attachments.clear()

    def configure_trace_buffer(self) -> None:
        try:
            (TRACEFS / "buffer_size_kb").write_text(f"{TRACE_BUFFER_KB}\n")
        except OSError as exc:
            raise ProbeLoadError(f"cannot size trace buffer: {exc}") from exc

    def stream_into(self, pipeline: ReplayPipeline) -> None:
        """Blocking read of trace_pipe into the replay pipeline; returns
        when interrupted."""
        pipe = TRACEFS / "trace_pipe"
        try:
            fh = open(pipe, "r", errors="replace")
        except OSError as exc:
            raise ProbeLoadError(f"cannot open {pipe}: {exc}") from exc
        with fh:
            try:
                pipeline.feed_lines(fh)
            except KeyboardInterrupt:
                pass


def run_attach(config: AttachConfig, pipeline: ReplayPipeline) -> dict:
    """Full live-capture sequence: check, attach, stream, detach, flush."""
    session = ProbeSession(config)
    session.prepare()
    session.configure_trace_buffer()
    session.attach_all()

    def _interrupt(signum, frame):
        raise KeyboardInterrupt

    previous = signal.getsignal(signal.SIGTERM)
    signal.signal(signal.SIGTERM, _interrupt)
    try:
        session.stream_into(pipeline)
    finally:
        signal.signal(signal.SIGTERM, previous)
        session.detach_all()
    return pipeline.finalize()
