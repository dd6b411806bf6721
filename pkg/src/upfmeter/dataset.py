"""Dataset file schemas: matched-pair CSV, PFCP transaction CSV, CDF CSV.

All writers emit LF line endings and fixed field formatting (lowercase
fixed-width hex for teid/flow_key, plain decimal integers elsewhere) so
outputs are byte-identical across runs and platforms. Readers validate
the header and every row, raising SchemaError on any deviation.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator, TextIO

from .errors import SchemaError
from .matcher import MatchedPair
from .pfcp import MsgClass, PfcpTransaction
from .slices import slice_label

PAIR_CSV_HEADER = "slice,load,upf,teid,flow_key,t_m1_ns,t_m3_ns,delay_ns"
PFCP_CSV_HEADER = "load,msg_class,seq,t_send_ns,t_recv_ns,rtt_ns,retransmitted"
CDF_CSV_HEADER = "delay_ns,cum_fraction"


@dataclass(frozen=True)
class PairRow:
    slice: str
    load: str
    upf: str
    teid: int
    flow_key: int
    t_m1_ns: int
    t_m3_ns: int
    delay_ns: int


@dataclass(frozen=True)
class PfcpRow:
    load: str
    msg_class: str
    seq: int
    t_send_ns: int
    t_recv_ns: int
    rtt_ns: int
    retransmitted: bool


class PairCsvWriter:
    """Streaming writer for the matched-pair dataset."""

    def __init__(self, fh: TextIO, load: str):
        self._fh = fh
        self._load = load
        fh.write(PAIR_CSV_HEADER + "\n")

    def write(self, pair: MatchedPair) -> None:
        self._fh.write(
            f"{slice_label(pair.namespace)},{self._load},{pair.namespace},"
            f"{pair.teid:08x},{pair.flow_key:016x},"
            f"{pair.t_m1},{pair.t_m3},{pair.delay}\n")


class PfcpCsvWriter:
    """Streaming writer for the PFCP transaction dataset."""

    def __init__(self, fh: TextIO, load: str):
        self._fh = fh
        self._load = load
        fh.write(PFCP_CSV_HEADER + "\n")

    def write(self, txn: PfcpTransaction) -> None:
        self._fh.write(
            f"{self._load},{txn.msg_class.value},{txn.sequence},"
            f"{txn.t_send},{txn.t_recv},{txn.rtt},"
            f"{1 if txn.retransmitted else 0}\n")


def _split_row(line: str, want: int, path: str, lineno: int) -> list[str]:
    fields = line.rstrip("\n").split(",")
    if len(fields) != want:
        raise SchemaError(f"{path}:{lineno}: expected {want} fields, "
                          f"got {len(fields)}")
    return fields


def read_pair_csv(fh: TextIO, path: str = "<pairs>") -> Iterator[PairRow]:
    header = fh.readline().rstrip("\n")
    if header != PAIR_CSV_HEADER:
        raise SchemaError(f"{path}: bad pair CSV header {header!r}")
    for lineno, line in enumerate(fh, start=2):
        if not line.strip():
            continue
        f = _split_row(line, 8, path, lineno)
        try:
            yield PairRow(f[0], f[1], f[2], int(f[3], 16), int(f[4], 16),
                          int(f[5]), int(f[6]), int(f[7]))
        except ValueError as exc:
            raise SchemaError(f"{path}:{lineno}: {exc}") from exc


_MSG_CLASS_NAMES = {c.value for c in MsgClass}


def read_pfcp_csv(fh: TextIO, path: str = "<pfcp>") -> Iterator[PfcpRow]:
    header = fh.readline().rstrip("\n")
    if header != PFCP_CSV_HEADER:
        raise SchemaError(f"{path}: bad PFCP CSV header {header!r}")
    for lineno, line in enumerate(fh, start=2):
        if not line.strip():
            continue
        f = _split_row(line, 7, path, lineno)
        if f[1] not in _MSG_CLASS_NAMES:
            raise SchemaError(f"{path}:{lineno}: unknown msg_class {f[1]!r}")
        if f[6] not in ("0", "1"):
            raise SchemaError(f"{path}:{lineno}: retransmitted must be 0/1")
        try:
            yield PfcpRow(f[0], f[1], int(f[2]), int(f[3]), int(f[4]),
                          int(f[5]), f[6] == "1")
        except ValueError as exc:
            raise SchemaError(f"{path}:{lineno}: {exc}") from exc


def write_cdf_csv(fh: TextIO, points: Iterable[tuple[int, float]],
                  metadata: dict | None = None) -> None:
    """CDF export; metadata becomes `# key=value` comment lines before
    the header (used to carry plot reference lines)."""
    for key, value in (metadata or {}).items():
        fh.write(f"# {key}={value}\n")
    fh.write(CDF_CSV_HEADER + "\n")
    for delay, fraction in points:
        fh.write(f"{delay},{fraction:.9f}\n")
