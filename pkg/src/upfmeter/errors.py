"""Exception hierarchy and process exit codes.

Every error class the toolkit raises lives here so the CLI can map each
class to a stable, distinct exit code.
"""


class UpfmeterError(Exception):
    """Base class for all toolkit errors."""


# --- wire / trace codec ---

class CodecError(UpfmeterError):
    pass


class TruncatedHeader(CodecError):
    """Buffer ends before the fixed header does."""


class UnsupportedVersion(CodecError):
    """GTP-U version nibble is not 1."""


class NotGpdu(CodecError):
    """GTP-U message is not a G-PDU (e.g. echo or error indication).

    Raised distinctly so callers can skip these without treating them
    as parse failures.
    """


class UnknownVersion(CodecError):
    """PFCP version field is not 1."""


class TruncatedPacket(CodecError):
    """Inner IP packet ends before its headers do."""


class UnsupportedIpVersion(CodecError):
    """Inner packet is not IPv4."""


class MalformedLine(CodecError):
    """Trace line does not match the event grammar. Counted, never fatal."""


class InvalidEvent(CodecError):
    """ProbeEvent fields violate the event invariants."""


# --- matcher / pfcp trackers ---

class InvalidConfig(UpfmeterError):
    pass


class WrongEventKind(UpfmeterError):
    """Event routed to a component that does not handle its point."""


class ClockRegression(UpfmeterError):
    """Flush clock moved backwards by more than the reorder slack."""


# --- statistics ---

class StatsError(UpfmeterError):
    pass


class NegativeDelay(StatsError):
    pass


class EmptyStats(StatsError):
    pass


class InvalidQuantile(StatsError):
    pass


class LayoutMismatch(StatsError):
    """Merge attempted between histograms with different bin layouts."""


# --- synthetic generator ---

class InvalidProfile(UpfmeterError):
    pass


# --- CLI / datasets / live attach ---

class SchemaError(UpfmeterError):
    """Dataset CSV has a wrong header or an unparseable row."""


class PrivilegeError(UpfmeterError):
    """Live attach requires root."""


class NamespaceNotFound(UpfmeterError):
    """Target process or its network namespace does not exist."""


class InterfaceNotFound(UpfmeterError):
    """Expected interface is absent inside the target namespace."""


class ProbeLoadError(UpfmeterError):
    """Probe object missing, unreadable, or rejected at attach time."""


# Exit code map: 0 success, 2 reserved for argparse usage errors.
EXIT_OK = 0
EXIT_ERROR = 1
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_SCHEMA = 4
EXIT_PRIVILEGE = 5
EXIT_NAMESPACE = 6
EXIT_INTERFACE = 7
EXIT_PROBE_LOAD = 8

EXIT_CODE_BY_ERROR = {
    SchemaError: EXIT_SCHEMA,
    PrivilegeError: EXIT_PRIVILEGE,
    NamespaceNotFound: EXIT_NAMESPACE,
    InterfaceNotFound: EXIT_INTERFACE,
    ProbeLoadError: EXIT_PROBE_LOAD,
}


def exit_code_for(exc: BaseException) -> int:
    """Map an exception to the CLI exit code for its error class."""
    if isinstance(exc, OSError):
        return EXIT_IO
    for cls, code in EXIT_CODE_BY_ERROR.items():
        if isinstance(exc, cls):
            return code
    if isinstance(exc, UpfmeterError):
        return EXIT_ERROR
    return EXIT_ERROR
