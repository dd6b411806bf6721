"""Slice archetypes and their UPF namespace assignments.

One dedicated UPF per slice, mirroring the measured deployment: upf1
carries broadband, upf2 voice, upf3 machine-type traffic.
"""

from enum import Enum


class SliceKind(Enum):
    EMBB = "eMBB"
    URLLC = "URLLC"
    MMTC = "mMTC"


NAMESPACE_BY_SLICE = {
    SliceKind.EMBB: "upf1",
    SliceKind.URLLC: "upf2",
    SliceKind.MMTC: "upf3",
}

SLICE_BY_NAMESPACE = {ns: kind for kind, ns in NAMESPACE_BY_SLICE.items()}


def slice_label(namespace: str) -> str:
    """Slice name for a UPF namespace, or the namespace itself if unknown."""
    kind = SLICE_BY_NAMESPACE.get(namespace)
    return kind.value if kind else namespace
