#!/usr/bin/env python3
"""Static checks on the compiled TC classifier object.

Verifies, per program section:
  - all six expected sections exist and carry whole 8-byte instructions;
  - instruction count stays under a fixed bound (per-packet work is
    straight-line and small);
  - every packet-data load is preceded by a bounds comparison against
    data_end (linear taint scan: registers loaded from __sk_buff.data /
    .data_end are tracked through moves and pointer arithmetic);
  - both helper calls the emit path needs are present (ktime_get_ns,
    trace_printk);
  - every exit returns 0 (TC_ACT_OK): the probes must never alter
    packet fate;
  - a GPL license section exists (trace_printk requires it).

This is a pre-verifier lint: the kernel verifier remains the authority
at load time, but these checks run on any build host with no BPF
support at all.

Usage: check_probe_obj.py upf_measure.o [--max-insns N]
"""

from __future__ import annotations

import argparse
import struct
import sys

EXPECTED_SECTIONS = ("m1_upf1", "m1_upf2", "m1_upf3",
                     "m3_upf1", "m3_upf2", "m3_upf3")

SKB_DATA_OFF = 76
SKB_DATA_END_OFF = 80

BPF_LDX_MEM = {0x61, 0x69, 0x71, 0x79}   # LDX|MEM {W,H,B,DW}
BPF_JMP_COND = {0x1d, 0x2d, 0x3d, 0xad, 0xbd, 0x5d,   # reg-reg compares
                0x6d, 0x7d, 0xcd, 0xdd}
BPF_MOV_REG = {0xbf, 0xbc}               # mov64/mov32 reg
BPF_ALU_PTR = {0x0f, 0x07, 0x1f, 0x17}   # add/sub reg/imm (64-bit)
BPF_CALL = 0x85
BPF_EXIT = 0x95
BPF_MOV_IMM = {0xb7, 0xb4}

HELPER_KTIME_GET_NS = 5
HELPER_TRACE_PRINTK = 6


def read_sections(path: str) -> dict[str, bytes]:
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != b"\x7fELF" or blob[4] != 2:
        raise SystemExit(f"{path}: not an ELF64 object")
    shoff, = struct.unpack_from("<Q", blob, 0x28)
    shentsize, shnum, shstrndx = struct.unpack_from("<HHH", blob, 0x3A)

    def header(i):
        base = shoff + i * shentsize
        name_off, _, _, _, offset, size = struct.unpack_from(
            "<IIQQQQ", blob, base)
        return name_off, offset, size

    _, str_off, str_size = header(shstrndx)
    strtab = blob[str_off:str_off + str_size]

    sections = {}
    for i in range(shnum):
        name_off, offset, size = header(i)
        end = strtab.index(b"\x00", name_off)
        name = strtab[name_off:end].decode()
        sections[name] = blob[offset:offset + size]
    return sections


def decode(code: bytes):
    if len(code) % 8:
        raise SystemExit("section size is not a multiple of 8")
    out = []
    for i in range(0, len(code), 8):
        opcode, regs, off, imm = struct.unpack_from("<BBhi", code, i)
        out.append((opcode, regs & 0x0F, regs >> 4, off, imm))
    return out


class SectionReport:
    def __init__(self, name, insns):
        self.name = name
        self.insns = insns
        self.problems: list[str] = []

    def check(self):
        # taint: which registers currently hold packet data / data_end
        pkt = set()
        end = set()
        ctx = {1}  # r1 is the context at entry
        bounds_checks = 0
        packet_loads = 0
        helpers = set()
        last_r0_imm = None
        exits_ok = True

        for idx, (op, dst, src, off, imm) in enumerate(self.insns):
            if op in BPF_LDX_MEM:
                if src in ctx and off == SKB_DATA_OFF:
                    pkt.add(dst)
                    end.discard(dst)
                    continue
                if src in ctx and off == SKB_DATA_END_OFF:
                    end.add(dst)
                    pkt.discard(dst)
                    continue
                if src in pkt:
                    packet_loads += 1
                    if bounds_checks == 0:
                        self.problems.append(
                            f"insn {idx}: packet load before any "
                            f"data_end bounds check")
                pkt.discard(dst)
                end.discard(dst)
                ctx.discard(dst)
            elif op in BPF_MOV_REG:
                for group in (pkt, end, ctx):
                    if src in group:
                        group.add(dst)
                        break
                else:
                    pkt.discard(dst)
                    end.discard(dst)
                    ctx.discard(dst)
            elif op in BPF_ALU_PTR:
                # pointer arithmetic keeps the taint of the base register
                if dst not in pkt and dst not in end:
                    ctx.discard(dst)
            elif op in BPF_JMP_COND:
                involved = {dst, src}
                if involved & end and (involved & pkt or involved & end):
                    bounds_checks += 1
            elif op in BPF_MOV_IMM:
                if dst == 0:
                    last_r0_imm = imm
                else:
                    pkt.discard(dst)
                    end.discard(dst)
                    ctx.discard(dst)
            elif op == BPF_CALL:
                helpers.add(imm)
                # calls clobber r0-r5
                for reg in range(6):
                    pkt.discard(reg)
                    end.discard(reg)
                    ctx.discard(reg)
                last_r0_imm = None
            elif op == BPF_EXIT:
                if last_r0_imm != 0:
                    exits_ok = False
                    self.problems.append(
                        f"insn {idx}: exit without r0 = 0 (TC_ACT_OK)")

        if packet_loads == 0:
            self.problems.append("no packet loads found (wrong section?)")
        if bounds_checks == 0:
            self.problems.append("no data_end bounds checks found")
        if HELPER_KTIME_GET_NS not in helpers:
            self.problems.append("missing bpf_ktime_get_ns call")
        if HELPER_TRACE_PRINTK not in helpers:
            self.problems.append("missing bpf_trace_printk call")
        return (packet_loads, bounds_checks, exits_ok)


def main() -> int:
    parser = argparse.ArgumentParser()
    parser.add_argument("object")
    parser.add_argument("--max-insns", type=int, default=160)
    args = parser.parse_args()

    sections = read_sections(args.object)
    failures = 0

    license_blob = sections.get("license", b"")
    if not license_blob.startswith(b"GPL"):
        print("FAIL license: missing GPL license section")
        failures += 1

    for name in EXPECTED_SECTIONS:
        if name not in sections:
            print(f"FAIL {name}: section missing")
            failures += 1
            continue
        insns = decode(sections[name])
        report = SectionReport(name, insns)
        loads, checks, _ = report.check()
        if len(insns) > args.max_insns:
            report.problems.append(
                f"{len(insns)} insns exceeds bound {args.max_insns}")
        if report.problems:
            failures += 1
            for problem in report.problems:
                print(f"FAIL {name}: {problem}")
        else:
            print(f"OK   {name}: {len(insns)} insns, {loads} packet loads, "
                  f"{checks} bounds checks")

    if failures:
        print(f"{failures} section(s) failed")
        return 1
    print("all probe sections pass static checks")
    return 0


if __name__ == "__main__":
    sys.exit(main())
