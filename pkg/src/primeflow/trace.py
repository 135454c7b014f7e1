"""Packet trace ingest (CSV, classic pcap) and synthetic heavy-tailed traces."""

from __future__ import annotations

import csv
import ipaddress
import logging
import struct
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, NamedTuple, Optional

import numpy as np

from .flow import FlowKey, PacketRecord

log = logging.getLogger(__name__)

CSV_HEADER = ("ts_us", "src_ip", "dst_ip", "src_port", "dst_port", "proto")


class TraceError(Exception):
    pass


class MalformedRow(TraceError):
    def __init__(self, line: int, reason: str):
        super().__init__(f"line {line}: {reason}")
        self.line = line


class NonMonotonicTimestamp(TraceError):
    def __init__(self, line: int, ts: int, previous: int):
        super().__init__(f"line {line}: timestamp {ts} precedes {previous}")
        self.line = line


class BadMagic(TraceError):
    pass


class Truncated(TraceError):
    pass


class UnsupportedLinkType(TraceError):
    pass


def _check_order(records: Iterable[tuple[int, PacketRecord]], on_disorder: str) -> Iterator[PacketRecord]:
    if on_disorder not in ("reject", "clamp"):
        raise ValueError(f"on_disorder must be 'reject' or 'clamp', not {on_disorder!r}")
    last = None
    for line, rec in records:
        if last is not None and rec.ts < last:
            if on_disorder == "reject":
                raise NonMonotonicTimestamp(line, rec.ts, last)
            rec = PacketRecord(rec.key, last)
        last = rec.ts
        yield rec


def _limited(it: Iterator[PacketRecord], limit: Optional[int]) -> Iterator[PacketRecord]:
    if limit is None:
        yield from it
        return
    if limit < 1:
        raise ValueError("limit must be >= 1")
    for i, rec in enumerate(it):
        if i >= limit:
            return
        yield rec


# ---------------------------------------------------------------- CSV


def _parse_row(line: int, row: list[str]) -> PacketRecord:
    if len(row) != len(CSV_HEADER):
        raise MalformedRow(line, f"expected {len(CSV_HEADER)} fields, got {len(row)}")
    try:
        ts = int(row[0])
        if ts < 0 or ts >= 1 << 64:
            raise ValueError(f"timestamp {ts} out of range")
        key = FlowKey.checked(row[1], row[2], int(row[3]), int(row[4]), int(row[5]))
    except ValueError as exc:
        raise MalformedRow(line, str(exc)) from None
    return PacketRecord(key, ts)


def read_csv_trace(
    path, limit: Optional[int] = None, on_disorder: str = "reject"
) -> Iterator[PacketRecord]:
    """Yield packets from a canonical CSV trace in file order."""

    def rows():
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or tuple(header) != CSV_HEADER:
                raise MalformedRow(1, f"header must be {','.join(CSV_HEADER)}")
            for row in reader:
                yield reader.line_num, _parse_row(reader.line_num, row)

    return _limited(_check_order(rows(), on_disorder), limit)


def write_csv_trace(path, records: Iterable[PacketRecord]) -> int:
    n = 0
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for key, ts in records:
            writer.writerow(
                (
                    ts,
                    ipaddress.IPv4Address(key.src_ip),
                    ipaddress.IPv4Address(key.dst_ip),
                    key.src_port,
                    key.dst_port,
                    key.protocol,
                )
            )
            n += 1
    return n


# ---------------------------------------------------------------- pcap

PCAP_MAGIC = 0xA1B2C3D4
LINKTYPE_ETHERNET = 1
_ETHERTYPE_IPV4 = 0x0800
_TCP, _UDP = 6, 17


class PcapReader:
    """Iterates a classic libpcap file (microsecond resolution, Ethernet).

    Frames that are not IPv4 TCP/UDP, or are too short to carry the ports,
    are skipped and counted in ``skipped``.
    """

    def __init__(self, path, limit: Optional[int] = None, on_disorder: str = "reject"):
        self.path = Path(path)
        self.limit = limit
        self.on_disorder = on_disorder
        self.skipped = 0

    def __iter__(self) -> Iterator[PacketRecord]:
        return _limited(_check_order(self._frames(), self.on_disorder), self.limit)

    def _frames(self):
        with open(self.path, "rb") as fh:
            head = fh.read(24)
            if len(head) < 24:
                raise Truncated("pcap global header shorter than 24 bytes")
            magic_le = struct.unpack("<I", head[:4])[0]
            if magic_le == PCAP_MAGIC:
                endian = "<"
            elif magic_le == 0xD4C3B2A1:
                endian = ">"
            else:
                raise BadMagic(f"unrecognized pcap magic 0x{magic_le:08x}")
            linktype = struct.unpack(endian + "I", head[20:24])[0]
            if linktype != LINKTYPE_ETHERNET:
                raise UnsupportedLinkType(f"link type {linktype}")
            rec_hdr = struct.Struct(endian + "IIII")
            index = 0
            while True:
                hdr = fh.read(16)
                if not hdr:
                    return
                index += 1
                if len(hdr) < 16:
                    raise Truncated(f"packet {index}: record header cut short")
                sec, usec, incl, _orig = rec_hdr.unpack(hdr)
                data = fh.read(incl)
                if len(data) < incl:
                    raise Truncated(f"packet {index}: expected {incl} bytes, got {len(data)}")
                key = _parse_frame(data)
                if key is None:
                    self.skipped += 1
                    continue
                yield index, PacketRecord(key, sec * 1_000_000 + usec)


def _parse_frame(frame: bytes) -> Optional[FlowKey]:
    if len(frame) < 14 + 20:
        return None
    if struct.unpack_from(">H", frame, 12)[0] != _ETHERTYPE_IPV4:
        return None
    ver_ihl = frame[14]
    if ver_ihl >> 4 != 4:
        return None
    ihl = (ver_ihl & 0x0F) * 4
    proto = frame[14 + 9]
    if proto not in (_TCP, _UDP) or ihl < 20:
        return None
    frag = struct.unpack_from(">H", frame, 14 + 6)[0]
    if frag & 0x1FFF:
        return None  # non-first fragment: no transport header
    l4 = 14 + ihl
    if len(frame) < l4 + 4:
        return None
    src, dst = struct.unpack_from(">II", frame, 14 + 12)
    sport, dport = struct.unpack_from(">HH", frame, l4)
    return FlowKey(src, dst, sport, dport, proto)


def read_pcap_trace(path, limit: Optional[int] = None, on_disorder: str = "reject") -> PcapReader:
    return PcapReader(path, limit, on_disorder)


# ---------------------------------------------------------------- synthetic


@dataclass(frozen=True)
class SyntheticSpec:
    """Parameters of a synthetic trace.

    Flow popularity follows a Zipf law over ``flow_count`` ranks.  With
    ``locality`` > 0 each flow's packets cluster around a random point of
    the trace (Gaussian spread, as a fraction of trace length); with
    ``locality`` = 0 packets are drawn i.i.d.
    """

    flow_count: int
    zipf_exponent: float
    packet_count: int
    seed: int = 0
    locality: float = 0.0
    single_packet_fraction_target: Optional[float] = None

    def __post_init__(self):
        if self.flow_count < 1:
            raise ValueError("flow_count must be >= 1")
        if self.zipf_exponent <= 0:
            raise ValueError("zipf_exponent must be > 0")
        if self.packet_count < 0:
            raise ValueError("packet_count must be >= 0")
        if self.locality < 0:
            raise ValueError("locality must be >= 0")
        t = self.single_packet_fraction_target
        if t is not None and not 0.0 <= t <= 1.0:
            raise ValueError("single_packet_fraction_target must lie in [0, 1]")


# Reference trace used by the acceptance suite and the harness defaults.
REFERENCE_TRACE = SyntheticSpec(
    flow_count=1_000_000,
    zipf_exponent=1.0,
    packet_count=1_000_000,
    seed=20190527,
    locality=0.05,
)


def _random_keys(rng: np.random.Generator, count: int) -> list[FlowKey]:
    keys: list[FlowKey] = []
    seen: set[FlowKey] = set()
    while len(keys) < count:
        need = count - len(keys)
        ips = rng.integers(0, 1 << 32, size=(need, 2), dtype=np.uint64).tolist()
        ports = rng.integers(0, 1 << 16, size=(need, 2)).tolist()
        protos = rng.choice([_TCP, _UDP], size=need, p=[0.8, 0.2]).tolist()
        for (s, d), (sp, dp), p in zip(ips, ports, protos):
            k = FlowKey(s, d, sp, dp, p)
            if k not in seen:
                seen.add(k)
                keys.append(k)
    return keys


def generate_synthetic(spec: SyntheticSpec) -> list[PacketRecord]:
    """Deterministic synthetic trace; timestamps are 0, 1, 2, ... microseconds."""
    rng = np.random.default_rng(spec.seed)
    n = spec.packet_count
    if n == 0:
        return []
    weights = np.arange(1, spec.flow_count + 1, dtype=np.float64) ** -spec.zipf_exponent
    weights /= weights.sum()
    ranks = rng.choice(spec.flow_count, size=n, p=weights)
    if spec.locality > 0:
        centers = rng.random(spec.flow_count)
        position = centers[ranks] + rng.normal(0.0, spec.locality, n)
        ranks = ranks[np.argsort(position, kind="stable")]
    used, dense = np.unique(ranks, return_inverse=True)
    keys = _random_keys(rng, len(used))
    trace = [PacketRecord(keys[i], ts) for ts, i in enumerate(dense.tolist())]
    if spec.single_packet_fraction_target is not None:
        achieved = describe_trace(trace).single_packet_fraction
        log.info(
            "single-packet flow fraction %.4f (target %.4f)",
            achieved,
            spec.single_packet_fraction_target,
        )
    return trace


class TraceStats(NamedTuple):
    packets: int
    distinct_flows: int
    single_packet_flows: int

    @property
    def single_packet_fraction(self) -> float:
        return self.single_packet_flows / self.distinct_flows if self.distinct_flows else 0.0


def describe_trace(records: Iterable[PacketRecord]) -> TraceStats:
    counts = Counter(key for key, _ in records)
    return TraceStats(
        sum(counts.values()), len(counts), sum(1 for c in counts.values() if c == 1)
    )


# ---------------------------------------------------------------- sources


@dataclass(frozen=True)
class TraceSource:
    """Where packets come from: ``csv`` or ``pcap`` (``path``) or ``synthetic`` (``synthetic``)."""

    kind: str
    path: Optional[str] = None
    synthetic: Optional[SyntheticSpec] = None
    limit: Optional[int] = None
    on_disorder: str = "reject"

    def __post_init__(self):
        if self.kind not in ("csv", "pcap", "synthetic"):
            raise ValueError(f"unknown trace kind {self.kind!r}")
        if self.kind == "synthetic" and self.synthetic is None:
            raise ValueError("synthetic source needs a SyntheticSpec")
        if self.kind != "synthetic" and not self.path:
            raise ValueError(f"{self.kind} source needs a path")
        if self.limit is not None and self.limit < 1:
            raise ValueError("limit must be >= 1")

    @classmethod
    def from_path(cls, path, **kw) -> "TraceSource":
        suffix = Path(path).suffix.lower()
        kind = "pcap" if suffix in (".pcap", ".cap") else "csv"
        return cls(kind, path=str(path), **kw)

    @property
    def label(self) -> str:
        if self.kind == "synthetic":
            s = self.synthetic
            return f"synthetic:F{s.flow_count}:z{s.zipf_exponent:g}:N{s.packet_count}:loc{s.locality:g}:s{s.seed}"
        return str(self.path)

    def open(self) -> Iterator[PacketRecord]:
        if self.kind == "csv":
            return read_csv_trace(self.path, self.limit, self.on_disorder)
        if self.kind == "pcap":
            return iter(read_pcap_trace(self.path, self.limit, self.on_disorder))
        return _limited(iter(generate_synthetic(self.synthetic)), self.limit)
