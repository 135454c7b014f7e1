"""Run metrics and the exact per-flow oracle they are checked against."""

from __future__ import annotations

import csv
import io
import json
from collections import Counter
from dataclasses import asdict, dataclass, fields
from typing import Iterable, NamedTuple, Optional

from .flow import FlowKey, PacketRecord, Tfr


class MetricsError(ValueError):
    pass


class ZeroPackets(MetricsError):
    pass


class EmptyRun(MetricsError):
    pass


class Oracle:
    """Exact packet count for every flow in a trace."""

    def __init__(self):
        self.counts: Counter[FlowKey] = Counter()
        self.total_packets = 0

    @classmethod
    def from_trace(cls, records: Iterable[PacketRecord]) -> "Oracle":
        o = cls()
        for rec in records:
            o.observe(rec)
        return o

    def observe(self, pkt: PacketRecord) -> None:
        self.counts[pkt.key] += 1
        self.total_packets += 1

    @property
    def distinct_flows(self) -> int:
        return len(self.counts)


def eviction_rate(m: int, n: int) -> float:
    if n == 0:
        raise ZeroPackets("eviction rate undefined for an empty trace")
    return m / n


def aggregation_rate(m0: int, n: int) -> float:
    if n == 0:
        raise ZeroPackets("aggregation rate undefined for an empty trace")
    return m0 / n


def redundancy(final_records: list[Tfr], oracle: Oracle) -> float:
    k = len(final_records)
    if k == 0:
        raise EmptyRun("redundancy undefined with no final records")
    return (k - oracle.distinct_flows) / k


class ConservationResult(NamedTuple):
    ok: bool
    flow: Optional[FlowKey] = None
    expected: int = 0
    got: int = 0

    def __bool__(self) -> bool:
        return self.ok

    def describe(self) -> str:
        if self.ok:
            return "conservation: pass"
        return f"conservation: FAIL at flow {self.flow}: oracle {self.expected}, records {self.got}"


def group_counts(records: Iterable[Tfr]) -> Counter:
    totals: Counter = Counter()
    for r in records:
        totals[r.key] += r.count
    return totals


def verify_conservation(final_records: Iterable[Tfr], oracle: Oracle) -> ConservationResult:
    got = group_counts(final_records)
    if got == oracle.counts:
        return ConservationResult(True)
    for key in sorted(set(got) | set(oracle.counts)):
        if got[key] != oracle.counts[key]:
            return ConservationResult(False, key, oracle.counts[key], got[key])
    return ConservationResult(True)  # Counter equality can differ on zero entries only


@dataclass
class RunReport:
    """One finished run. Rates are None when undefined (empty trace)."""

    ts: Optional[str]
    trace: str
    policy: str
    memory_bytes: int
    d: int
    m: int
    n: int
    m0: int
    k: int
    k0: int
    eviction_rate: Optional[float]
    aggregation_rate: Optional[float]
    redundancy: Optional[float]
    dram_op_count: int
    seed: int

    @classmethod
    def field_names(cls) -> list[str]:
        return [f.name for f in fields(cls)]

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=False)

    def csv_row(self) -> list:
        return ["" if v is None else v for v in asdict(self).values()]

    @classmethod
    def from_dict(cls, d: dict) -> "RunReport":
        return cls(**{name: d[name] for name in cls.field_names()})


def reports_to_csv(reports: Iterable[RunReport], header: bool = True) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    if header:
        writer.writerow(RunReport.field_names())
    for r in reports:
        writer.writerow(r.csv_row())
    return buf.getvalue()
