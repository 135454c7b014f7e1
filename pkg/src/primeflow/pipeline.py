"""End-to-end simulation: flow table -> export router -> DRAM part -> metrics."""

from __future__ import annotations

import datetime as _dt
import logging
from dataclasses import asdict, dataclass
from typing import Iterable, Optional

from . import dram as _dram
from . import export as _export
from .baseline import BaselineTable
from .dram import AggreTable, DramPart
from .export import BloomFilter, ExportRouter
from .flow import PacketRecord, Tfr, derive_seeds
from .metrics import ConservationResult, Oracle, RunReport, verify_conservation
from .sram import TFR_BYTES, SramConfig, SramTable

log = logging.getLogger(__name__)

POLICIES = ("prime", "turboflow")


@dataclass(frozen=True)
class SimConfig:
    policy: str = "prime"
    memory_bytes: int = 500_000
    d: int = 3
    seed: int = 1
    tfr_bytes: int = TFR_BYTES
    buffer_capacity: int = _export.DEFAULT_BUFFER_CAPACITY
    aggre_slots: int = _dram.DEFAULT_AGGRE_SLOTS
    bloom_bits: int = 8 * _export.DEFAULT_EXPECTED_FLOWS
    bloom_hashes: int = _export.DEFAULT_BLOOM_HASHES

    def __post_init__(self):
        if self.policy not in POLICIES:
            raise ValueError(f"policy must be one of {POLICIES}, not {self.policy!r}")
        if self.d < 1:
            raise ValueError("d must be >= 1")
        if self.bloom_hashes < 1 or self.bloom_bits < 1:
            raise ValueError("bloom filter needs >= 1 bit and >= 1 hash")
        if self.buffer_capacity < 1 or self.aggre_slots < 1:
            raise ValueError("buffer capacity and aggre slots must be >= 1")

    def replace(self, **changes) -> "SimConfig":
        return SimConfig(**{**asdict(self), **changes})

    @property
    def effective_d(self) -> int:
        return self.d if self.policy == "prime" else 1


class Pipeline:
    """Stateful simulator; feed packets one at a time, then ``finish``."""

    def __init__(self, config: SimConfig):
        self.config = config
        table_seeds = derive_seeds(config.seed, config.d, "table")
        if config.policy == "prime":
            self.table = SramTable(SramConfig(config.memory_bytes, tuple(table_seeds), config.tfr_bytes))
        else:
            # the single hash coincides with the first hash of the d-way table
            self.table = BaselineTable(config.memory_bytes, table_seeds[0], config.tfr_bytes)
        bloom = BloomFilter(config.bloom_bits, derive_seeds(config.seed, config.bloom_hashes, "bloom"))
        self.router = ExportRouter(bloom, config.buffer_capacity)
        aggre = AggreTable(config.aggre_slots, derive_seeds(config.seed, 1, "aggre")[0])
        self.dram = DramPart(aggre)
        self.oracle = Oracle()
        self.final_records: Optional[list[Tfr]] = None

    def feed(self, pkt: PacketRecord) -> None:
        self.oracle.observe(pkt)
        evicted = self.table.process_packet(pkt).evicted
        if evicted is not None:
            batch = self.router.route(evicted)
            if batch is not None:
                self.dram.handle_batch(batch)

    def run(self, packets: Iterable[PacketRecord]) -> "Pipeline":
        # inlined feed() for the hot loop
        counts = self.oracle.counts
        seen = 0
        process = self.table.process_packet
        route = self.router.route
        handle = self.dram.handle_batch
        for pkt in packets:
            counts[pkt.key] = counts.get(pkt.key, 0) + 1
            seen += 1
            evicted = process(pkt).evicted
            if evicted is not None:
                batch = route(evicted)
                if batch is not None:
                    handle(batch)
        self.oracle.total_packets += seen
        return self

    def finish(self) -> list[Tfr]:
        """Drain table, buffers and DRAM part; returns the final record set."""
        for tfr in self.table.flush():
            batch = self.router.route(tfr)
            if batch is not None:
                self.dram.handle_batch(batch)
        for batch in self.router.flush():
            self.dram.handle_batch(batch)
        self.final_records = self.dram.finalize()
        return self.final_records

    def report(self, trace_label: str = "", timestamp: bool = True) -> RunReport:
        if self.final_records is None:
            raise RuntimeError("finish() must be called before report()")
        n = self.table.packet_count
        m = self.table.eviction_count
        m0 = self.dram.inserted_one_by_one
        k = len(self.final_records)
        k0 = self.oracle.distinct_flows
        ts = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds") if timestamp else None
        return RunReport(
            ts=ts,
            trace=trace_label,
            policy=self.config.policy,
            memory_bytes=self.config.memory_bytes,
            d=self.config.effective_d,
            m=m,
            n=n,
            m0=m0,
            k=k,
            k0=k0,
            eviction_rate=m / n if n else None,
            aggregation_rate=m0 / n if n else None,
            redundancy=(k - k0) / k if k else None,
            dram_op_count=self.dram.dram_op_count,
            seed=self.config.seed,
        )

    def conservation(self) -> ConservationResult:
        if self.final_records is None:
            raise RuntimeError("finish() must be called first")
        return verify_conservation(self.final_records, self.oracle)


@dataclass
class RunResult:
    report: RunReport
    conservation: ConservationResult
    final_records: list[Tfr]


def simulate(
    packets: Iterable[PacketRecord],
    config: SimConfig,
    trace_label: str = "",
    timestamp: bool = True,
) -> RunResult:
    pipe = Pipeline(config).run(packets)
    final = pipe.finish()
    result = RunResult(pipe.report(trace_label, timestamp), pipe.conservation(), final)
    log.debug("%s @ %d B: %s", config.policy, config.memory_bytes, result.conservation.describe())
    return result
