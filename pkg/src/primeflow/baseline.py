"""Single-hash, evict-on-collision flow cache used as the comparison policy."""

from __future__ import annotations

from dataclasses import dataclass, field

from .flow import FlowKey, PacketRecord, Tfr, flow_hash
from .sram import INSERTED, TFR_BYTES, UPDATED, OutcomeKind, ProcessOutcome


@dataclass
class BaselineTable:
    memory_bytes: int
    seed: int
    tfr_bytes: int = TFR_BYTES
    buckets: list = field(init=False)
    eviction_count: int = 0
    packet_count: int = 0

    def __post_init__(self):
        if self.bucket_count < 1:
            raise ValueError(f"memory_bytes={self.memory_bytes} holds no TFR")
        self.buckets = [None] * self.bucket_count
        self._index_cache: dict[FlowKey, int] = {}

    @property
    def bucket_count(self) -> int:
        return self.memory_bytes // self.tfr_bytes

    @property
    def d(self) -> int:
        return 1

    def bucket_of(self, key: FlowKey) -> int:
        idx = self._index_cache.get(key)
        if idx is None:
            idx = self._index_cache[key] = flow_hash(key, self.seed) % self.bucket_count
        return idx

    def process_packet(self, pkt: PacketRecord) -> ProcessOutcome:
        key, now = pkt
        self.packet_count += 1
        idx = self.bucket_of(key)
        rec = self.buckets[idx]
        if rec is None:
            self.buckets[idx] = Tfr(key, 1, now, now)
            return INSERTED
        if rec.key == key:
            rec.count += 1
            rec.ets = now
            return UPDATED
        # exported records get the same single-packet correction as the main table
        if rec.count == 1:
            rec.ets = rec.sts
        self.buckets[idx] = Tfr(key, 1, now, now)
        self.eviction_count += 1
        return ProcessOutcome(OutcomeKind.EVICTED, rec)

    def flush(self) -> list[Tfr]:
        out = []
        for rec in self.buckets:
            if rec is not None:
                if rec.count == 1:
                    rec.ets = rec.sts
                out.append(rec)
        self.buckets = [None] * self.bucket_count
        return out

    def residents(self) -> list[Tfr]:
        return [r for r in self.buckets if r is not None]


def baseline_process_packet(table: BaselineTable, pkt: PacketRecord) -> ProcessOutcome:
    return table.process_packet(pkt)
