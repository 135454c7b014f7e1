"""Fast-memory flow table with d candidate buckets and timestamp-priority eviction."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

from .flow import FlowKey, PacketRecord, Tfr, flow_hash

TFR_BYTES = 71


class OutcomeKind(enum.Enum):
    UPDATED = "updated"
    INSERTED = "inserted"
    EVICTED = "evicted"


class ProcessOutcome(NamedTuple):
    kind: OutcomeKind
    evicted: Optional[Tfr] = None


UPDATED = ProcessOutcome(OutcomeKind.UPDATED)
INSERTED = ProcessOutcome(OutcomeKind.INSERTED)


@dataclass(frozen=True)
class SramConfig:
    memory_bytes: int
    seeds: tuple[int, ...]
    tfr_bytes: int = TFR_BYTES

    def __post_init__(self):
        if self.tfr_bytes <= 0:
            raise ValueError("tfr_bytes must be positive")
        if not self.seeds:
            raise ValueError("need at least one hash seed")
        if len(set(self.seeds)) != len(self.seeds):
            raise ValueError("hash seeds must be pairwise distinct")
        if self.bucket_count < self.d:
            raise ValueError(
                f"memory_bytes={self.memory_bytes} gives {self.bucket_count} buckets, fewer than d={self.d}"
            )

    @property
    def d(self) -> int:
        return len(self.seeds)

    @property
    def bucket_count(self) -> int:
        return self.memory_bytes // self.tfr_bytes


def eq1_new_ets(s0: int, s: int) -> int:
    """End timestamp given to a TFR that replaced a victim whose ets was ``s0``."""
    return (s0 + s) // 2


@dataclass
class SramTable:
    """The on-chip table. ``eviction_count`` and ``packet_count`` are m and n."""

    config: SramConfig
    buckets: list = field(init=False)
    eviction_count: int = 0
    packet_count: int = 0

    def __post_init__(self):
        self.buckets = [None] * self.config.bucket_count
        self._index_cache: dict[FlowKey, tuple[int, ...]] = {}

    def candidate_buckets(self, key: FlowKey) -> tuple[int, ...]:
        idx = self._index_cache.get(key)
        if idx is None:
            n = self.config.bucket_count
            idx = tuple(flow_hash(key, s) % n for s in self.config.seeds)
            self._index_cache[key] = idx
        return idx

    def process_packet(self, pkt: PacketRecord) -> ProcessOutcome:
        key, now = pkt
        buckets = self.buckets
        self.packet_count += 1
        lowest = None
        pos = -1
        for idx in self.candidate_buckets(key):
            rec = buckets[idx]
            if rec is None:
                buckets[idx] = Tfr(key, 1, now, now)
                return INSERTED
            if rec.key == key:
                rec.count += 1
                rec.ets = now
                return UPDATED
            if lowest is None or rec.ets < lowest:
                lowest = rec.ets
                pos = idx
        victim = buckets[pos]
        if victim.count == 1:
            victim.ets = victim.sts
        buckets[pos] = Tfr(key, 1, now, eq1_new_ets(victim.ets, now))
        self.eviction_count += 1
        return ProcessOutcome(OutcomeKind.EVICTED, victim)

    def flush(self) -> list[Tfr]:
        """Drain every resident TFR; does not count as eviction."""
        out = []
        for rec in self.buckets:
            if rec is not None:
                if rec.count == 1:
                    rec.ets = rec.sts
                out.append(rec)
        self.buckets = [None] * self.config.bucket_count
        return out

    def residents(self) -> list[Tfr]:
        return [r for r in self.buckets if r is not None]


def process_packet(table: SramTable, pkt: PacketRecord) -> ProcessOutcome:
    return table.process_packet(pkt)


def flush_table(table: SramTable) -> list[Tfr]:
    return table.flush()
