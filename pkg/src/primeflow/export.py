"""Routing of evicted TFRs into BufferE / BufferN through a bloom filter."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

from .flow import FlowKey, Tfr, flow_hash

DEFAULT_EXPECTED_FLOWS = 1_000_000
DEFAULT_BLOOM_HASHES = 5
DEFAULT_BUFFER_CAPACITY = 64


class BufferKind(enum.Enum):
    E = "BufferE"  # flows seen before
    N = "BufferN"  # first-seen flows


class Batch(NamedTuple):
    flag: BufferKind
    records: tuple[Tfr, ...]


class BloomFilter:
    def __init__(self, m_bits: int, seeds):
        seeds = tuple(seeds)
        if m_bits <= 0:
            raise ValueError("m_bits must be positive")
        if not seeds:
            raise ValueError("need at least one hash seed")
        self.m_bits = m_bits
        self.seeds = seeds
        self.bits = bytearray((m_bits + 7) // 8)
        self.inserted_count = 0
        self._pos_cache: dict[FlowKey, list[int]] = {}

    @property
    def k(self) -> int:
        return len(self.seeds)

    def _positions(self, key: FlowKey) -> list[int]:
        pos = self._pos_cache.get(key)
        if pos is None:
            m = self.m_bits
            pos = self._pos_cache[key] = [flow_hash(key, s) % m for s in self.seeds]
        return pos

    def add(self, key: FlowKey) -> None:
        bits = self.bits
        for p in self._positions(key):
            bits[p >> 3] |= 1 << (p & 7)
        self.inserted_count += 1

    def __contains__(self, key: FlowKey) -> bool:
        bits = self.bits
        return all(bits[p >> 3] & (1 << (p & 7)) for p in self._positions(key))

    def fpr_estimate(self) -> float:
        """Analytic false-positive probability (1 - e^{-kn/m})^k."""
        if self.inserted_count == 0:
            return 0.0
        return (1.0 - math.exp(-self.k * self.inserted_count / self.m_bits)) ** self.k


@dataclass
class ExportBuffer:
    kind: BufferKind
    capacity: int
    items: list = field(default_factory=list)

    def __post_init__(self):
        if self.capacity < 1:
            raise ValueError("buffer capacity must be >= 1")

    def drain(self) -> Batch:
        batch = Batch(self.kind, tuple(self.items))
        self.items = []
        return batch


class ExportRouter:
    """Sorts exported TFRs by whether their flow was seen before and batches them.

    ``routed`` counts every TFR handed in; ``routed_e`` those sent to BufferE.
    """

    def __init__(self, bloom: BloomFilter, buffer_capacity: int = DEFAULT_BUFFER_CAPACITY):
        self.bloom = bloom
        self.buffer_e = ExportBuffer(BufferKind.E, buffer_capacity)
        self.buffer_n = ExportBuffer(BufferKind.N, buffer_capacity)
        self.routed = 0
        self.routed_e = 0

    @classmethod
    def with_defaults(
        cls,
        seeds,
        m_bits: Optional[int] = None,
        buffer_capacity: int = DEFAULT_BUFFER_CAPACITY,
    ) -> "ExportRouter":
        return cls(BloomFilter(m_bits or 8 * DEFAULT_EXPECTED_FLOWS, seeds), buffer_capacity)

    def route(self, tfr: Tfr) -> Optional[Batch]:
        self.routed += 1
        key = tfr.key
        bloom = self.bloom
        if key in bloom:
            buf = self.buffer_e
            self.routed_e += 1
        else:
            buf = self.buffer_n
            bloom.add(key)
        buf.items.append(tfr)
        if len(buf.items) >= buf.capacity:
            return buf.drain()
        return None

    def flush(self) -> list[Batch]:
        return [buf.drain() for buf in (self.buffer_e, self.buffer_n) if buf.items]

    def fpr_estimate(self) -> float:
        return self.bloom.fpr_estimate()


def route_tfr(router: ExportRouter, tfr: Tfr) -> Optional[Batch]:
    return router.route(tfr)


def flush_buffers(router: ExportRouter) -> list[Batch]:
    return router.flush()


def bloom_fpr_estimate(router: ExportRouter) -> float:
    return router.fpr_estimate()
