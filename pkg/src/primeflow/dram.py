"""Slow-memory side: the Aggre merge table and the Que record sequence."""

from __future__ import annotations

from dataclasses import replace
from typing import Optional

from .export import Batch, BufferKind
from .flow import Tfr, flow_hash

DEFAULT_AGGRE_SLOTS = 1 << 20


class AggreTable:
    """Direct-mapped table that merges TFR segments of the same flow.

    ``inserted_one_by_one`` is m0, the number of records pushed through it.
    """

    def __init__(self, size: int = DEFAULT_AGGRE_SLOTS, seed: int = 0):
        if size < 1:
            raise ValueError("aggre size must be >= 1")
        self.size = size
        self.seed = seed
        self.slots: list[Optional[Tfr]] = [None] * size
        self.inserted_one_by_one = 0

    def index_of(self, key) -> int:
        return flow_hash(key, self.seed) % self.size

    def insert(self, r: Tfr) -> Optional[Tfr]:
        """Merge or store ``r``; return the displaced resident on a key collision."""
        self.inserted_one_by_one += 1
        idx = self.index_of(r.key)
        cur = self.slots[idx]
        if cur is None:
            self.slots[idx] = replace(r)
            return None
        if cur.key == r.key:
            cur.count += r.count
            cur.ets = r.ets  # taken verbatim from the incoming record, even if older
            return None
        self.slots[idx] = replace(r)
        return cur

    def residents(self) -> list[Tfr]:
        return [r for r in self.slots if r is not None]

    def clear(self) -> None:
        self.slots = [None] * self.size


class DramPart:
    """Consumes batches in emission order; ``dram_op_count`` is a unit-cost access tally."""

    def __init__(self, aggre: AggreTable):
        self.aggre = aggre
        self.que: list[Tfr] = []
        self.dram_op_count = 0

    def handle_batch(self, batch: Batch) -> None:
        if batch.flag is BufferKind.N:
            self.que.extend(batch.records)
            self.dram_op_count += 2  # one bulk read, one bulk write
            return
        for r in batch.records:
            victim = self.aggre.insert(r)
            self.dram_op_count += 2
            if victim is not None:
                self.que.append(victim)
                self.dram_op_count += 1

    @property
    def inserted_one_by_one(self) -> int:
        return self.aggre.inserted_one_by_one

    def finalize(self) -> list[Tfr]:
        """Que contents followed by Aggre residents; both are emptied."""
        out = self.que + self.aggre.residents()
        self.que = []
        self.aggre.clear()
        return out


def insert_into_aggre(aggre: AggreTable, r: Tfr) -> Optional[Tfr]:
    return aggre.insert(r)


def handle_batch(dram: DramPart, batch: Batch) -> None:
    dram.handle_batch(batch)


def finalize(dram: DramPart) -> list[Tfr]:
    return dram.finalize()
