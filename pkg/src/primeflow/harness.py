"""Memory sweeps and policy comparisons over one trace source."""

from __future__ import annotations

import functools
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Iterator, Optional

from .flow import PacketRecord
from .pipeline import POLICIES, RunResult, SimConfig, simulate
from .trace import TraceSource


@dataclass(frozen=True)
class SweepSpec:
    start: int = 200_000
    stop: int = 2_000_000
    step: int = 200_000
    policies: tuple[str, ...] = POLICIES

    def __post_init__(self):
        if self.step <= 0:
            raise ValueError("sweep step must be > 0")
        if self.start > self.stop:
            raise ValueError("sweep start must not exceed stop")
        if not self.policies:
            raise ValueError("sweep needs at least one policy")
        for p in self.policies:
            if p not in POLICIES:
                raise ValueError(f"unknown policy {p!r}")

    def memory_points(self) -> list[int]:
        return list(range(self.start, self.stop + 1, self.step))

    def points(self) -> list[tuple[int, str]]:
        # canonical policy order regardless of how they were listed
        ordered = [p for p in POLICIES if p in self.policies]
        return [(mem, pol) for mem in self.memory_points() for pol in ordered]


@functools.lru_cache(maxsize=2)
def load_trace(source: TraceSource) -> tuple[PacketRecord, ...]:
    """Materialize a trace once per process so sweep points can share it."""
    return tuple(source.open())


def run_point(source: TraceSource, config: SimConfig, timestamp: bool = True) -> RunResult:
    return simulate(load_trace(source), config, source.label, timestamp)


def _run_point_task(args) -> RunResult:
    return run_point(*args)


def run_sweep(
    spec: SweepSpec,
    source: TraceSource,
    base: SimConfig,
    jobs: int = 1,
    timestamp: bool = True,
) -> Iterator[RunResult]:
    """Yield one result per (memory, policy) point in deterministic order.

    Every point starts from fresh tables; with ``jobs`` > 1 the points run
    in worker processes but results still come back in point order.
    """
    tasks = [
        (source, base.replace(memory_bytes=mem, policy=pol), timestamp) for mem, pol in spec.points()
    ]
    if jobs <= 1:
        for t in tasks:
            yield _run_point_task(t)
        return
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        yield from pool.map(_run_point_task, tasks)


@dataclass
class Comparison:
    prime: RunResult
    turboflow: RunResult

    @property
    def eviction_reduction(self) -> Optional[float]:
        """Relative eviction-rate reduction of the d-way table against the baseline."""
        base = self.turboflow.report.eviction_rate
        if not base:
            return None
        return (base - self.prime.report.eviction_rate) / base

    def summary(self) -> dict:
        p, t = self.prime.report, self.turboflow.report
        return {
            "eviction_rate_prime": p.eviction_rate,
            "eviction_rate_turboflow": t.eviction_rate,
            "eviction_reduction": self.eviction_reduction,
            "aggregation_rate_prime": p.aggregation_rate,
            "aggregation_rate_turboflow": t.aggregation_rate,
            "redundancy_prime": p.redundancy,
            "redundancy_turboflow": t.redundancy,
        }


def compare(source: TraceSource, base: SimConfig, timestamp: bool = True) -> Comparison:
    return Comparison(
        run_point(source, base.replace(policy="prime"), timestamp),
        run_point(source, base.replace(policy="turboflow"), timestamp),
    )
