"""Two-tier per-flow measurement: a d-way fast-memory flow table that exports
records through a bloom-filter router into a slow-memory aggregator."""

from .baseline import BaselineTable
from .dram import AggreTable, DramPart
from .export import BloomFilter, BufferKind, Batch, ExportRouter
from .flow import FlowKey, PacketRecord, Tfr, flow_hash, serialize_key, deserialize_key
from .metrics import Oracle, RunReport, verify_conservation
from .pipeline import Pipeline, SimConfig, simulate
from .sram import OutcomeKind, ProcessOutcome, SramConfig, SramTable, eq1_new_ets
from .trace import REFERENCE_TRACE, SyntheticSpec, TraceSource, generate_synthetic

__version__ = "0.1.0"
