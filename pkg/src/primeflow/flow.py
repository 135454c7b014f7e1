"""Flow identifiers, trace events and temporary flow records."""

from __future__ import annotations

import functools
import hashlib
import ipaddress
import struct
from dataclasses import dataclass
from typing import NamedTuple

_KEY_STRUCT = struct.Struct(">IIHHB")
KEY_BYTES = _KEY_STRUCT.size  # 13

_U64 = (1 << 64) - 1


class FlowKey(NamedTuple):
    """IPv4 5-tuple. Addresses are stored as 32-bit integers."""

    src_ip: int
    dst_ip: int
    src_port: int
    dst_port: int
    protocol: int

    @classmethod
    def checked(cls, src_ip, dst_ip, src_port: int, dst_port: int, protocol: int) -> "FlowKey":
        """Build a key from ints or dotted-quad strings, range-checking every field.

        Raises ``ValueError`` when a field does not fit its width.
        """
        src = int(ipaddress.IPv4Address(src_ip))
        dst = int(ipaddress.IPv4Address(dst_ip))
        for name, value, bits in (
            ("src_port", src_port, 16),
            ("dst_port", dst_port, 16),
            ("protocol", protocol, 8),
        ):
            if not isinstance(value, int) or not 0 <= value < (1 << bits):
                raise ValueError(f"{name}={value!r} out of {bits}-bit range")
        return cls(src, dst, src_port, dst_port, protocol)

    def __str__(self) -> str:
        return "%s:%d->%s:%d/%d" % (
            ipaddress.IPv4Address(self.src_ip),
            self.src_port,
            ipaddress.IPv4Address(self.dst_ip),
            self.dst_port,
            self.protocol,
        )


class PacketRecord(NamedTuple):
    key: FlowKey
    ts: int  # microseconds since trace epoch


@dataclass(slots=True)
class Tfr:
    """Temporary flow record: one (possibly partial) segment of a flow."""

    key: FlowKey
    count: int
    sts: int
    ets: int


def serialize_key(key: FlowKey) -> bytes:
    return _KEY_STRUCT.pack(*key)


def deserialize_key(data: bytes) -> FlowKey:
    if len(data) != KEY_BYTES:
        raise ValueError(f"expected {KEY_BYTES} bytes, got {len(data)}")
    return FlowKey(*_KEY_STRUCT.unpack(data))


def flow_hash(key: FlowKey, seed: int) -> int:
    """Keyed 64-bit hash of the canonical key serialization.

    Each seed selects an independent member of the hash family (BLAKE2b
    keyed with the seed).
    """
    h = _keyed_hasher(seed).copy()
    h.update(_KEY_STRUCT.pack(*key))
    return int.from_bytes(h.digest(), "big")


@functools.lru_cache(maxsize=256)
def _keyed_hasher(seed: int):
    return hashlib.blake2b(digest_size=8, key=(seed & _U64).to_bytes(8, "big"))


def derive_seeds(master_seed: int, count: int, salt: str) -> list[int]:
    """Derive ``count`` pairwise-distinct 64-bit seeds from a master seed."""
    seeds: list[int] = []
    i = 0
    while len(seeds) < count:
        h = hashlib.blake2b(
            f"{salt}:{i}".encode(), digest_size=8, key=(master_seed & _U64).to_bytes(8, "big")
        ).digest()
        s = int.from_bytes(h, "big")
        if s not in seeds:
            seeds.append(s)
        i += 1
    return seeds
