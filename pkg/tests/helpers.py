"""Test-only writers and reference implementations, kept apart from the package code."""

import hashlib
import socket
import struct

from primeflow.flow import FlowKey

PCAP_GLOBAL = struct.Struct("<IHHiIII")
PCAP_RECORD = struct.Struct("<IIII")


def key_bytes(key: FlowKey) -> bytes:
    return (
        socket.inet_aton(_dotted(key.src_ip))
        + socket.inet_aton(_dotted(key.dst_ip))
        + key.src_port.to_bytes(2, "big")
        + key.dst_port.to_bytes(2, "big")
        + bytes([key.protocol])
    )


def _dotted(ip: int) -> str:
    return ".".join(str((ip >> s) & 0xFF) for s in (24, 16, 8, 0))


def reference_hash(key: FlowKey, seed: int) -> int:
    digest = hashlib.blake2b(key_bytes(key), digest_size=8, key=seed.to_bytes(8, "big")).digest()
    return int.from_bytes(digest, "big")


def ipv4_frame(key: FlowKey, payload: bytes = b"") -> bytes:
    if key.protocol == 6:
        l4 = struct.pack(">HHIIBBHHH", key.src_port, key.dst_port, 0, 0, 5 << 4, 0x02, 1024, 0, 0)
    else:
        l4 = struct.pack(">HHHH", key.src_port, key.dst_port, 8 + len(payload), 0)
    l4 += payload
    ip = struct.pack(
        ">BBHHHBBHII", 0x45, 0, 20 + len(l4), 0, 0, 64, key.protocol, 0, key.src_ip, key.dst_ip
    )
    eth = b"\x02" * 6 + b"\x04" * 6 + b"\x08\x00"
    return eth + ip + l4


def arp_frame() -> bytes:
    return b"\xff" * 6 + b"\x04" * 6 + b"\x08\x06" + bytes(28)


def write_pcap(path, frames, linktype=1, big_endian=False):
    """frames: iterable of (ts_us, frame_bytes)."""
    order = ">" if big_endian else "<"
    with open(path, "wb") as fh:
        fh.write(struct.pack(order + "IHHiIII", 0xA1B2C3D4, 2, 4, 0, 0, 65535, linktype))
        for ts, frame in frames:
            fh.write(struct.pack(order + "IIII", ts // 1_000_000, ts % 1_000_000, len(frame), len(frame)))
            fh.write(frame)
