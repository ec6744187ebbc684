"""Binary frame codec for inter-node token transport.

Layout (big-endian), 24-byte header followed by payload and CRC-32:

    magic    4 B   0x45 0x50 0x52 0x46
    version  1 B   0x01
    type     1 B   DATA 1, HELLO 2, HELLO_ACK 3, HEARTBEAT 4, BYE 5, RESUME 6
    fifo_id  4 B   uint32 wire id of the FIFO
    sequence 8 B   uint64 index of the first token carried
    count    2 B   uint16 token count
    length   4 B   uint32 payload byte length
    payload  length B
    crc      4 B   CRC-32 (poly 0x04C11DB7) over header + payload

Decoding never trusts input: magic, version, length, and checksum all have
to verify before a frame is returned.
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass

__all__ = [
    "TokenFrame",
    "FrameError",
    "BadMagic",
    "BadVersion",
    "BadChecksum",
    "Truncated",
    "BadLayout",
    "encode_frame",
    "decode_frame",
    "FrameParser",
    "HEADER_SIZE",
    "DATA",
    "HELLO",
    "HELLO_ACK",
    "HEARTBEAT",
    "BYE",
    "RESUME",
    "encode_hello_payload",
    "decode_hello_payload",
    "encode_resume_payload",
    "decode_resume_payload",
]

MAGIC = b"\x45\x50\x52\x46"
VERSION = 0x01

DATA = 0x01
HELLO = 0x02
HELLO_ACK = 0x03
HEARTBEAT = 0x04
BYE = 0x05
RESUME = 0x06
FRAME_TYPES = (DATA, HELLO, HELLO_ACK, HEARTBEAT, BYE, RESUME)

_HEADER = struct.Struct(">4sBBIQHI")
HEADER_SIZE = _HEADER.size  # 24
CRC_SIZE = 4
MAX_PAYLOAD = 1 << 24  # 16 MiB; anything larger is a corrupt length field


class FrameError(ValueError):
    """Base class for frame encode/decode failures."""


class BadMagic(FrameError):
    pass


class BadVersion(FrameError):
    pass


class BadChecksum(FrameError):
    pass


class Truncated(FrameError):
    pass


class BadLayout(FrameError):
    """Field values that cannot describe a real frame (sizes, counts, types)."""


@dataclass(frozen=True)
class TokenFrame:
    """One wire frame: a batch of fixed-size tokens for a single FIFO."""

    frame_type: int
    fifo_id: int
    sequence: int
    token_count: int
    payload: bytes = b""


def encode_frame(frame: TokenFrame, token_bytes: int | None = None) -> bytes:
    """Serialize a frame; deterministic bytes for identical frames.

    ``token_bytes`` (when the caller knows the bound FIFO's token size)
    enables the exact payload-length check; otherwise only divisibility by
    token_count is enforced.
    """
    if frame.frame_type not in FRAME_TYPES:
        raise BadLayout(f"unknown frame type {frame.frame_type}")
    if not 0 <= frame.fifo_id < 1 << 32:
        raise BadLayout(f"fifo_id {frame.fifo_id} out of range")
    if not 0 <= frame.sequence < 1 << 64:
        raise BadLayout(f"sequence {frame.sequence} out of range")
    if not 0 <= frame.token_count < 1 << 16:
        raise BadLayout(f"token_count {frame.token_count} out of range")
    if len(frame.payload) > MAX_PAYLOAD:
        raise BadLayout(f"payload of {len(frame.payload)} B exceeds {MAX_PAYLOAD}")
    if token_bytes is not None and frame.frame_type == DATA:
        if len(frame.payload) != frame.token_count * token_bytes:
            raise BadLayout(
                f"payload {len(frame.payload)} B != {frame.token_count} tokens "
                f"x {token_bytes} B"
            )
    elif frame.token_count > 0 and len(frame.payload) % frame.token_count != 0:
        raise BadLayout(
            f"payload {len(frame.payload)} B not divisible by token_count {frame.token_count}"
        )
    header = _HEADER.pack(
        MAGIC,
        VERSION,
        frame.frame_type,
        frame.fifo_id,
        frame.sequence,
        frame.token_count,
        len(frame.payload),
    )
    crc = zlib.crc32(header + frame.payload) & 0xFFFFFFFF
    return header + frame.payload + struct.pack(">I", crc)


def decode_frame(data: bytes) -> TokenFrame:
    """Parse exactly one frame from ``data``; hostile input only raises
    FrameError subclasses, never anything else."""
    frame, consumed = _decode_prefix(data)
    if consumed != len(data):
        raise BadLayout(f"{len(data) - consumed} trailing byte(s) after frame")
    return frame


def _decode_prefix(data: bytes) -> tuple[TokenFrame, int]:
    if len(data) < HEADER_SIZE:
        raise Truncated(f"header needs {HEADER_SIZE} B, got {len(data)}")
    magic, version, ftype, fifo_id, sequence, count, length = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise BadMagic(f"bad magic {magic!r}")
    if version != VERSION:
        raise BadVersion(f"unsupported version {version}")
    if ftype not in FRAME_TYPES:
        raise BadLayout(f"unknown frame type {ftype}")
    if length > MAX_PAYLOAD:
        raise BadLayout(f"payload length {length} exceeds {MAX_PAYLOAD}")
    total = HEADER_SIZE + length + CRC_SIZE
    if len(data) < total:
        raise Truncated(f"frame needs {total} B, got {len(data)}")
    payload = bytes(data[HEADER_SIZE:HEADER_SIZE + length])
    (crc,) = struct.unpack_from(">I", data, HEADER_SIZE + length)
    expected = zlib.crc32(data[:HEADER_SIZE + length]) & 0xFFFFFFFF
    if crc != expected:
        raise BadChecksum(f"crc {crc:#010x} != computed {expected:#010x}")
    if count > 0 and length % count != 0:
        raise BadLayout(f"payload {length} B not divisible by token_count {count}")
    return TokenFrame(ftype, fifo_id, sequence, count, payload), total


class FrameParser:
    """Incremental parser for framed byte streams (sockets, pipes)."""

    def __init__(self):
        self._buf = bytearray()

    def feed(self, data: bytes) -> list[TokenFrame]:
        """Append bytes, return every complete frame now available.

        Raises FrameError on corruption; a framed stream cannot resync
        after garbage, so callers should drop the connection.
        """
        self._buf.extend(data)
        frames = []
        while True:
            try:
                frame, consumed = _decode_prefix(bytes(self._buf))
            except Truncated:
                break
            del self._buf[:consumed]
            frames.append(frame)
        return frames

    @property
    def pending_bytes(self) -> int:
        return len(self._buf)


# -- handshake payloads ---------------------------------------------------


def encode_hello_payload(graph_hash: int, node_id: str, fifo_ids: list[int]) -> bytes:
    raw = node_id.encode("utf-8")
    out = struct.pack(">Q", graph_hash)
    out += struct.pack(">H", len(raw)) + raw
    out += struct.pack(">H", len(fifo_ids))
    for fid in fifo_ids:
        out += struct.pack(">I", fid)
    return out


def decode_hello_payload(payload: bytes) -> tuple[int, str, list[int]]:
    try:
        (graph_hash,) = struct.unpack_from(">Q", payload, 0)
        (name_len,) = struct.unpack_from(">H", payload, 8)
        node_id = payload[10:10 + name_len].decode("utf-8")
        (count,) = struct.unpack_from(">H", payload, 10 + name_len)
        offset = 12 + name_len
        fifo_ids = [
            struct.unpack_from(">I", payload, offset + 4 * i)[0] for i in range(count)
        ]
        if offset + 4 * count != len(payload):
            raise BadLayout("trailing bytes in HELLO payload")
        return graph_hash, node_id, fifo_ids
    except struct.error as exc:
        raise Truncated(f"HELLO payload too short: {exc}") from None


def encode_resume_payload(next_expected: int) -> bytes:
    return struct.pack(">Q", next_expected)


def decode_resume_payload(payload: bytes) -> int:
    if len(payload) != 8:
        raise BadLayout(f"RESUME payload must be 8 B, got {len(payload)}")
    return struct.unpack(">Q", payload)[0]
