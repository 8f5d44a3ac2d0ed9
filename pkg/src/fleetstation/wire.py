"""Binary codecs shared by the broker transport and grid snapshots.

Varints are unsigned LEB128. All multi-byte fixed-width fields are big-endian.
"""
from __future__ import annotations

import struct

import numpy as np


def encode_varint(value: int) -> bytes:
    if value < 0:
        raise ValueError("varint must be non-negative")
    out = bytearray()
    while True:
        byte = value & 0x7F
        value >>= 7
        if value:
            out.append(byte | 0x80)
        else:
            out.append(byte)
            return bytes(out)


def decode_varint(buf: bytes, offset: int = 0) -> tuple[int, int]:
    """Returns (value, next_offset)."""
    result = 0
    shift = 0
    while True:
        if offset >= len(buf):
            raise ValueError("truncated varint")
        byte = buf[offset]
        offset += 1
        result |= (byte & 0x7F) << shift
        if not byte & 0x80:
            return result, offset
        shift += 7


def encode_string(s: str) -> bytes:
    raw = s.encode("utf-8")
    return encode_varint(len(raw)) + raw


def decode_string(buf: bytes, offset: int = 0) -> tuple[str, int]:
    n, offset = decode_varint(buf, offset)
    if offset + n > len(buf):
        raise ValueError("truncated string")
    return buf[offset : offset + n].decode("utf-8"), offset + n


def encode_envelope(topic: str, origin: str, sequence: int, stamp: int, payload: bytes) -> bytes:
    """Inter-broker frame: 4-byte big-endian length prefix + body."""
    body = (
        encode_string(topic)
        + encode_string(origin)
        + encode_varint(sequence)
        + encode_varint(stamp)
        + payload
    )
    return struct.pack(">I", len(body)) + body


def decode_envelope(frame: bytes) -> tuple[str, str, int, int, bytes]:
    if len(frame) < 4:
        raise ValueError("truncated frame")
    (length,) = struct.unpack_from(">I", frame, 0)
    body = frame[4 : 4 + length]
    if len(body) != length:
        raise ValueError("frame length mismatch")
    topic, off = decode_string(body, 0)
    origin, off = decode_string(body, off)
    sequence, off = decode_varint(body, off)
    stamp, off = decode_varint(body, off)
    return topic, origin, sequence, stamp, body[off:]


def rle_encode(values) -> bytes:
    """Run-length encode a byte-valued sequence as (value: 1 byte, run: varint) pairs."""
    arr = np.asarray(values, dtype=np.uint8).ravel()
    if arr.size == 0:
        return b""
    breaks = np.flatnonzero(np.diff(arr)) + 1
    starts = np.concatenate(([0], breaks))
    ends = np.concatenate((breaks, [arr.size]))
    out = bytearray()
    for s, e in zip(starts, ends):
        out.append(int(arr[s]))
        out += encode_varint(int(e - s))
    return bytes(out)


def rle_decode(buf: bytes):
    values = []
    runs = []
    offset = 0
    while offset < len(buf):
        value = buf[offset]
        run, offset = decode_varint(buf, offset + 1)
        values.append(value)
        runs.append(run)
    return np.repeat(np.array(values, dtype=np.uint8), runs)
