"""Datagram layouts for the two transport backends.

SecureMux frame::

    [type:1][conn_id:8][stream_id:4][offset:8][length:2][payload][tag:8]

PlainStream segment::

    [flags:1][conn_id:8][seq:8][length:2][payload]

The leading flags byte on PlainStream segments carries SYN/ACK/FIN/RST,
which the bare ``conn/seq/len`` layout cannot express.
"""

from __future__ import annotations

import hashlib
import struct
from typing import NamedTuple

# SecureMux frame types
INITIAL = 1
HANDSHAKE = 2
STREAM = 3
ACK = 4
CLOSE = 5
CLOSE_ACK = 6

FRAME_TYPES = {INITIAL, HANDSHAKE, STREAM, ACK, CLOSE, CLOSE_ACK}

# PlainStream flags
SYN = 0x01
ACK_FLAG = 0x02
FIN = 0x04
RST = 0x08
FIN_ACK = FIN | ACK_FLAG

_MUX_HDR = struct.Struct(">BQIQH")
_PLAIN_HDR = struct.Struct(">BQQH")
TAG_LEN = 8

MUX_OVERHEAD = _MUX_HDR.size + TAG_LEN
PLAIN_OVERHEAD = _PLAIN_HDR.size
MAX_MUX_PAYLOAD = 1200

_RANGE = struct.Struct(">QQ")
MAX_SACK_RANGES = 32


class WireError(ValueError):
    pass


class MuxFrame(NamedTuple):
    ftype: int
    conn_id: int
    stream_id: int
    offset: int
    payload: bytes


class PlainSegment(NamedTuple):
    flags: int
    conn_id: int
    seq: int
    payload: bytes


def frame_tag(key: bytes | None, body: bytes) -> bytes:
    """Integrity tag over header+payload; keyed once the handshake is done."""
    if key:
        return hashlib.blake2b(body, key=key, digest_size=TAG_LEN).digest()
    return hashlib.blake2b(body, digest_size=TAG_LEN).digest()


def encode_mux(frame: MuxFrame, key: bytes | None) -> bytes:
    if len(frame.payload) > 0xFFFF:
        raise WireError("payload too large for length field")
    body = _MUX_HDR.pack(frame.ftype, frame.conn_id, frame.stream_id, frame.offset,
                         len(frame.payload)) + frame.payload
    return body + frame_tag(key, body)


def peek_mux(data: bytes) -> tuple[int, int]:
    """Return (frame type, connection id) without checking the tag."""
    if len(data) < MUX_OVERHEAD:
        raise WireError("short frame")
    return data[0], int.from_bytes(data[1:9], "big")


def decode_mux(data: bytes, key: bytes | None) -> MuxFrame:
    """Decode and authenticate a frame. Raises WireError on any mismatch."""
    if len(data) < MUX_OVERHEAD:
        raise WireError("short frame")
    ftype, conn_id, sid, offset, length = _MUX_HDR.unpack_from(data)
    end = _MUX_HDR.size + length
    if ftype not in FRAME_TYPES:
        raise WireError(f"unknown frame type {ftype}")
    if len(data) != end + TAG_LEN:
        raise WireError("length field does not match datagram size")
    body = data[:end]
    if frame_tag(key, body) != data[end:]:
        raise WireError("integrity tag mismatch")
    return MuxFrame(ftype, conn_id, sid, offset, data[_MUX_HDR.size:end])


def encode_plain(seg: PlainSegment) -> bytes:
    if len(seg.payload) > 0xFFFF:
        raise WireError("payload too large for length field")
    return _PLAIN_HDR.pack(seg.flags, seg.conn_id, seg.seq, len(seg.payload)) + seg.payload


def decode_plain(data: bytes) -> PlainSegment:
    if len(data) < _PLAIN_HDR.size:
        raise WireError("short segment")
    flags, conn_id, seq, length = _PLAIN_HDR.unpack_from(data)
    if len(data) != _PLAIN_HDR.size + length:
        raise WireError("length field does not match datagram size")
    return PlainSegment(flags, conn_id, seq, data[_PLAIN_HDR.size:])


def encode_ranges(ranges: list[tuple[int, int]]) -> bytes:
    return b"".join(_RANGE.pack(a, b) for a, b in ranges[:MAX_SACK_RANGES])


def decode_ranges(data: bytes) -> list[tuple[int, int]]:
    if len(data) % _RANGE.size:
        raise WireError("malformed ack ranges")
    return [_RANGE.unpack_from(data, i) for i in range(0, len(data), _RANGE.size)]


def encode_close(code: int, text: str) -> bytes:
    raw = text.encode()[:1024]
    return struct.pack(">H", code) + raw


def decode_close(data: bytes) -> tuple[int, str]:
    if len(data) < 2:
        raise WireError("short close payload")
    return struct.unpack_from(">H", data)[0], data[2:].decode(errors="replace")
