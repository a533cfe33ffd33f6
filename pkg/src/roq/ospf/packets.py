"""Simplified fixed-layout OSPF packet codec.

Common header: ``[version=2:1][type:1][length:2][router_id:4]``. On a
stream (OverQuic mode) every packet is preceded by a 4-byte length so
records can be cut out of the byte stream unambiguously.
"""

from __future__ import annotations

import enum
import struct
from dataclasses import dataclass
from typing import NamedTuple, Union

from ..prefix import BadPrefix, Prefix

VERSION = 2
HELLO, DBD, LSR, LSU, LSACK = 1, 2, 3, 4, 5

FLAG_INIT = 0x04
FLAG_MORE = 0x02
FLAG_MASTER = 0x01

MAX_AGE = 3600
MAX_AGE_DIFF = 15
INITIAL_SEQ = -0x7FFFFFFF  # 0x80000001 as a signed 32-bit value
MAX_SEQ = 0x7FFFFFFF

MAX_PACKET = 1200
MAX_STREAM_PACKET = 0xFFFF

_HDR = struct.Struct(">BBHI")
_LSA_HDR = struct.Struct(">BIIiH")
_KEY = struct.Struct(">BII")
HEADER_LEN = _HDR.size
LSA_HEADER_LEN = _LSA_HDR.size
STREAM_PREFIX = 4


def seq_from_u32(value: int) -> int:
    """Interpret a 32-bit pattern such as 0x80000001 as a signed sequence number."""
    return value - (1 << 32) if value & 0x8000_0000 else value


class OspfCodecError(ValueError):
    pass


class Truncated(OspfCodecError):
    pass


class UnknownPacketType(OspfCodecError):
    pass


class LsaType(enum.IntEnum):
    ROUTER = 1
    EXTERNAL_PREFIX = 5


class LsaKey(NamedTuple):
    type: LsaType
    adv_router: int
    lsa_id: int


class LsaHeader(NamedTuple):
    key: LsaKey
    seq: int
    age: int


class RouterBody(NamedTuple):
    links: tuple[tuple[int, int], ...]  # (neighbor router_id, cost)


class ExternalBody(NamedTuple):
    prefix: Prefix
    cost: int


class Lsa(NamedTuple):
    key: LsaKey
    seq: int
    age: int
    body: RouterBody | ExternalBody

    @property
    def header(self) -> LsaHeader:
        return LsaHeader(self.key, self.seq, self.age)

    def with_age(self, age: int) -> "Lsa":
        return self._replace(age=min(age, MAX_AGE))


@dataclass(frozen=True)
class Hello:
    router_id: int
    hello_interval: int
    dead_interval: int
    neighbors_seen: tuple[int, ...] = ()


@dataclass(frozen=True)
class DbDescription:
    router_id: int
    dd_seq: int
    flags: int
    headers: tuple[LsaHeader, ...] = ()


@dataclass(frozen=True)
class LsRequest:
    router_id: int
    keys: tuple[LsaKey, ...]


@dataclass(frozen=True)
class LsUpdate:
    router_id: int
    lsas: tuple[Lsa, ...]


@dataclass(frozen=True)
class LsAck:
    router_id: int
    headers: tuple[LsaHeader, ...]


OspfPacket = Union[Hello, DbDescription, LsRequest, LsUpdate, LsAck]

_TYPE_OF = {Hello: HELLO, DbDescription: DBD, LsRequest: LSR, LsUpdate: LSU, LsAck: LSACK}


def packet_type(p: OspfPacket) -> int:
    return _TYPE_OF[type(p)]


# -- LSAs -----------------------------------------------------------------

def _enc_header(h: LsaHeader) -> bytes:
    return _LSA_HDR.pack(h.key.type, h.key.adv_router, h.key.lsa_id, h.seq, h.age)


def _dec_header(data: bytes, pos: int) -> LsaHeader:
    if pos + LSA_HEADER_LEN > len(data):
        raise Truncated("LSA header")
    t, adv, lid, seq, age = _LSA_HDR.unpack_from(data, pos)
    try:
        lt = LsaType(t)
    except ValueError:
        raise OspfCodecError(f"unknown LSA type {t}") from None
    return LsaHeader(LsaKey(lt, adv, lid), seq, age)


def _enc_body(lsa: Lsa) -> bytes:
    b = lsa.body
    if lsa.key.type is LsaType.ROUTER:
        return struct.pack(">H", len(b.links)) + b"".join(
            struct.pack(">IH", n, c) for n, c in b.links)
    p = b.prefix
    return struct.pack(">BB", p.family, p.length) + p.bits + struct.pack(">I", b.cost)


def _dec_body(t: LsaType, raw: bytes) -> RouterBody | ExternalBody:
    try:
        if t is LsaType.ROUTER:
            (n,) = struct.unpack_from(">H", raw)
            if len(raw) != 2 + 6 * n:
                raise Truncated("router LSA body")
            return RouterBody(tuple(struct.unpack_from(">IH", raw, 2 + 6 * i) for i in range(n)))
        family, length = raw[0], raw[1]
        width = 4 if family == 4 else 16
        if len(raw) != 2 + width + 4:
            raise Truncated("external LSA body")
        prefix = Prefix.make(family, raw[2:2 + width], length)
        (cost,) = struct.unpack_from(">I", raw, 2 + width)
        return ExternalBody(prefix, cost)
    except (struct.error, IndexError):
        raise Truncated("LSA body") from None
    except BadPrefix as exc:
        raise OspfCodecError(str(exc)) from None


def encode_lsa(lsa: Lsa) -> bytes:
    body = _enc_body(lsa)
    return _enc_header(lsa.header) + struct.pack(">H", len(body)) + body


def lsa_size(lsa: Lsa) -> int:
    if lsa.key.type is LsaType.ROUTER:
        return LSA_HEADER_LEN + 2 + 2 + 6 * len(lsa.body.links)
    return LSA_HEADER_LEN + 2 + 2 + len(lsa.body.prefix.bits) + 4


def _dec_lsa(data: bytes, pos: int) -> tuple[Lsa, int]:
    h = _dec_header(data, pos)
    pos += LSA_HEADER_LEN
    if pos + 2 > len(data):
        raise Truncated("LSA length")
    (blen,) = struct.unpack_from(">H", data, pos)
    pos += 2
    raw = data[pos:pos + blen]
    if len(raw) != blen:
        raise Truncated("LSA body")
    return Lsa(h.key, h.seq, h.age, _dec_body(h.key.type, raw)), pos + blen


# -- packets --------------------------------------------------------------

def encode_packet(p: OspfPacket) -> bytes:
    if isinstance(p, Hello):
        body = struct.pack(">HIH", p.hello_interval, p.dead_interval, len(p.neighbors_seen))
        body += b"".join(struct.pack(">I", n) for n in p.neighbors_seen)
    elif isinstance(p, DbDescription):
        body = struct.pack(">IBH", p.dd_seq, p.flags, len(p.headers))
        body += b"".join(_enc_header(h) for h in p.headers)
    elif isinstance(p, LsRequest):
        body = struct.pack(">H", len(p.keys)) + b"".join(_KEY.pack(*k) for k in p.keys)
    elif isinstance(p, LsUpdate):
        body = struct.pack(">H", len(p.lsas)) + b"".join(encode_lsa(a) for a in p.lsas)
    elif isinstance(p, LsAck):
        body = struct.pack(">H", len(p.headers)) + b"".join(_enc_header(h) for h in p.headers)
    else:
        raise TypeError(f"not an OSPF packet: {p!r}")
    total = HEADER_LEN + len(body)
    if total > MAX_STREAM_PACKET:
        raise OspfCodecError(f"packet of {total} bytes does not fit the length field")
    return _HDR.pack(VERSION, packet_type(p), total, p.router_id) + body


def decode_packet(data: bytes) -> OspfPacket:
    if len(data) < HEADER_LEN:
        raise Truncated("packet header")
    version, ptype, length, rid = _HDR.unpack_from(data)
    if ptype not in (HELLO, DBD, LSR, LSU, LSACK):
        raise UnknownPacketType(f"packet type {ptype}")
    if version != VERSION:
        raise OspfCodecError(f"version {version}")
    if len(data) < length:
        raise Truncated(f"{len(data)} of {length} bytes")
    if length < HEADER_LEN or len(data) != length:
        raise OspfCodecError("length field mismatch")
    b = data[HEADER_LEN:length]
    try:
        if ptype == HELLO:
            hi, dead, n = struct.unpack_from(">HIH", b)
            if len(b) != 8 + 4 * n:
                raise Truncated("hello neighbor list")
            return Hello(rid, hi, dead, tuple(struct.unpack_from(f">{n}I", b, 8)))
        if ptype == DBD:
            seq, flags, n = struct.unpack_from(">IBH", b)
            if len(b) != 7 + LSA_HEADER_LEN * n:
                raise Truncated("DBD headers")
            return DbDescription(rid, seq, flags, tuple(
                _dec_header(b, 7 + LSA_HEADER_LEN * i) for i in range(n)))
        if ptype == LSR:
            (n,) = struct.unpack_from(">H", b)
            if len(b) != 2 + _KEY.size * n:
                raise Truncated("LSR keys")
            keys = []
            for i in range(n):
                t, adv, lid = _KEY.unpack_from(b, 2 + _KEY.size * i)
                keys.append(LsaKey(LsaType(t), adv, lid))
            return LsRequest(rid, tuple(keys))
        if ptype == LSU:
            (n,) = struct.unpack_from(">H", b)
            pos, lsas = 2, []
            for _ in range(n):
                lsa, pos = _dec_lsa(b, pos)
                lsas.append(lsa)
            if pos != len(b):
                raise OspfCodecError("trailing bytes in LSU")
            return LsUpdate(rid, tuple(lsas))
        (n,) = struct.unpack_from(">H", b)
        if len(b) != 2 + LSA_HEADER_LEN * n:
            raise Truncated("LsAck headers")
        return LsAck(rid, tuple(_dec_header(b, 2 + LSA_HEADER_LEN * i) for i in range(n)))
    except struct.error:
        raise Truncated("packet body") from None
    except ValueError as exc:
        if isinstance(exc, OspfCodecError):
            raise
        raise OspfCodecError(str(exc)) from None


def frame(p: OspfPacket) -> bytes:
    """Length-prefixed record for stream transport."""
    raw = encode_packet(p)
    return struct.pack(">I", len(raw)) + raw


def decode_stream(buf: bytes | bytearray, start: int = 0) -> tuple[OspfPacket, int]:
    """Cut one record out of a stream buffer; raises Truncated if incomplete."""
    if len(buf) - start < STREAM_PREFIX:
        raise Truncated("record length")
    (n,) = struct.unpack_from(">I", buf, start)
    end = start + STREAM_PREFIX + n
    if len(buf) < end:
        raise Truncated(f"record needs {n} bytes")
    return decode_packet(bytes(buf[start + STREAM_PREFIX:end])), STREAM_PREFIX + n


def split_lsas(router_id: int, lsas, limit: int = MAX_PACKET) -> list[LsUpdate]:
    """Fragment LSAs into LsUpdate packets of at most ``limit`` bytes each."""
    out, batch, used = [], [], HEADER_LEN + 2
    for lsa in lsas:
        n = lsa_size(lsa)
        if batch and used + n > limit:
            out.append(LsUpdate(router_id, tuple(batch)))
            batch, used = [], HEADER_LEN + 2
        batch.append(lsa)
        used += n
    if batch:
        out.append(LsUpdate(router_id, tuple(batch)))
    return out


def chunk(items, per_packet: int) -> list[tuple]:
    items = tuple(items)
    return [items[i:i + per_packet] for i in range(0, len(items), per_packet)]


def headers_per_packet(limit: int = MAX_PACKET) -> int:
    return (limit - HEADER_LEN - 7) // LSA_HEADER_LEN


def keys_per_packet(limit: int = MAX_PACKET) -> int:
    return (limit - HEADER_LEN - 2) // _KEY.size
