"""BGP-4 message codec.

Framing follows RFC 4271 (16-byte 0xFF marker, 2-byte length, 1-byte
type, 19..4096 bytes). Two simplifications apply to UPDATE bodies:

* every prefix is encoded as ``[family][length][significant bytes]`` so
  IPv4 and IPv6 NLRI share one message without MP_REACH/MP_UNREACH;
* AS_PATH segments always carry 4-byte AS numbers.

OPEN keeps the classic 2-byte My AS field; AS numbers above 65535 are sent
as AS_TRANS with the real value in a four-octet-AS capability.
"""

from __future__ import annotations

import enum
import struct
from dataclasses import dataclass
from typing import Union

from ..prefix import BadPrefix, Prefix

MARKER = b"\xff" * 16
HEADER_LEN = 19
MAX_MESSAGE = 4096

OPEN, UPDATE, NOTIFICATION, KEEPALIVE = 1, 2, 3, 4

AS_TRANS = 23456
CAP_FOUR_OCTET_AS = 65

ATTR_ORIGIN = 1
ATTR_AS_PATH = 2
ATTR_NEXT_HOP = 3
ATTR_MED = 4
ATTR_LOCAL_PREF = 5

FLAG_OPTIONAL = 0x80
FLAG_TRANSITIVE = 0x40
FLAG_EXTENDED = 0x10

AS_SEQUENCE = 2

_HDR = struct.Struct(">16sHB")


class Origin(enum.IntEnum):
    IGP = 0
    EGP = 1
    INCOMPLETE = 2


@dataclass(frozen=True)
class PathAttrs:
    origin: Origin
    as_path: tuple[int, ...]
    next_hop: int
    med: int | None = None
    local_pref: int | None = None


@dataclass(frozen=True)
class Open:
    my_as: int
    hold_time: int
    bgp_id: int
    version: int = 4


@dataclass(frozen=True)
class Update:
    withdrawn: tuple[Prefix, ...] = ()
    attrs: PathAttrs | None = None
    nlri: tuple[Prefix, ...] = ()


@dataclass(frozen=True)
class Keepalive:
    pass


@dataclass(frozen=True)
class Notification:
    code: int
    subcode: int
    data: bytes = b""


BgpMessage = Union[Open, Update, Keepalive, Notification]


class BgpError(Exception):
    """Codec error; ``code``/``subcode`` give the NOTIFICATION to send."""

    code = 0
    subcode = 0

    def notification(self) -> Notification:
        return Notification(self.code, self.subcode)


class NeedMoreData(BgpError):
    pass


class BadMarker(BgpError):
    code, subcode = 1, 1


class BadLength(BgpError):
    code, subcode = 1, 2


class UnknownType(BgpError):
    code, subcode = 1, 3


class MalformedOpen(BgpError):
    code, subcode = 2, 0


class MalformedUpdate(BgpError):
    code = 3

    def __init__(self, msg: str, subcode: int = 1):
        super().__init__(msg)
        self.subcode = subcode


class MessageTooLarge(BgpError):
    pass


# -- prefixes -------------------------------------------------------------

def prefix_wire_len(p: Prefix) -> int:
    return 2 + p.nbytes


def _encode_prefixes(prefixes) -> bytes:
    out = bytearray()
    for p in prefixes:
        out.append(p.family)
        out.append(p.length)
        out += p.bits[:p.nbytes]
    return bytes(out)


def _decode_prefixes(data: bytes) -> tuple[Prefix, ...]:
    out = []
    pos, end = 0, len(data)
    while pos < end:
        if pos + 2 > end:
            raise MalformedUpdate("truncated prefix", 10)
        family, length = data[pos], data[pos + 1]
        width = 4 if family == 4 else 16 if family == 6 else 0
        if not width or length > width * 8:
            raise MalformedUpdate(f"invalid prefix family/length {family}/{length}", 10)
        n = (length + 7) // 8
        raw = data[pos + 2:pos + 2 + n]
        if len(raw) != n:
            raise MalformedUpdate("truncated prefix", 10)
        try:
            out.append(Prefix.make(family, raw + bytes(width - n), length))
        except BadPrefix as exc:
            raise MalformedUpdate(str(exc), 10) from None
        pos += 2 + n
    return tuple(out)


# -- attributes -----------------------------------------------------------

def _attr(flags: int, code: int, value: bytes) -> bytes:
    if len(value) > 255:
        return struct.pack(">BBH", flags | FLAG_EXTENDED, code, len(value)) + value
    return struct.pack(">BBB", flags, code, len(value)) + value


def encode_attrs(a: PathAttrs) -> bytes:
    path = bytearray()
    asns = a.as_path
    for i in range(0, len(asns), 255):
        seg = asns[i:i + 255]
        path += struct.pack(">BB", AS_SEQUENCE, len(seg))
        path += struct.pack(f">{len(seg)}I", *seg)
    out = _attr(FLAG_TRANSITIVE, ATTR_ORIGIN, bytes([a.origin]))
    out += _attr(FLAG_TRANSITIVE, ATTR_AS_PATH, bytes(path))
    out += _attr(FLAG_TRANSITIVE, ATTR_NEXT_HOP, struct.pack(">I", a.next_hop))
    if a.med is not None:
        out += _attr(FLAG_OPTIONAL, ATTR_MED, struct.pack(">I", a.med))
    if a.local_pref is not None:
        out += _attr(FLAG_TRANSITIVE, ATTR_LOCAL_PREF, struct.pack(">I", a.local_pref))
    return out


def decode_attrs(data: bytes) -> PathAttrs:
    seen: dict[int, bytes] = {}
    pos, end = 0, len(data)
    while pos < end:
        if pos + 3 > end:
            raise MalformedUpdate("truncated attribute header", 1)
        flags, code = data[pos], data[pos + 1]
        if flags & FLAG_EXTENDED:
            if pos + 4 > end:
                raise MalformedUpdate("truncated attribute header", 1)
            (length,) = struct.unpack_from(">H", data, pos + 2)
            pos += 4
        else:
            length = data[pos + 2]
            pos += 3
        if pos + length > end:
            raise MalformedUpdate(f"attribute {code} overruns list", 5)
        if code in seen:
            raise MalformedUpdate(f"duplicate attribute {code}", 1)
        seen[code] = data[pos:pos + length]
        pos += length
    for required in (ATTR_ORIGIN, ATTR_AS_PATH, ATTR_NEXT_HOP):
        if required not in seen:
            raise MalformedUpdate(f"missing well-known attribute {required}", 3)
    origin_raw = seen[ATTR_ORIGIN]
    if len(origin_raw) != 1:
        raise MalformedUpdate("bad ORIGIN length", 5)
    if origin_raw[0] > 2:
        raise MalformedUpdate("invalid ORIGIN", 6)
    path_raw = seen[ATTR_AS_PATH]
    asns: list[int] = []
    p = 0
    while p < len(path_raw):
        if p + 2 > len(path_raw):
            raise MalformedUpdate("truncated AS_PATH segment", 11)
        stype, count = path_raw[p], path_raw[p + 1]
        if stype != AS_SEQUENCE:
            raise MalformedUpdate(f"unsupported AS_PATH segment type {stype}", 11)
        seg = path_raw[p + 2:p + 2 + 4 * count]
        if len(seg) != 4 * count:
            raise MalformedUpdate("truncated AS_PATH segment", 11)
        asns.extend(struct.unpack(f">{count}I", seg))
        p += 2 + 4 * count
    nh = seen[ATTR_NEXT_HOP]
    if len(nh) != 4:
        raise MalformedUpdate("bad NEXT_HOP length", 5)
    med = local_pref = None
    if ATTR_MED in seen:
        if len(seen[ATTR_MED]) != 4:
            raise MalformedUpdate("bad MED length", 5)
        (med,) = struct.unpack(">I", seen[ATTR_MED])
    if ATTR_LOCAL_PREF in seen:
        if len(seen[ATTR_LOCAL_PREF]) != 4:
            raise MalformedUpdate("bad LOCAL_PREF length", 5)
        (local_pref,) = struct.unpack(">I", seen[ATTR_LOCAL_PREF])
    return PathAttrs(Origin(origin_raw[0]), tuple(asns), struct.unpack(">I", nh)[0],
                     med, local_pref)


# -- messages -------------------------------------------------------------

def _frame(mtype: int, body: bytes) -> bytes:
    total = HEADER_LEN + len(body)
    if total > MAX_MESSAGE:
        raise MessageTooLarge(f"{total} bytes exceeds {MAX_MESSAGE}")
    return _HDR.pack(MARKER, total, mtype) + body


def encode_update_body(u: Update) -> bytes:
    if u.nlri and u.attrs is None:
        raise ValueError("UPDATE with NLRI needs path attributes")
    withdrawn = _encode_prefixes(u.withdrawn)
    attrs = encode_attrs(u.attrs) if u.attrs is not None else b""
    return (struct.pack(">H", len(withdrawn)) + withdrawn
            + struct.pack(">H", len(attrs)) + attrs + _encode_prefixes(u.nlri))


def encode_message(m: BgpMessage) -> bytes:
    if isinstance(m, Keepalive):
        return _frame(KEEPALIVE, b"")
    if isinstance(m, Update):
        return _frame(UPDATE, encode_update_body(m))
    if isinstance(m, Open):
        opt = b""
        my_as = m.my_as
        if my_as > 0xFFFF:
            cap = struct.pack(">BBI", CAP_FOUR_OCTET_AS, 4, my_as)
            opt = struct.pack(">BB", 2, len(cap)) + cap
            my_as = AS_TRANS
        body = struct.pack(">BHHIB", m.version, my_as, m.hold_time, m.bgp_id, len(opt)) + opt
        return _frame(OPEN, body)
    if isinstance(m, Notification):
        return _frame(NOTIFICATION, struct.pack(">BB", m.code, m.subcode) + m.data)
    raise TypeError(f"not a BGP message: {m!r}")


def _decode_open(body: bytes) -> Open:
    if len(body) < 10:
        raise MalformedOpen("short OPEN")
    version, my_as, hold, bgp_id, opt_len = struct.unpack_from(">BHHIB", body)
    opt = body[10:]
    if len(opt) != opt_len:
        raise MalformedOpen("optional parameter length mismatch")
    pos = 0
    while pos < len(opt):
        if pos + 2 > len(opt):
            raise MalformedOpen("truncated optional parameter")
        ptype, plen = opt[pos], opt[pos + 1]
        value = opt[pos + 2:pos + 2 + plen]
        if len(value) != plen:
            raise MalformedOpen("truncated optional parameter")
        if ptype == 2:
            c = 0
            while c < len(value):
                if c + 2 > len(value):
                    raise MalformedOpen("truncated capability")
                ccode, clen = value[c], value[c + 1]
                cval = value[c + 2:c + 2 + clen]
                if len(cval) != clen:
                    raise MalformedOpen("truncated capability")
                if ccode == CAP_FOUR_OCTET_AS and clen == 4:
                    (my_as,) = struct.unpack(">I", cval)
                c += 2 + clen
        pos += 2 + plen
    return Open(my_as, hold, bgp_id, version)


def decode_message(buf: bytes | bytearray | memoryview, start: int = 0) -> tuple[BgpMessage, int]:
    """Decode one message at ``buf[start:]``.

    Returns the message and the number of bytes it occupied. Raises
    NeedMoreData if the buffer holds only part of a message.
    """
    avail = len(buf) - start
    if avail < HEADER_LEN:
        if bytes(buf[start:start + min(avail, 16)]) != MARKER[:min(avail, 16)]:
            raise BadMarker("marker is not all ones")
        raise NeedMoreData(f"{avail} bytes buffered")
    marker, length, mtype = _HDR.unpack_from(buf, start)
    if marker != MARKER:
        raise BadMarker("marker is not all ones")
    if length < HEADER_LEN or length > MAX_MESSAGE:
        raise BadLength(f"length {length}")
    if avail < length:
        raise NeedMoreData(f"{avail} of {length} bytes buffered")
    body = bytes(buf[start + HEADER_LEN:start + length])
    if mtype == KEEPALIVE:
        if body:
            raise BadLength("KEEPALIVE with body")
        return Keepalive(), length
    if mtype == UPDATE:
        return _decode_update(body), length
    if mtype == OPEN:
        return _decode_open(body), length
    if mtype == NOTIFICATION:
        if len(body) < 2:
            raise BadLength("short NOTIFICATION")
        return Notification(body[0], body[1], body[2:]), length
    raise UnknownType(f"message type {mtype}")


def _decode_update(body: bytes) -> Update:
    if len(body) < 4:
        raise MalformedUpdate("short UPDATE", 1)
    (wlen,) = struct.unpack_from(">H", body)
    if 2 + wlen + 2 > len(body):
        raise MalformedUpdate("withdrawn routes overrun", 1)
    withdrawn = _decode_prefixes(body[2:2 + wlen])
    (alen,) = struct.unpack_from(">H", body, 2 + wlen)
    apos = 4 + wlen
    if apos + alen > len(body):
        raise MalformedUpdate("attributes overrun", 1)
    nlri = _decode_prefixes(body[apos + alen:])
    attrs = decode_attrs(body[apos:apos + alen]) if alen else None
    if nlri and attrs is None:
        raise MalformedUpdate("NLRI without path attributes", 3)
    return Update(withdrawn, attrs, nlri)


def update_size(n_withdrawn_bytes: int, attrs_len: int, n_nlri_bytes: int) -> int:
    return HEADER_LEN + 4 + n_withdrawn_bytes + attrs_len + n_nlri_bytes
