"""Socket-like transport API with PlainStream and SecureMux backends.

Both backends run over the simulator's datagram fabric and share the same
reliability engine: per-stream byte offsets, cumulative + selective acks,
and a per-connection retransmission timer (RTO = max(3 x one-way delay,
100 ms), doubled on each retry, connection closed after 5 retries).

PlainStream models TCP: one implicit stream, no authentication, a
SYN/SYN-ACK handshake. SecureMux models QUIC: a 1-RTT handshake carrying
self-signed certificates and an ephemeral key share, many streams per
connection, and an integrity tag on every frame. Frames whose tag does not
verify are dropped exactly like lost datagrams.

Writes are coalesced: ``stream_send`` only appends to a buffer and the
connection flushes once per simulator instant.
"""

from __future__ import annotations

import enum
import hashlib
import logging
import random
import struct
from dataclasses import dataclass
from typing import Callable

from ..netsim import MS, Link, Simulator
from . import wire
from .security import (
    ClientHello,
    HandshakeError,
    KeyShare,
    NONCE_LEN,
    SecurityConfig,
    ServerHello,
    session_key,
)

log = logging.getLogger(__name__)

MIN_RTO = 100 * MS
RTO_FACTOR = 3
MAX_RETRIES = 5
DEFAULT_MAX_STREAMS = 100
SERVER_STREAM_BASE = 0x8000_0000

PROTO_PLAIN = "tcp"
PROTO_MUX = "quic"


class TransportKind(enum.Enum):
    PLAIN_STREAM = "PlainStream"
    SECURE_MUX = "SecureMux"


@dataclass(frozen=True)
class EndpointAddress:
    node_id: str
    port: int

    def __post_init__(self):
        if not 1 <= self.port <= 65535:
            raise ValueError(f"port {self.port} outside 1..65535")


class ConnState(enum.Enum):
    HANDSHAKING = "Handshaking"
    ESTABLISHED = "Established"
    CLOSED = "Closed"


class CloseCause(enum.IntEnum):
    PEER = 0
    REFUSED = 1
    ALPN_MISMATCH = 2
    UNTRUSTED_PEER = 3
    HANDSHAKE_ERROR = 4
    TIMEOUT = 5
    LOCAL = 6


HANDSHAKE_FAILURES = {CloseCause.ALPN_MISMATCH, CloseCause.UNTRUSTED_PEER,
                      CloseCause.HANDSHAKE_ERROR}


@dataclass(frozen=True)
class CloseReason:
    code: int = 0
    text: str = ""
    cause: CloseCause = CloseCause.PEER

    @property
    def handshake_failed(self) -> bool:
        return self.cause in HANDSHAKE_FAILURES


class EventKind(enum.Enum):
    ACCEPTED = "Accepted"
    ESTABLISHED = "Established"
    STREAM_OPENED = "StreamOpened"
    DATA = "Data"
    CLOSED = "Closed"


@dataclass(frozen=True)
class TransportEvent:
    kind: EventKind
    conn: "Connection"
    stream: "Stream | None" = None
    data: bytes = b""
    reason: CloseReason | None = None


EventHandler = Callable[[TransportEvent], None]


class TransportError(Exception):
    pass


class AddressInUse(TransportError):
    pass


class MissingSecurityConfig(TransportError):
    pass


class NotEstablished(TransportError):
    pass


class ConnectionClosed(NotEstablished):
    pass


class StreamLimitExceeded(TransportError):
    pass


class StreamClosed(TransportError):
    pass


class _Segment:
    __slots__ = ("data", "deadline", "retries")

    def __init__(self, data: bytes, deadline: int):
        self.data = data
        self.deadline = deadline
        self.retries = 0


class Stream:
    """One reliable, ordered, bidirectional byte stream."""

    def __init__(self, conn: "Connection", sid: int):
        self.conn = conn
        self.id = sid
        self.bytes_sent = 0
        self.bytes_received = 0
        self.closed = False
        self.announced = False
        self._pending = bytearray()
        self._next_off = 0
        self._inflight: dict[int, _Segment] = {}
        self._ooo: dict[int, bytes] = {}
        self._ack_pending = False

    @property
    def offsets(self) -> tuple[int, int]:
        return (self.bytes_sent, self.bytes_received)

    @property
    def idle(self) -> bool:
        return not self._pending and not self._inflight

    def send(self, payload: bytes) -> int:
        return self.conn.transport.stream_send(self, payload)

    def close(self) -> None:
        """Stop accepting writes on this stream (local only)."""
        self.closed = True

    def __repr__(self) -> str:
        return f"Stream({self.conn.id:#x}/{self.id})"


class Connection:
    """Handle for one transport connection; see ``Transport``."""

    def __init__(self, transport: "Transport", conn_id: int, kind: TransportKind, role: str,
                 local: str, remote: str, port: int, link: Link,
                 sec: SecurityConfig | None, handler: EventHandler | None):
        self.transport = transport
        self.id = conn_id
        self.kind = kind
        self.role = role
        self.local = local
        self.remote = remote
        self.port = port
        self.link = link
        self.sec = sec
        self.handler = handler
        self.state = ConnState.HANDSHAKING
        self.close_reason: CloseReason | None = None
        self.peer_fingerprint: str | None = None
        self.streams: dict[int, Stream] = {}
        self.max_streams = transport.max_streams
        self.rto = max(RTO_FACTOR * link.delay, MIN_RTO)
        self._next_sid = 0 if role == "client" else SERVER_STREAM_BASE
        self._key: bytes | None = None
        self._kx: KeyShare | None = None
        self._nonce = b""
        self._ctl: _Segment | None = None  # handshake or close packet awaiting reply
        self._hs_reply: bytes | None = None
        self._timer = None
        self._flush_scheduled = False
        self._draining: tuple[int, str] | None = None
        self._finished = False

    @property
    def peer_identity(self) -> str | None:
        if self.state is ConnState.ESTABLISHED:
            return self.peer_fingerprint
        return None

    @property
    def mss(self) -> int:
        if self.kind is TransportKind.SECURE_MUX:
            return min(wire.MAX_MUX_PAYLOAD, self.link.spec.mtu - wire.MUX_OVERHEAD)
        return self.link.spec.mtu - wire.PLAIN_OVERHEAD

    def open_stream(self) -> Stream:
        return self.transport.open_stream(self)

    def close(self, code: int = 0, text: str = "") -> None:
        self.transport.close(self, code, text)

    def __repr__(self) -> str:
        return (f"Connection({self.kind.value}, {self.local}->{self.remote}:{self.port}, "
                f"{self.state.value})")


class Listener:
    def __init__(self, transport: "Transport", addr: EndpointAddress, kind: TransportKind,
                 sec: SecurityConfig | None, handler: EventHandler | None):
        self.transport = transport
        self.addr = addr
        self.kind = kind
        self.sec = sec
        self.handler = handler

    def close(self) -> None:
        self.transport._listeners.pop((self.addr.node_id, self.addr.port, self.kind), None)

    def __repr__(self) -> str:
        return f"Listener({self.kind.value} {self.addr.node_id}:{self.addr.port})"


class Transport:
    """Per-simulation transport registry. All calls run on the simulator thread."""

    def __init__(self, sim: Simulator, max_streams: int = DEFAULT_MAX_STREAMS):
        self.sim = sim
        self.max_streams = max_streams
        self._listeners: dict[tuple[str, int, TransportKind], Listener] = {}
        self._conns: dict[tuple[str, int], Connection] = {}
        self._attached: set[str] = set()
        digest = hashlib.sha256(f"roq-transport|{sim.seed}".encode()).digest()
        self._rng = random.Random(int.from_bytes(digest[:8], "big"))
        self.frames_sent: dict[str, int] = {}
        self.bytes_sent: dict[str, int] = {}

    # -- public API -------------------------------------------------------

    def open_listener(self, addr: EndpointAddress, kind: TransportKind,
                      sec: SecurityConfig | None = None,
                      on_event: EventHandler | None = None) -> Listener:
        key = (addr.node_id, addr.port, kind)
        if key in self._listeners:
            raise AddressInUse(f"{kind.value} {addr.node_id}:{addr.port}")
        if kind is TransportKind.SECURE_MUX and sec is None:
            raise MissingSecurityConfig("SecureMux listeners need a SecurityConfig")
        self._attach(addr.node_id)
        lst = Listener(self, addr, kind, sec, on_event)
        self._listeners[key] = lst
        return lst

    def dial(self, local: str, remote: EndpointAddress, kind: TransportKind,
             sec: SecurityConfig | None = None,
             on_event: EventHandler | None = None) -> Connection:
        """Start a connection. Failures arrive later as a Closed event."""
        if kind is TransportKind.SECURE_MUX and sec is None:
            raise MissingSecurityConfig("SecureMux dial needs a SecurityConfig")
        self._attach(local)
        self._attach(remote.node_id)
        link = self.sim.link_between(local, remote.node_id)
        conn_id = self._rng.getrandbits(64)
        while (local, conn_id) in self._conns or (remote.node_id, conn_id) in self._conns:
            conn_id = self._rng.getrandbits(64)
        conn = Connection(self, conn_id, kind, "client", local, remote.node_id, remote.port,
                          link, sec if kind is TransportKind.SECURE_MUX else None, on_event)
        self._conns[(local, conn_id)] = conn
        if kind is TransportKind.SECURE_MUX:
            conn._nonce = self._rng.randbytes(NONCE_LEN)
            conn._kx = KeyShare(self._rng.randbytes(32))
            hello = ClientHello.build(conn_id, remote.port, sec, conn._nonce, conn._kx.public)
            packet = wire.encode_mux(wire.MuxFrame(wire.INITIAL, conn_id, 0, 0, hello), None)
        else:
            packet = wire.encode_plain(
                wire.PlainSegment(wire.SYN, conn_id, 0, struct.pack(">H", remote.port)))
        conn._ctl = _Segment(packet, self.sim.now + conn.rto)
        self._emit_raw(conn, packet)
        self._arm(conn, conn._ctl.deadline)
        return conn

    def open_stream(self, conn: Connection) -> Stream:
        if conn.state is ConnState.CLOSED:
            raise ConnectionClosed("connection is closed")
        if conn.state is not ConnState.ESTABLISHED:
            raise NotEstablished("connection still handshaking")
        if conn.kind is TransportKind.PLAIN_STREAM:
            s = conn.streams.get(0)
            if s is None:
                s = self._new_stream(conn, 0)
            s.announced = True
            return s
        if len(conn.streams) >= conn.max_streams:
            raise StreamLimitExceeded(f"limit {conn.max_streams} reached")
        sid = conn._next_sid
        conn._next_sid += 1
        s = self._new_stream(conn, sid)
        s.announced = True
        return s

    def stream_send(self, s: Stream, payload: bytes) -> int:
        conn = s.conn
        if conn.state is ConnState.CLOSED:
            raise ConnectionClosed("connection is closed")
        if conn.state is not ConnState.ESTABLISHED:
            raise NotEstablished("connection still handshaking")
        if s.closed:
            raise StreamClosed(repr(s))
        if not payload:
            return 0
        s._pending += payload
        s.bytes_sent += len(payload)
        self._schedule_flush(conn)
        return len(payload)

    def close(self, conn: Connection, code: int = 0, text: str = "") -> None:
        """Close gracefully: queued data is still delivered, then CLOSE is sent."""
        if conn.state is ConnState.CLOSED:
            return
        was_established = conn.state is ConnState.ESTABLISHED
        self._set_closed(conn, CloseReason(code, text, CloseCause.LOCAL), deferred=True)
        for s in conn.streams.values():
            s.closed = True
        if not was_established:
            conn._ctl = None
            conn._finished = True
            return
        conn._draining = (code, text)
        self._maybe_send_close(conn)

    def peer_identity(self, conn: Connection) -> str | None:
        if conn.state is not ConnState.ESTABLISHED:
            raise NotEstablished("peer identity is only known on established connections")
        return conn.peer_fingerprint

    def connections(self, node_id: str | None = None) -> list[Connection]:
        return [c for (n, _), c in self._conns.items() if node_id is None or n == node_id]

    # -- plumbing ---------------------------------------------------------

    def _attach(self, node_id: str) -> None:
        if node_id in self._attached:
            return
        node = self.sim.nodes[node_id]
        node.register(PROTO_PLAIN, lambda src, data, link: self._on_plain(node_id, src, data, link))
        node.register(PROTO_MUX, lambda src, data, link: self._on_mux(node_id, src, data, link))
        self._attached.add(node_id)

    def _new_stream(self, conn: Connection, sid: int) -> Stream:
        s = Stream(conn, sid)
        conn.streams[sid] = s
        return s

    def _deliver(self, conn: Connection, event: TransportEvent) -> None:
        if conn.handler is not None:
            conn.handler(event)

    def _set_closed(self, conn: Connection, reason: CloseReason, deferred: bool = False) -> None:
        conn.state = ConnState.CLOSED
        conn.close_reason = reason
        for s in conn.streams.values():
            s._ooo.clear()
        ev = TransportEvent(EventKind.CLOSED, conn, reason=reason)
        if deferred:
            self.sim.call_soon(self._deliver, conn, ev)
        else:
            self._deliver(conn, ev)

    def _emit_raw(self, conn: Connection, packet: bytes) -> None:
        proto = PROTO_MUX if conn.kind is TransportKind.SECURE_MUX else PROTO_PLAIN
        self.frames_sent[proto] = self.frames_sent.get(proto, 0) + 1
        self.bytes_sent[proto] = self.bytes_sent.get(proto, 0) + len(packet)
        self.sim.send_datagram(conn.local, conn.link, packet, proto)

    def _reply_raw(self, node_id: str, link: Link, proto: str, packet: bytes) -> None:
        self.frames_sent[proto] = self.frames_sent.get(proto, 0) + 1
        self.bytes_sent[proto] = self.bytes_sent.get(proto, 0) + len(packet)
        self.sim.send_datagram(node_id, link, packet, proto)

    def _data_packet(self, conn: Connection, sid: int, offset: int, data: bytes) -> bytes:
        if conn.kind is TransportKind.SECURE_MUX:
            return wire.encode_mux(wire.MuxFrame(wire.STREAM, conn.id, sid, offset, data), conn._key)
        return wire.encode_plain(wire.PlainSegment(0, conn.id, offset, data))

    def _ack_packet(self, conn: Connection, s: Stream) -> bytes:
        ranges = []
        if s._ooo:
            for off in sorted(s._ooo):
                end = off + len(s._ooo[off])
                if ranges and ranges[-1][1] == off:
                    ranges[-1][1] = end
                else:
                    ranges.append([off, end])
        payload = wire.encode_ranges([tuple(r) for r in ranges])
        if conn.kind is TransportKind.SECURE_MUX:
            return wire.encode_mux(
                wire.MuxFrame(wire.ACK, conn.id, s.id, s.bytes_received, payload), conn._key)
        return wire.encode_plain(wire.PlainSegment(wire.ACK_FLAG, conn.id, s.bytes_received, payload))

    def _close_packet(self, conn: Connection, code: int, text: str, cause: CloseCause,
                      key: bytes | None) -> bytes:
        payload = bytes([cause]) + wire.encode_close(code, text)
        if conn.kind is TransportKind.SECURE_MUX:
            return wire.encode_mux(wire.MuxFrame(wire.CLOSE, conn.id, 0, 0, payload), key)
        return wire.encode_plain(wire.PlainSegment(wire.FIN, conn.id, 0, payload))

    def _schedule_flush(self, conn: Connection) -> None:
        if not conn._flush_scheduled:
            conn._flush_scheduled = True
            self.sim.call_soon(self._flush, conn)

    def _flush(self, conn: Connection) -> None:
        conn._flush_scheduled = False
        if conn._finished:
            return
        now = self.sim.now
        mss = conn.mss
        armed = None
        for sid in sorted(conn.streams):
            s = conn.streams[sid]
            if s._pending:
                buf = bytes(s._pending)
                s._pending.clear()
                for i in range(0, len(buf), mss):
                    chunk = buf[i:i + mss]
                    seg = _Segment(chunk, now + conn.rto)
                    s._inflight[s._next_off] = seg
                    self._emit_raw(conn, self._data_packet(conn, sid, s._next_off, chunk))
                    s._next_off += len(chunk)
                armed = now + conn.rto
            if s._ack_pending:
                s._ack_pending = False
                self._emit_raw(conn, self._ack_packet(conn, s))
        if armed is not None:
            self._arm(conn, armed)

    def _arm(self, conn: Connection, deadline: int) -> None:
        t = conn._timer
        if t is not None and not t.cancelled and not t.fired and t.at <= deadline:
            return
        if t is not None:
            t.cancel()
        conn._timer = self.sim.set_timer(deadline, self._on_rto, conn)

    def _on_rto(self, conn: Connection) -> None:
        conn._timer = None
        if conn._finished:
            return
        now = self.sim.now
        nxt = None
        ctl = conn._ctl
        if ctl is not None:
            if ctl.deadline <= now:
                if ctl.retries >= MAX_RETRIES:
                    self._give_up(conn)
                    return
                ctl.retries += 1
                ctl.deadline = now + (conn.rto << ctl.retries)
                self._emit_raw(conn, ctl.data)
            nxt = ctl.deadline
        for sid, s in conn.streams.items():
            for off, seg in s._inflight.items():
                if seg.deadline <= now:
                    if seg.retries >= MAX_RETRIES:
                        self._give_up(conn)
                        return
                    seg.retries += 1
                    seg.deadline = now + (conn.rto << seg.retries)
                    self._emit_raw(conn, self._data_packet(conn, sid, off, seg.data))
                if nxt is None or seg.deadline < nxt:
                    nxt = seg.deadline
        if nxt is not None:
            self._arm(conn, nxt)

    def _give_up(self, conn: Connection) -> None:
        conn._finished = True
        conn._ctl = None
        if conn.state is not ConnState.CLOSED:
            log.info("%s: retransmission limit reached, closing", conn)
            self._set_closed(conn, CloseReason(0, "retransmission timeout", CloseCause.TIMEOUT))

    def _maybe_send_close(self, conn: Connection) -> None:
        if conn._draining is None or conn._ctl is not None:
            return
        if all(s.idle for s in conn.streams.values()):
            code, text = conn._draining
            packet = self._close_packet(conn, code, text, CloseCause.PEER, conn._key)
            conn._ctl = _Segment(packet, self.sim.now + conn.rto)
            self._emit_raw(conn, packet)
            self._arm(conn, conn._ctl.deadline)

    def _on_established(self, conn: Connection) -> None:
        conn.state = ConnState.ESTABLISHED
        conn._ctl = None
        if conn.kind is TransportKind.PLAIN_STREAM:
            self._new_stream(conn, 0)
        self._deliver(conn, TransportEvent(EventKind.ESTABLISHED, conn))

    def _on_stream_data(self, conn: Connection, sid: int, offset: int, data: bytes) -> None:
        s = conn.streams.get(sid)
        if s is None:
            if conn.state is not ConnState.ESTABLISHED:
                return
            mine = (sid >= SERVER_STREAM_BASE) == (conn.role == "server")
            if mine or len(conn.streams) >= conn.max_streams:
                log.debug("%s: rejecting frame for stream %d", conn, sid)
                return
            s = self._new_stream(conn, sid)
        s._ack_pending = True
        self._schedule_flush(conn)
        end = offset + len(data)
        got = s.bytes_received
        if end <= got or not data:
            return
        if offset > got:
            s._ooo.setdefault(offset, data)
            return
        if offset < got:
            data = data[got - offset:]
        chunks = [data]
        pos = end
        ooo = s._ooo
        while pos in ooo:
            d = ooo.pop(pos)
            chunks.append(d)
            pos += len(d)
        s.bytes_received = pos
        if conn.state is not ConnState.ESTABLISHED:
            return
        if not s.announced:
            s.announced = True
            self._deliver(conn, TransportEvent(EventKind.STREAM_OPENED, conn, s))
            if conn.state is not ConnState.ESTABLISHED:
                return
        self._deliver(conn, TransportEvent(EventKind.DATA, conn, s,
                                           chunks[0] if len(chunks) == 1 else b"".join(chunks)))

    def _on_ack(self, conn: Connection, sid: int, cum: int, ranges: list[tuple[int, int]]) -> None:
        s = conn.streams.get(sid)
        if s is None:
            return
        inflight = s._inflight
        while inflight:
            off = next(iter(inflight))
            if off + len(inflight[off].data) <= cum:
                del inflight[off]
            else:
                break
        for a, b in ranges:
            for off in [o for o, seg in inflight.items() if o >= a and o + len(seg.data) <= b]:
                del inflight[off]
        if conn._draining is not None:
            self._maybe_send_close(conn)

    def _on_peer_close(self, conn: Connection, payload: bytes) -> None:
        try:
            cause = CloseCause(payload[0]) if payload else CloseCause.PEER
            code, text = wire.decode_close(payload[1:])
        except (ValueError, wire.WireError):
            cause, code, text = CloseCause.PEER, 0, ""
        if conn.state is not ConnState.CLOSED:
            conn._finished = True
            conn._ctl = None
            self._set_closed(conn, CloseReason(code, text, cause))

    # -- SecureMux receive path -------------------------------------------

    def _on_mux(self, node_id: str, src: str, data: bytes, link: Link) -> None:
        try:
            ftype, conn_id = wire.peek_mux(data)
        except wire.WireError:
            return
        conn = self._conns.get((node_id, conn_id))
        if ftype == wire.INITIAL:
            self._mux_initial(node_id, src, conn_id, conn, data, link)
            return
        if conn is None or conn.kind is not TransportKind.SECURE_MUX:
            return
        key = None if ftype == wire.HANDSHAKE else conn._key
        try:
            frame = wire.decode_mux(data, key)
        except wire.WireError as exc:
            log.debug("%s: dropping frame: %s", conn, exc)
            return
        if ftype == wire.HANDSHAKE:
            self._mux_handshake(conn, frame)
        elif ftype == wire.STREAM:
            if conn.state is ConnState.HANDSHAKING:
                return
            self._on_stream_data(conn, frame.stream_id, frame.offset, frame.payload)
        elif ftype == wire.ACK:
            try:
                ranges = wire.decode_ranges(frame.payload)
            except wire.WireError:
                return
            self._on_ack(conn, frame.stream_id, frame.offset, ranges)
        elif ftype == wire.CLOSE:
            self._reply_raw(node_id, link, PROTO_MUX, wire.encode_mux(
                wire.MuxFrame(wire.CLOSE_ACK, conn.id, 0, 0, b""), conn._key))
            self._on_peer_close(conn, frame.payload)
        elif ftype == wire.CLOSE_ACK:
            if conn._draining is not None:
                conn._ctl = None
                conn._finished = True

    def _mux_initial(self, node_id: str, src: str, conn_id: int, conn: Connection | None,
                     data: bytes, link: Link) -> None:
        if conn is not None:
            if conn.role == "server" and conn._hs_reply is not None and not conn._finished:
                self._emit_raw(conn, conn._hs_reply)
            return
        try:
            frame = wire.decode_mux(data, None)
            hello = ClientHello.parse(conn_id, frame.payload)
        except (wire.WireError, HandshakeError) as exc:
            log.debug("%s: bad initial from %s: %s", node_id, src, exc)
            return

        def refuse(cause: CloseCause, text: str) -> None:
            payload = bytes([cause]) + wire.encode_close(0, text)
            self._reply_raw(node_id, link, PROTO_MUX,
                            wire.encode_mux(wire.MuxFrame(wire.CLOSE, conn_id, 0, 0, payload), None))

        lst = self._listeners.get((node_id, hello.port, TransportKind.SECURE_MUX))
        if lst is None:
            refuse(CloseCause.REFUSED, "connection refused")
            return
        if hello.alpn != lst.sec.alpn:
            refuse(CloseCause.ALPN_MISMATCH, f"alpn {hello.alpn!r} not offered")
            return
        if not lst.sec.trust.allows(hello.cert.fingerprint):
            refuse(CloseCause.UNTRUSTED_PEER, "client certificate not trusted")
            return
        conn = Connection(self, conn_id, TransportKind.SECURE_MUX, "server", node_id, src,
                          hello.port, link, lst.sec, lst.handler)
        self._conns[(node_id, conn_id)] = conn
        nonce = self._rng.randbytes(NONCE_LEN)
        kx = KeyShare(self._rng.randbytes(32))
        reply = ServerHello.build(conn_id, hello, lst.sec, nonce, kx.public)
        conn._key = session_key(kx.agree(hello.kx_public), hello.nonce, nonce)
        conn.peer_fingerprint = hello.cert.fingerprint
        conn._hs_reply = wire.encode_mux(wire.MuxFrame(wire.HANDSHAKE, conn_id, 0, 0, reply), None)
        self._emit_raw(conn, conn._hs_reply)
        self._deliver(conn, TransportEvent(EventKind.ACCEPTED, conn))
        if conn.state is ConnState.HANDSHAKING:
            self._on_established(conn)

    def _mux_handshake(self, conn: Connection, frame: wire.MuxFrame) -> None:
        if conn.role != "client" or conn.state is not ConnState.HANDSHAKING:
            return
        try:
            hello = ServerHello.parse(conn.id, frame.payload, conn._nonce, conn._kx.public,
                                      conn.sec.alpn)
        except HandshakeError as exc:
            log.info("%s: handshake failed: %s", conn, exc)
            conn._finished = True
            self._set_closed(conn, CloseReason(0, str(exc), CloseCause.HANDSHAKE_ERROR))
            return
        conn._key = session_key(conn._kx.agree(hello.kx_public), conn._nonce, hello.nonce)
        if not conn.sec.trust.allows(hello.cert.fingerprint):
            packet = self._close_packet(conn, 0, "server certificate not trusted",
                                        CloseCause.UNTRUSTED_PEER, conn._key)
            self._emit_raw(conn, packet)
            conn._finished = True
            self._set_closed(conn, CloseReason(0, "server certificate not trusted",
                                               CloseCause.UNTRUSTED_PEER))
            return
        conn.peer_fingerprint = hello.cert.fingerprint
        self._on_established(conn)

    # -- PlainStream receive path -----------------------------------------

    def _on_plain(self, node_id: str, src: str, data: bytes, link: Link) -> None:
        try:
            seg = wire.decode_plain(data)
        except wire.WireError:
            return
        conn = self._conns.get((node_id, seg.conn_id))
        flags = seg.flags
        if flags & wire.SYN:
            if flags & wire.ACK_FLAG:
                if conn is not None and conn.role == "client" and conn.state is ConnState.HANDSHAKING:
                    self._on_established(conn)
                return
            self._plain_syn(node_id, src, seg, conn, link)
            return
        if conn is None or conn.kind is not TransportKind.PLAIN_STREAM:
            return
        if flags & wire.RST or flags == wire.FIN:
            reply = wire.encode_plain(wire.PlainSegment(wire.FIN_ACK, conn.id, 0, b""))
            if flags == wire.FIN:
                self._reply_raw(node_id, link, PROTO_PLAIN, reply)
            self._on_peer_close(conn, seg.payload)
        elif flags == wire.FIN_ACK:
            if conn._draining is not None:
                conn._ctl = None
                conn._finished = True
        elif flags & wire.ACK_FLAG:
            try:
                ranges = wire.decode_ranges(seg.payload)
            except wire.WireError:
                return
            self._on_ack(conn, 0, seg.seq, ranges)
        elif conn.state is not ConnState.HANDSHAKING:
            self._on_stream_data(conn, 0, seg.seq, seg.payload)

    def _plain_syn(self, node_id: str, src: str, seg: wire.PlainSegment,
                   conn: Connection | None, link: Link) -> None:
        if conn is not None:
            if conn.role == "server" and conn._hs_reply is not None and not conn._finished:
                self._emit_raw(conn, conn._hs_reply)
            return
        if len(seg.payload) != 2:
            return
        (port,) = struct.unpack(">H", seg.payload)
        lst = self._listeners.get((node_id, port, TransportKind.PLAIN_STREAM))
        if lst is None:
            payload = bytes([CloseCause.REFUSED]) + wire.encode_close(0, "connection refused")
            self._reply_raw(node_id, link, PROTO_PLAIN,
                            wire.encode_plain(wire.PlainSegment(wire.RST, seg.conn_id, 0, payload)))
            return
        conn = Connection(self, seg.conn_id, TransportKind.PLAIN_STREAM, "server", node_id, src,
                          port, link, None, lst.handler)
        self._conns[(node_id, seg.conn_id)] = conn
        conn._hs_reply = wire.encode_plain(
            wire.PlainSegment(wire.SYN | wire.ACK_FLAG, seg.conn_id, 0, b""))
        self._emit_raw(conn, conn._hs_reply)
        self._deliver(conn, TransportEvent(EventKind.ACCEPTED, conn))
        if conn.state is ConnState.HANDSHAKING:
            self._on_established(conn)
