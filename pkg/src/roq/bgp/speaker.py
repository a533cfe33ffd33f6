"""Event-driven BGP speaker: sessions over the transport API plus RIB upkeep."""

from __future__ import annotations

import hashlib
import logging
from typing import Callable

from ..netsim import S, Simulator
from ..prefix import Prefix
from ..transport import (
    EndpointAddress,
    EventKind,
    SecurityConfig,
    Transport,
    TransportEvent,
    TransportKind,
)
from ..transport.stack import Connection
from . import fsm
from .fsm import SessionConfig, SessionState, State
from .messages import (
    BgpError,
    Keepalive,
    NeedMoreData,
    Notification,
    Open,
    Origin,
    PathAttrs,
    Update,
    decode_message,
    encode_message,
)
from .rib import LOCAL_PEER, Rib, drop_peer, export, originate, process_update

log = logging.getLogger(__name__)

UpdateTap = Callable[[str, int, Prefix, int], None]
LocRibTap = Callable[[str, Prefix, int], None]


class BgpSession:
    """Drives one peering: transport events and timers in, FSM actions out.

    All messages of the session use a single bidirectional stream. The
    dialer opens it right after the transport handshake; the listener
    adopts the first stream its peer opens.
    """

    def __init__(self, speaker: "BgpSpeaker", cfg: SessionConfig,
                 sec: SecurityConfig | None = None, connect_retry: float | None = None):
        self.speaker = speaker
        self.cfg = cfg
        self.sec = sec
        self.connect_retry = connect_retry
        self.state = SessionState(cfg)
        self.conn: Connection | None = None
        self.stream = None
        self._buf = bytearray()
        self._hold = None
        self._keepalive = None
        self._retry = None
        self.tx_count = 0
        self.rx_count = 0
        self._tx_digest = hashlib.sha256()
        self.transitions: list[tuple[int, State]] = []
        self.established_at: int | None = None

    @property
    def sim(self) -> Simulator:
        return self.speaker.sim

    @property
    def established(self) -> bool:
        return self.state.state is State.ESTABLISHED

    @property
    def tx_digest(self) -> str:
        """SHA-256 over every BGP message this session sent, in order."""
        return self._tx_digest.hexdigest()

    def start(self) -> None:
        self.handle(fsm.ManualStart())

    def handle(self, event: fsm.Event) -> None:
        before = self.state.state
        self.state, actions = fsm.fsm_step(self.state, event, self.sim.now)
        after = self.state.state
        if after is not before:
            self.transitions.append((self.sim.now, after))
            log.debug("%s %s -> %s on %s", self, before.value, after.value, type(event).__name__)
        for act in actions:
            self._apply(act)
        if after is not before:
            if after is State.ESTABLISHED:
                self.established_at = self.sim.now
                self.speaker._session_up(self)
            elif after is State.IDLE:
                self._reset()
                if before is State.ESTABLISHED:
                    self.speaker._session_down(self)
                if self.connect_retry is not None:
                    self._retry = self.sim.call_later(round(self.connect_retry * S), self._restart)

    def _restart(self) -> None:
        self._retry = None
        if self.state.state is State.IDLE:
            self.start()

    def _apply(self, act) -> None:
        if isinstance(act, fsm.DialTransport):
            self.conn = self.speaker.transport.dial(
                self.cfg.local_node, EndpointAddress(self.cfg.peer_node, self.cfg.port),
                self.cfg.kind, self.sec, self.on_transport_event)
        elif isinstance(act, fsm.SendOpen):
            self.send(Open(self.cfg.local_as, self.cfg.hold_time, self.cfg.local_id))
        elif isinstance(act, fsm.SendKeepalive):
            self.send(Keepalive())
        elif isinstance(act, fsm.SendNotification):
            self.send(Notification(act.code, act.subcode))
        elif isinstance(act, fsm.ProcessUpdate):
            self.speaker._process(self, act.msg)
        elif isinstance(act, fsm.CloseTransport):
            conn, self.conn, self.stream = self.conn, None, None
            if conn is not None:
                conn.close()
        elif isinstance(act, fsm.SetHoldTimer):
            self.sim.cancel_timer(self._hold)
            self._hold = self.sim.call_later(act.seconds * S, self.handle, fsm.HoldTimerExpired())
        elif isinstance(act, fsm.SetKeepaliveTimer):
            self.sim.cancel_timer(self._keepalive)
            self._keepalive = self.sim.call_later(act.seconds * S, self.handle,
                                                  fsm.KeepaliveTimerExpired())

    def _reset(self) -> None:
        self.sim.cancel_timer(self._hold)
        self.sim.cancel_timer(self._keepalive)
        self._hold = self._keepalive = None
        self._buf.clear()

    def send(self, msg) -> None:
        if self.stream is None:
            log.debug("%s: no stream, dropping %s", self, type(msg).__name__)
            return
        data = encode_message(msg)
        self.tx_count += 1
        self._tx_digest.update(data)
        self.stream.send(data)

    # -- transport side ---------------------------------------------------

    def attach(self, conn: Connection) -> bool:
        """Adopt an accepted connection; only valid while waiting in Active."""
        if self.conn is not None or self.state.state is not State.ACTIVE:
            return False
        self.conn = conn
        conn.handler = self.on_transport_event
        return True

    def on_transport_event(self, ev: TransportEvent) -> None:
        if ev.conn is not self.conn:
            return
        kind = ev.kind
        if kind is EventKind.DATA:
            if ev.stream is self.stream:
                self._on_data(ev.data)
        elif kind is EventKind.ESTABLISHED:
            if self.cfg.dialer:
                self.stream = ev.conn.open_stream()
                self.handle(fsm.TransportEstablished())
        elif kind is EventKind.STREAM_OPENED:
            if not self.cfg.dialer and self.stream is None:
                self.stream = ev.stream
                self.handle(fsm.TransportEstablished())
        elif kind is EventKind.CLOSED:
            self.conn = None
            self.stream = None
            self.handle(fsm.TransportFailed())

    def _on_data(self, data: bytes) -> None:
        buf = self._buf
        buf += data
        pos = 0
        while self.stream is not None:
            try:
                msg, used = decode_message(buf, pos)
            except NeedMoreData:
                break
            except BgpError as exc:
                log.info("%s: decode error %s", self, exc)
                buf.clear()
                self.handle(fsm.DecodeError(exc.code, exc.subcode))
                return
            pos += used
            self.rx_count += 1
            if isinstance(msg, Update):
                self.handle(fsm.UpdateReceived(msg))
            elif isinstance(msg, Keepalive):
                self.handle(fsm.KeepaliveReceived())
            elif isinstance(msg, Open):
                self.handle(fsm.OpenReceived(msg))
            else:
                self.handle(fsm.NotificationReceived(msg.code, msg.subcode))
        del buf[:pos]

    def __repr__(self) -> str:
        return f"BgpSession({self.cfg.local_node}->{self.cfg.peer_node})"


class BgpSpeaker:
    """A BGP router: owns the RIB, its sessions and the shared listeners."""

    def __init__(self, sim: Simulator, transport: Transport, node_id: str, asn: int, bgp_id: int,
                 sec: SecurityConfig | None = None):
        self.sim = sim
        self.transport = transport
        self.node_id = node_id
        self.asn = asn
        self.bgp_id = bgp_id
        self.sec = sec
        self.rib = Rib()
        self.sessions: dict[int, BgpSession] = {}
        self._by_node: dict[str, BgpSession] = {}
        self._listeners: dict[tuple[int, TransportKind], object] = {}
        self._pending: dict[Prefix, None] = {}
        self._export_scheduled = False
        self.update_taps: list[UpdateTap] = []
        self.locrib_taps: list[LocRibTap] = []
        self.loop_violations = 0

    def add_peer(self, peer_node: str, peer_as: int, peer_id: int,
                 kind: TransportKind = TransportKind.PLAIN_STREAM, hold_time: int = fsm.DEFAULT_HOLD_TIME,
                 connect_retry: float | None = None) -> BgpSession:
        cfg = SessionConfig(self.node_id, peer_node, self.asn, peer_as, self.bgp_id, peer_id,
                            kind, hold_time)
        sec = self.sec if kind is TransportKind.SECURE_MUX else None
        session = BgpSession(self, cfg, sec, connect_retry)
        self.sessions[peer_id] = session
        self._by_node[peer_node] = session
        if not cfg.dialer:
            key = (cfg.port, kind)
            if key not in self._listeners:
                self._listeners[key] = self.transport.open_listener(
                    EndpointAddress(self.node_id, cfg.port), kind, sec, self._on_accept)
        return session

    def start(self) -> None:
        for peer_id in sorted(self.sessions):
            self.sessions[peer_id].start()

    def _on_accept(self, ev: TransportEvent) -> None:
        if ev.kind is not EventKind.ACCEPTED:
            return
        session = self._by_node.get(ev.conn.remote)
        if session is None or session.cfg.kind is not ev.conn.kind or not session.attach(ev.conn):
            log.info("%s: rejecting unexpected connection from %s", self.node_id, ev.conn.remote)
            ev.conn.close(1, "no matching session")

    # -- routing ----------------------------------------------------------

    def originate(self, routes) -> None:
        """Inject ``(prefix, as_path)`` routes as if locally learned."""
        now = self.sim.now
        installs = []
        for prefix, as_path in routes:
            installs.append((prefix, PathAttrs(Origin.IGP, tuple(as_path), self.bgp_id)))
        self._queue(originate(self.rib, installs, now))

    def _process(self, session: BgpSession, u: Update) -> None:
        now = self.sim.now
        peer = session.cfg.peer_id
        for tap in self.update_taps:
            for p in u.withdrawn:
                tap(self.node_id, peer, p, now)
            for p in u.nlri:
                tap(self.node_id, peer, p, now)
        delta = process_update(self.rib, peer, u, self.asn, now)
        table = self.rib.adj_in[peer]
        for p in u.nlri:
            e = table.get(p)
            if e is not None and self.asn in e.attrs.as_path:
                self.loop_violations += 1
        self._queue(delta)

    def _queue(self, delta) -> None:
        if not delta:
            return
        now = self.sim.now
        loc = self.rib.loc
        for p in delta:
            e = loc.get(p)
            if e is not None and e.learned_from != LOCAL_PEER and self.asn in e.attrs.as_path:
                self.loop_violations += 1
            for tap in self.locrib_taps:
                tap(self.node_id, p, now)
            self._pending[p] = None
        if not self._export_scheduled:
            self._export_scheduled = True
            self.sim.call_soon(self._export)

    def _export(self) -> None:
        """Advertise everything that changed during the current instant."""
        self._export_scheduled = False
        delta, self._pending = list(self._pending), {}
        for peer_id in sorted(self.sessions):
            s = self.sessions[peer_id]
            if not s.established:
                continue
            for u in export(self.rib, delta, peer_id, s.cfg.peer_as, self.asn, self.bgp_id):
                s.send(u)

    def _session_up(self, session: BgpSession) -> None:
        # initial table dump to the new peer
        if self.rib.loc:
            for u in export(self.rib, list(self.rib.loc), session.cfg.peer_id,
                            session.cfg.peer_as, self.asn, self.bgp_id):
                session.send(u)

    def _session_down(self, session: BgpSession) -> None:
        self._queue(drop_peer(self.rib, session.cfg.peer_id))

    def __repr__(self) -> str:
        return f"BgpSpeaker({self.node_id}, AS{self.asn})"
