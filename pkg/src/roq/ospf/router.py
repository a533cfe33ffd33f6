"""An OSPF router on the simulator: interfaces, timers, flooding and SPF.

Hellos always travel as native datagrams. In Native mode every other
packet does too. In OverQuic mode the neighbor FSM asks for a secure
connection once TwoWay is reached and from then on DBD, LSR, LSU and LsAck
packets are written as length-prefixed records on a single stream.

With ``delegate_acks`` (OverQuic only) the router relies on the stream for
reliability: it sends no LsAcks, keeps no retransmission state and lets
LsUpdates grow past the 1200-byte OSPF fragmentation limit.
"""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import replace
from typing import Callable, Iterable

from ..netsim import Link, S, Simulator
from ..transport import (
    EndpointAddress,
    EventKind,
    SecurityConfig,
    Transport,
    TransportEvent,
    TransportKind,
)
from . import lsdb as fl
from . import neighbor as nb
from .lsdb import Lsdb, Order, install_and_flood, lsdb_compare
from .neighbor import Mode, NeighborState, NState, neighbor_fsm_step
from .packets import (
    INITIAL_SEQ,
    MAX_AGE,
    MAX_PACKET,
    MAX_STREAM_PACKET,
    DbDescription,
    ExternalBody,
    Hello,
    Lsa,
    LsaKey,
    LsaType,
    LsAck,
    LsRequest,
    LsUpdate,
    OspfCodecError,
    OspfPacket,
    RouterBody,
    Truncated,
    chunk,
    decode_packet,
    decode_stream,
    encode_packet,
    frame,
    headers_per_packet,
    keys_per_packet,
    packet_type,
    split_lsas,
)
from .spf import RouteTable, spf_compute

log = logging.getLogger(__name__)

PROTO_OSPF = "ospf"
OSPF_PORT = 8900
NATIVE_PATH = "native"
STREAM_PATH = "stream"

AdjacencyTap = Callable[[str, int, NState, int], None]
LsdbTap = Callable[[str, LsaKey, int, int], None]
RouteTap = Callable[[str, int], None]


class Interface:
    """A point-to-point link and the (single) neighbor behind it."""

    def __init__(self, router: "OspfRouter", link: Link, peer_node: str, cost: int):
        self.router = router
        self.link = link
        self.peer_node = peer_node
        self.cost = cost
        self.nbr: NeighborState | None = None
        self.reported = NState.DOWN
        self.seen_until: int | None = None
        self.dead_timer = None
        self.rxmt_timer = None
        self.retransmit: dict[LsaKey, tuple[Lsa, int]] = {}
        self.requests: dict[LsaKey, object] = {}
        self.dbd_sent_at: int | None = None
        self.lsr_sent_at: int | None = None
        self.quic_retry_at: int | None = None
        self.conn = None
        self.stream = None
        self.buf = bytearray()
        self.out_lsas: dict[LsaKey, Lsa] = {}
        self.out_acks: dict[LsaKey, object] = {}

    @property
    def state(self) -> NState:
        return self.nbr.state if self.nbr is not None else NState.DOWN

    @property
    def peer_id(self) -> int | None:
        return self.nbr.router_id if self.nbr is not None else None

    def __repr__(self) -> str:
        return f"Interface({self.router.node_id}->{self.peer_node}, {self.state.name})"


class OspfRouter:
    def __init__(self, sim: Simulator, node_id: str, router_id: int, mode: Mode = Mode.NATIVE, *,
                 transport: Transport | None = None, sec: SecurityConfig | None = None,
                 delegate_acks: bool = False, costs: dict[str, int] | None = None,
                 hello_interval: int = nb.HELLO_INTERVAL, dead_interval: int = nb.DEAD_INTERVAL,
                 rxmt_interval: int = nb.RXMT_INTERVAL, port: int = OSPF_PORT):
        if delegate_acks and mode is not Mode.OVER_QUIC:
            raise ValueError("delegate_acks needs the OverQuic mode")
        if mode is Mode.OVER_QUIC and (transport is None or sec is None):
            raise ValueError("OverQuic mode needs a transport and a security config")
        self.sim = sim
        self.node_id = node_id
        self.router_id = router_id
        self.mode = mode
        self.transport = transport
        self.sec = sec
        self.delegate_acks = delegate_acks
        self.hello_interval = hello_interval
        self.dead_interval = dead_interval
        self.rxmt_interval = rxmt_interval
        self.port = port
        self.limit = MAX_STREAM_PACKET if delegate_acks else MAX_PACKET
        self.lsdb = Lsdb()
        self.routes: RouteTable = {}
        self.route_changed_at: int | None = None
        self.externals: dict[int, ExternalBody] = {}
        self.tx: Counter = Counter()  # (path, packet type) -> packets sent
        self.rx_errors = 0
        self.adjacency_taps: list[AdjacencyTap] = []
        self.lsdb_taps: list[LsdbTap] = []
        self.route_taps: list[RouteTap] = []
        self._hello_timer = None
        self._age_timer = None
        self._spf_scheduled = False
        self._flush_scheduled = False
        self._regen_scheduled = False
        self.started = False

        node = sim.nodes[node_id]
        costs = costs or {}
        self.ifaces: dict[str, Interface] = {}
        for peer in sorted(node.links):
            self.ifaces[peer] = Interface(self, node.links[peer], peer, costs.get(peer, 1))
        node.register(PROTO_OSPF, self._on_datagram)

    # -- lifecycle --------------------------------------------------------

    def start(self) -> None:
        if self.started:
            return
        self.started = True
        if self.mode is Mode.OVER_QUIC:
            self.transport.open_listener(EndpointAddress(self.node_id, self.port),
                                         TransportKind.SECURE_MUX, self.sec, self._on_accept)
        self._originate_router_lsa()
        self._hello_round()

    def _hello_round(self) -> None:
        for iface in self.ifaces.values():
            self.hello_tick(iface)
        self._hello_timer = self.sim.call_later(self.hello_interval * S, self._hello_round)

    def hello_tick(self, iface: Interface) -> Hello:
        """Send a Hello on ``iface`` listing the neighbor if it was heard recently."""
        now = self.sim.now
        seen = ()
        if iface.nbr is not None and iface.seen_until is not None and iface.seen_until > now:
            seen = (iface.nbr.router_id,)
        pkt = Hello(self.router_id, self.hello_interval, self.dead_interval, seen)
        self._send_native(iface, pkt)
        return pkt

    def originate_prefix(self, prefix, cost: int = 1, lsa_id: int | None = None) -> Lsa:
        """Advertise an external prefix from this router."""
        if lsa_id is None:
            lsa_id = next((i for i, b in self.externals.items() if b.prefix == prefix),
                          len(self.externals) + 1)
        body = ExternalBody(prefix, cost)
        self.externals[lsa_id] = body
        return self._originate(LsaKey(LsaType.EXTERNAL_PREFIX, self.router_id, lsa_id), body)

    # -- origination ------------------------------------------------------

    def _router_body(self) -> RouterBody:
        links = sorted((i.nbr.router_id, i.cost) for i in self.ifaces.values()
                       if i.state is NState.FULL)
        return RouterBody(tuple(links))

    def _originate_router_lsa(self) -> None:
        self._regen_scheduled = False
        self._originate(LsaKey(LsaType.ROUTER, self.router_id, self.router_id), self._router_body())

    def _schedule_regen(self) -> None:
        if not self._regen_scheduled:
            self._regen_scheduled = True
            self.sim.call_soon(self._originate_router_lsa)

    def _originate(self, key: LsaKey, body, min_seq: int | None = None) -> Lsa | None:
        now = self.sim.now
        cur = self.lsdb.get(key, now)
        if cur is not None and cur.body == body and min_seq is None:
            return cur
        seq = INITIAL_SEQ if cur is None else cur.seq + 1
        if min_seq is not None:
            seq = max(seq, min_seq + 1)
        lsa = Lsa(key, seq, 0, body)
        self._flood(lsa, None)
        return lsa

    # -- flooding ---------------------------------------------------------

    def _adjacencies(self) -> list[int]:
        return [i.nbr.router_id for i in self.ifaces.values() if i.state >= NState.EXCHANGE]

    def _iface_of(self, router_id: int) -> Interface | None:
        for i in self.ifaces.values():
            if i.nbr is not None and i.nbr.router_id == router_id:
                return i
        return None

    def _flood(self, lsa: Lsa, from_iface: Interface | None) -> None:
        now = self.sim.now
        src = from_iface.nbr.router_id if from_iface is not None else None
        acts = install_and_flood(self.lsdb, lsa, src, self._adjacencies(), now,
                                 delegate_acks=self.delegate_acks)
        for a in acts:
            if isinstance(a, fl.SendLsu):
                iface = self._iface_of(a.to)
                if iface is not None:
                    iface.out_lsas[a.lsa.key] = a.lsa
                    self._schedule_flush()
            elif isinstance(a, fl.AddRetransmit):
                iface = self._iface_of(a.to)
                if iface is not None:
                    iface.retransmit[a.lsa.key] = (a.lsa, now)
                    self._arm_rxmt(iface)
            elif isinstance(a, fl.SendAck):
                iface = self._iface_of(a.to)
                if iface is not None:
                    iface.out_acks[a.header.key] = a.header
                    self._schedule_flush()
            elif isinstance(a, fl.ImpliedAck):
                iface = self._iface_of(a.to)
                if iface is not None:
                    self._acked(iface, a.header)
            elif isinstance(a, fl.LsdbChanged):
                # a newer instance supersedes older copies awaiting acknowledgement
                for i in self.ifaces.values():
                    i.retransmit.pop(a.key, None)
                for tap in self.lsdb_taps:
                    tap(self.node_id, a.key, a.seq, now)
                self._arm_aging()
                if (a.key.adv_router == self.router_id and src is not None
                        and lsa.key == a.key):
                    self._own_lsa_from_peer(lsa)
            elif isinstance(a, fl.RunSpf):
                self._schedule_spf()

    def _own_lsa_from_peer(self, lsa: Lsa) -> None:
        """A neighbor holds a newer copy of one of our LSAs: supersede it."""
        key = lsa.key
        if key.type is LsaType.ROUTER:
            body = self._router_body()
        elif key.lsa_id in self.externals:
            body = self.externals[key.lsa_id]
        else:
            body = None
        if body is None:
            if lsa.age < MAX_AGE:
                self.sim.call_soon(self._flood, lsa.with_age(MAX_AGE), None)
            return
        self.sim.call_soon(self._originate, key, body, lsa.seq)

    def _acked(self, iface: Interface, header) -> None:
        entry = iface.retransmit.get(header.key)
        if entry is not None and header.seq >= entry[0].seq:
            del iface.retransmit[header.key]

    def _schedule_flush(self) -> None:
        if not self._flush_scheduled:
            self._flush_scheduled = True
            self.sim.call_soon(self._flush)

    def _flush(self) -> None:
        """Send the LsUpdates and LsAcks queued during this instant."""
        self._flush_scheduled = False
        for iface in self.ifaces.values():
            if iface.out_lsas:
                lsas = [self._transit(l) for l in iface.out_lsas.values()]
                iface.out_lsas = {}
                for pkt in split_lsas(self.router_id, lsas, self.limit):
                    self._send(iface, pkt)
            if iface.out_acks:
                hdrs = list(iface.out_acks.values())
                iface.out_acks = {}
                for part in chunk(hdrs, headers_per_packet(MAX_PACKET)):
                    self._send(iface, LsAck(self.router_id, part))

    def _transit(self, lsa: Lsa) -> Lsa:
        """The copy put on the wire: current age plus one second of transit."""
        if lsa.age >= MAX_AGE:
            return lsa
        cur = self.lsdb.get(lsa.key, self.sim.now)
        age = cur.age if cur is not None and cur.seq == lsa.seq else lsa.age
        return lsa.with_age(age + 1)

    # -- SPF --------------------------------------------------------------

    def _schedule_spf(self) -> None:
        if not self._spf_scheduled:
            self._spf_scheduled = True
            self.sim.call_soon(self._run_spf)

    def _run_spf(self) -> None:
        self._spf_scheduled = False
        table = spf_compute(self.lsdb, self.router_id)
        if table != self.routes:
            self.routes = table
            self.route_changed_at = self.sim.now
            for tap in self.route_taps:
                tap(self.node_id, self.sim.now)

    # -- aging ------------------------------------------------------------

    def _arm_aging(self) -> None:
        due = self.lsdb.next_max_age()
        if due is None:
            return
        t = self._age_timer
        if t is not None and not t.cancelled and not t.fired and t.at <= due:
            return
        self.sim.cancel_timer(t)
        self._age_timer = self.sim.set_timer(max(due, self.sim.now), self._age_out)

    def _age_out(self) -> None:
        self._age_timer = None
        now = self.sim.now
        for key in self.lsdb.keys():
            if self.lsdb.age_of(key, now) >= MAX_AGE:
                lsa = self.lsdb.get(key, now)
                self._flood(lsa.with_age(MAX_AGE), None)
        self._arm_aging()

    # -- packet I/O -------------------------------------------------------

    def _send_native(self, iface: Interface, pkt: OspfPacket) -> None:
        self.tx[(NATIVE_PATH, packet_type(pkt))] += 1
        self.sim.send_datagram(self.node_id, iface.link, encode_packet(pkt), PROTO_OSPF)

    def _send(self, iface: Interface, pkt: OspfPacket) -> None:
        if self.mode is Mode.NATIVE:
            self._send_native(iface, pkt)
            return
        if iface.stream is None:
            log.debug("%s: no stream to %s, dropping %s", self.node_id, iface.peer_node,
                      type(pkt).__name__)
            return
        self.tx[(STREAM_PATH, packet_type(pkt))] += 1
        iface.stream.send(frame(pkt))

    def _on_datagram(self, src: str, payload: bytes, link: Link) -> None:
        iface = self.ifaces.get(src)
        if iface is None:
            return
        try:
            pkt = decode_packet(payload)
        except OspfCodecError as exc:
            self.rx_errors += 1
            log.debug("%s: bad packet from %s: %s", self.node_id, src, exc)
            return
        if not isinstance(pkt, Hello) and self.mode is Mode.OVER_QUIC:
            self.rx_errors += 1
            return
        self._on_packet(iface, pkt)

    def _on_packet(self, iface: Interface, pkt: OspfPacket) -> None:
        if not self.started:
            return
        if isinstance(pkt, Hello):
            self._on_hello(iface, pkt)
            return
        if iface.nbr is None or pkt.router_id != iface.nbr.router_id:
            return
        if isinstance(pkt, DbDescription):
            summary = ()
            if iface.state in (NState.INIT, NState.TWO_WAY, NState.EXSTART):
                summary = tuple(chunk(self.lsdb.headers(self.sim.now), headers_per_packet(self.limit)))
            self._feed(iface, nb.DbdReceived(pkt, summary))
        elif isinstance(pkt, LsRequest):
            self._feed(iface, nb.LsRequestReceived(pkt))
        elif isinstance(pkt, LsUpdate):
            self._feed(iface, nb.LsUpdateReceived(pkt))
        elif isinstance(pkt, LsAck):
            self._feed(iface, nb.LsAckReceived(pkt))

    def _on_hello(self, iface: Interface, p: Hello) -> None:
        if p.hello_interval != self.hello_interval or p.dead_interval != self.dead_interval:
            log.debug("%s: hello interval mismatch from %s", self.node_id, iface.peer_node)
            return
        if iface.nbr is None or iface.nbr.router_id != p.router_id:
            if iface.nbr is not None:
                self._feed(iface, nb.Dead())
            iface.nbr = NeighborState(self.router_id, p.router_id, self.mode,
                                      dead_interval=self.dead_interval)
        now = self.sim.now
        iface.seen_until = now + self.dead_interval * S
        if iface.dead_timer is None:
            iface.dead_timer = self.sim.set_timer(iface.seen_until, self._dead_check, iface)
        self._feed(iface, nb.HelloReceived(self.router_id in p.neighbors_seen))

    def _dead_check(self, iface: Interface) -> None:
        iface.dead_timer = None
        if iface.seen_until is None:
            return
        if self.sim.now < iface.seen_until:
            iface.dead_timer = self.sim.set_timer(iface.seen_until, self._dead_check, iface)
            return
        iface.seen_until = None
        self._feed(iface, nb.Dead())

    # -- neighbor FSM driver ----------------------------------------------

    def _feed(self, iface: Interface, event: nb.Event) -> None:
        if iface.nbr is None:
            return
        iface.nbr, actions = neighbor_fsm_step(iface.nbr, event, self.sim.now)
        for act in actions:
            self._apply(iface, act)
        if iface.state is not iface.reported:
            log.debug("%s: neighbor %s %s -> %s", self.node_id, iface.peer_node,
                      iface.reported.name, iface.state.name)
            iface.reported = iface.state
            for tap in self.adjacency_taps:
                tap(self.node_id, iface.nbr.router_id, iface.state, self.sim.now)
        self._arm_rxmt(iface)

    def _apply(self, iface: Interface, act) -> None:
        now = self.sim.now
        if isinstance(act, nb.SendDbd):
            iface.dbd_sent_at = now
            self._send(iface, act.packet)
        elif isinstance(act, nb.RetransmitDbd):
            n = iface.nbr
            if n.last_dbd is not None and self._due(iface.dbd_sent_at):
                iface.dbd_sent_at = now
                self._send(iface, n.last_dbd)
        elif isinstance(act, nb.ProcessDbdHeaders):
            for h in act.headers:
                cur = self.lsdb.header(h.key, now)
                if cur is None or lsdb_compare(h, cur) is Order.A_NEWER:
                    iface.requests[h.key] = h
        elif isinstance(act, nb.StartLoading):
            if iface.requests:
                self._send_lsr(iface)
            else:
                self._feed(iface, nb.LoadingDone())
        elif isinstance(act, nb.RetransmitLsr):
            if iface.requests and self._due(iface.lsr_sent_at):
                self._send_lsr(iface)
        elif isinstance(act, nb.RetransmitLsus):
            self._retransmit_lsus(iface)
        elif isinstance(act, nb.ReplyLsr):
            lsas = [l for l in (self.lsdb.get(k, now) for k in act.packet.keys) if l is not None]
            for lsa in lsas:
                iface.out_lsas[lsa.key] = lsa
            if lsas:
                self._schedule_flush()
        elif isinstance(act, nb.ProcessLsu):
            for lsa in act.packet.lsas:
                self._flood(lsa, iface)
                req = iface.requests.get(lsa.key)
                if req is not None and lsdb_compare(lsa.header, req) is not Order.B_NEWER:
                    del iface.requests[lsa.key]
            if iface.state is NState.LOADING and not iface.requests:
                self._feed(iface, nb.LoadingDone())
        elif isinstance(act, nb.ProcessAck):
            for h in act.packet.headers:
                self._acked(iface, h)
        elif isinstance(act, nb.EstablishQuic):
            if iface.nbr.dialer and iface.conn is None:
                iface.conn = self.transport.dial(
                    self.node_id, EndpointAddress(iface.peer_node, self.port),
                    TransportKind.SECURE_MUX, self.sec,
                    lambda ev, i=iface: self._on_conn_event(i, ev))
                iface.nbr = replace(iface.nbr, conn=iface.conn)
        elif isinstance(act, nb.CloseQuic):
            self._drop_conn(iface)
        elif isinstance(act, nb.ScheduleQuicRetry):
            iface.quic_retry_at = now + self.rxmt_interval * S
        elif isinstance(act, nb.FlushAdjacency):
            iface.requests.clear()
            iface.retransmit.clear()
            iface.out_lsas.clear()
            iface.out_acks.clear()
            iface.dbd_sent_at = iface.lsr_sent_at = None
        elif isinstance(act, nb.RegenerateRouterLsa):
            self._schedule_regen()

    def _due(self, sent_at: int | None) -> bool:
        return sent_at is None or self.sim.now - sent_at >= self.rxmt_interval * S

    def _send_lsr(self, iface: Interface) -> None:
        iface.lsr_sent_at = self.sim.now
        for part in chunk(list(iface.requests), keys_per_packet(self.limit)):
            self._send(iface, LsRequest(self.router_id, part))

    def _retransmit_lsus(self, iface: Interface) -> None:
        now = self.sim.now
        due = [k for k, (_, t) in iface.retransmit.items() if self._due(t)]
        if not due:
            return
        for k in due:
            lsa, _ = iface.retransmit[k]
            iface.retransmit[k] = (lsa, now)
            iface.out_lsas[k] = lsa
        self._schedule_flush()

    def _arm_rxmt(self, iface: Interface) -> None:
        """Keep one timer per neighbor at the earliest pending retransmission."""
        n = iface.nbr
        if n is None:
            return
        step = self.rxmt_interval * S
        due = []
        if n.retry_pending and iface.quic_retry_at is not None:
            due.append(iface.quic_retry_at)
        if not self.delegate_acks:
            if n.state in (NState.EXSTART, NState.EXCHANGE) and n.master and iface.dbd_sent_at is not None:
                due.append(iface.dbd_sent_at + step)
            if n.state is NState.LOADING and iface.requests and iface.lsr_sent_at is not None:
                due.append(iface.lsr_sent_at + step)
            if iface.retransmit:
                due.append(min(t for _, t in iface.retransmit.values()) + step)
        t = iface.rxmt_timer
        live = t is not None and not t.cancelled and not t.fired
        if not due:
            if live:
                self.sim.cancel_timer(t)
            iface.rxmt_timer = None
            return
        at = max(min(due), self.sim.now)
        if live and t.at <= at:
            return
        self.sim.cancel_timer(t)
        iface.rxmt_timer = self.sim.set_timer(at, self._on_rxmt, iface)

    def _on_rxmt(self, iface: Interface) -> None:
        iface.rxmt_timer = None
        n = iface.nbr
        if n is None:
            return
        if n.retry_pending and (iface.quic_retry_at is None or self.sim.now < iface.quic_retry_at):
            self._arm_rxmt(iface)
            return
        if n.retry_pending:
            iface.quic_retry_at = None
        self._feed(iface, nb.RxmtTimerExpired())

    # -- secure transport (OverQuic) ----------------------------------------

    def _drop_conn(self, iface: Interface) -> None:
        conn, iface.conn, iface.stream = iface.conn, None, None
        iface.buf.clear()
        if iface.nbr is not None and iface.nbr.conn is not None:
            iface.nbr = replace(iface.nbr, conn=None)
        if conn is not None:
            conn.close()

    def _on_accept(self, ev: TransportEvent) -> None:
        if ev.kind is not EventKind.ACCEPTED:
            return
        iface = self.ifaces.get(ev.conn.remote)
        if iface is None or iface.nbr is None or iface.nbr.dialer:
            log.info("%s: refusing OSPF connection from %s", self.node_id, ev.conn.remote)
            ev.conn.close(1, "unexpected")
            return
        if iface.conn is not None:
            self._drop_conn(iface)
        iface.conn = ev.conn
        ev.conn.handler = lambda e, i=iface: self._on_conn_event(i, e)

    def _on_conn_event(self, iface: Interface, ev: TransportEvent) -> None:
        if ev.conn is not iface.conn:
            return
        kind = ev.kind
        if kind is EventKind.DATA:
            if ev.stream is iface.stream:
                self._on_stream_data(iface, ev.data)
        elif kind is EventKind.ESTABLISHED:
            if iface.nbr is not None and iface.nbr.dialer:
                iface.stream = ev.conn.open_stream()
                self._feed(iface, nb.QuicEstablished(ev.conn))
        elif kind is EventKind.STREAM_OPENED:
            if iface.stream is None and iface.nbr is not None and not iface.nbr.dialer:
                iface.stream = ev.stream
                iface.nbr = replace(iface.nbr, conn=ev.conn)
                self._feed(iface, nb.QuicEstablished(ev.conn))
        elif kind is EventKind.CLOSED:
            iface.conn = iface.stream = None
            iface.buf.clear()
            if iface.nbr is not None:
                iface.nbr = replace(iface.nbr, conn=None)
            self._feed(iface, nb.QuicFailed())

    def _on_stream_data(self, iface: Interface, data: bytes) -> None:
        buf = iface.buf
        buf += data
        pos = 0
        while iface.stream is not None:
            try:
                pkt, used = decode_stream(buf, pos)
            except Truncated:
                break
            except OspfCodecError as exc:
                self.rx_errors += 1
                log.info("%s: undecodable stream record from %s: %s", self.node_id,
                         iface.peer_node, exc)
                buf.clear()
                self._feed(iface, nb.QuicFailed())
                return
            pos += used
            if isinstance(pkt, Hello):
                self.rx_errors += 1  # hellos never belong on the stream
                continue
            self._on_packet(iface, pkt)
        del buf[:pos]

    # -- inspection -------------------------------------------------------

    def neighbor_states(self) -> dict[str, NState]:
        return {peer: i.state for peer, i in self.ifaces.items()}

    def pending_work(self) -> bool:
        """True while retransmission or request lists or queued output remain."""
        if self._spf_scheduled or self._flush_scheduled or self._regen_scheduled:
            return True
        return any(i.retransmit or i.requests or i.out_lsas or i.out_acks
                   for i in self.ifaces.values())

    def __repr__(self) -> str:
        return f"OspfRouter({self.node_id}, id={self.router_id}, {self.mode.value})"


def converged(routers: Iterable[OspfRouter]) -> bool:
    """Adjacencies inside the set Full, those leaving it Down, LSDBs equal, nothing pending."""
    routers = list(routers)
    if not routers:
        return True
    members = {r.node_id for r in routers}
    for r in routers:
        for peer, iface in r.ifaces.items():
            if peer in members:
                if iface.state is not NState.FULL:
                    return False
            elif iface.state is not NState.DOWN:
                return False
        if r.pending_work():
            return False
    ref = routers[0].lsdb.snapshot()
    return all(r.lsdb.snapshot() == ref for r in routers[1:])


def convergence_time(routers: Iterable[OspfRouter], since: int) -> int | None:
    """Latest route-table change across ``routers`` minus ``since`` (µs)."""
    times = [r.route_changed_at for r in routers if r.route_changed_at is not None]
    if not times:
        return None
    return max(times) - since
