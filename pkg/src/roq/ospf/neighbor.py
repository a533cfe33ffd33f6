"""Point-to-point OSPF neighbor state machine as a pure transition function.

``neighbor_fsm_step(n, event, now)`` returns the next ``NeighborState`` and
the actions the router must carry out. The machine owns the database
description (DBD) exchange bookkeeping; LSDB work (request lists,
flooding, retransmission lists) is delegated to the router through
actions.

In OverQuic mode reaching TwoWay emits ``EstablishQuic`` and ExStart waits
for ``QuicEstablished``. In Native mode TwoWay moves on to ExStart at once.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace
from typing import Any, Union

from ..netsim import S
from .packets import FLAG_INIT, FLAG_MASTER, FLAG_MORE, DbDescription, LsaHeader, LsAck, LsRequest, LsUpdate

HELLO_INTERVAL = 10
DEAD_INTERVAL = 40
RXMT_INTERVAL = 5
MAX_QUIC_RETRIES = 5


class NState(enum.IntEnum):
    DOWN = 0
    INIT = 1
    TWO_WAY = 2
    EXSTART = 3
    EXCHANGE = 4
    LOADING = 5
    FULL = 6


class Mode(enum.Enum):
    NATIVE = "native"
    OVER_QUIC = "quic"


def initial_dd_seq(local_id: int, peer_id: int) -> int:
    return (local_id * 2654435761 + peer_id) & 0x7FFFFFFF


@dataclass(frozen=True)
class NeighborState:
    local_id: int
    router_id: int  # the neighbor's
    mode: Mode = Mode.NATIVE
    state: NState = NState.DOWN
    conn: Any = None
    dead_deadline: int | None = None
    dead_interval: int = DEAD_INTERVAL
    quic_retries: int = 0
    retry_pending: bool = False
    dd_seq: int = 0
    chunks: tuple[tuple[LsaHeader, ...], ...] = ()
    next_chunk: int = 0
    my_more: bool = True
    last_dbd: DbDescription | None = None

    @property
    def master(self) -> bool:
        """The router with the higher router_id is master for the DBD exchange."""
        return self.local_id > self.router_id

    @property
    def dialer(self) -> bool:
        """The higher router_id dials the secure connection."""
        return self.local_id > self.router_id


# events

@dataclass(frozen=True)
class HelloReceived:
    lists_me: bool


@dataclass(frozen=True)
class Dead:
    pass


@dataclass(frozen=True)
class QuicEstablished:
    conn: Any = None


@dataclass(frozen=True)
class QuicFailed:
    pass


@dataclass(frozen=True)
class DbdReceived:
    packet: DbDescription
    summary: tuple[tuple[LsaHeader, ...], ...] = ()  # LSDB headers pre-chunked by the router


@dataclass(frozen=True)
class LsRequestReceived:
    packet: LsRequest


@dataclass(frozen=True)
class LsUpdateReceived:
    packet: LsUpdate


@dataclass(frozen=True)
class LsAckReceived:
    packet: LsAck


@dataclass(frozen=True)
class RxmtTimerExpired:
    pass


@dataclass(frozen=True)
class LoadingDone:
    """Internal: the link-state request list drained."""


Event = Union[HelloReceived, Dead, QuicEstablished, QuicFailed, DbdReceived, LsRequestReceived,
              LsUpdateReceived, LsAckReceived, RxmtTimerExpired, LoadingDone]


# actions

@dataclass(frozen=True)
class EstablishQuic:
    peer: int


@dataclass(frozen=True)
class CloseQuic:
    peer: int


@dataclass(frozen=True)
class SendDbd:
    packet: DbDescription


@dataclass(frozen=True)
class RetransmitDbd:
    pass


@dataclass(frozen=True)
class ProcessDbdHeaders:
    headers: tuple[LsaHeader, ...]


@dataclass(frozen=True)
class StartLoading:
    pass


@dataclass(frozen=True)
class RetransmitLsr:
    pass


@dataclass(frozen=True)
class RetransmitLsus:
    pass


@dataclass(frozen=True)
class ReplyLsr:
    packet: LsRequest


@dataclass(frozen=True)
class ProcessLsu:
    packet: LsUpdate


@dataclass(frozen=True)
class ProcessAck:
    packet: LsAck


@dataclass(frozen=True)
class ScheduleQuicRetry:
    pass


@dataclass(frozen=True)
class FlushAdjacency:
    pass


@dataclass(frozen=True)
class RegenerateRouterLsa:
    pass


Action = Union[EstablishQuic, CloseQuic, SendDbd, RetransmitDbd, ProcessDbdHeaders, StartLoading,
               RetransmitLsr, RetransmitLsus, ReplyLsr, ProcessLsu, ProcessAck, ScheduleQuicRetry,
               FlushAdjacency, RegenerateRouterLsa]

Step = tuple[NeighborState, list[Action]]


def _reset(n: NeighborState, state: NState) -> NeighborState:
    return replace(n, state=state, dd_seq=0, chunks=(), next_chunk=0, my_more=True, last_dbd=None)


def _teardown(n: NeighborState, state: NState, *, keep_retries: bool = False) -> Step:
    """Leave the adjacency: drop exchange state and tell the router what to undo."""
    acts: list[Action] = [FlushAdjacency()]
    if n.state is NState.FULL:
        acts.append(RegenerateRouterLsa())
    if n.mode is Mode.OVER_QUIC and (n.conn is not None or n.state >= NState.TWO_WAY):
        acts.append(CloseQuic(n.router_id))
    nxt = _reset(n, state)
    nxt = replace(nxt, conn=None, retry_pending=False,
                  quic_retries=n.quic_retries if keep_retries else 0)
    if state is NState.DOWN:
        nxt = replace(nxt, dead_deadline=None)
    return nxt, acts


def _enter_exstart(n: NeighborState) -> Step:
    seq = initial_dd_seq(n.local_id, n.router_id)
    flags = FLAG_INIT | FLAG_MORE | (FLAG_MASTER if n.master else 0)
    pkt = DbDescription(n.local_id, seq, flags)
    nxt = replace(_reset(n, NState.EXSTART), dd_seq=seq, last_dbd=pkt)
    return nxt, [SendDbd(pkt)]


def _two_way(n: NeighborState) -> Step:
    if n.mode is Mode.NATIVE:
        return _enter_exstart(n)
    return replace(n, state=NState.TWO_WAY, retry_pending=False), [EstablishQuic(n.router_id)]


def _next_chunk(n: NeighborState) -> tuple[tuple[LsaHeader, ...], int, bool]:
    if n.next_chunk < len(n.chunks):
        hdrs = n.chunks[n.next_chunk]
        nxt = n.next_chunk + 1
    else:
        hdrs, nxt = (), n.next_chunk
    return hdrs, nxt, nxt < len(n.chunks)


def _master_on_reply(n: NeighborState, p: DbDescription) -> Step:
    acts: list[Action] = [ProcessDbdHeaders(p.headers)]
    slave_more = bool(p.flags & FLAG_MORE)
    if not n.my_more and not slave_more:
        return replace(n, state=NState.LOADING), acts + [StartLoading()]
    hdrs, idx, more = _next_chunk(n)
    seq = (n.dd_seq + 1) & 0xFFFFFFFF
    pkt = DbDescription(n.local_id, seq, FLAG_MASTER | (FLAG_MORE if more else 0), hdrs)
    return replace(n, dd_seq=seq, next_chunk=idx, my_more=more, last_dbd=pkt), acts + [SendDbd(pkt)]


def _slave_on_poll(n: NeighborState, p: DbDescription) -> Step:
    hdrs, idx, more = _next_chunk(n)
    pkt = DbDescription(n.local_id, p.dd_seq, FLAG_MORE if more else 0, hdrs)
    nxt = replace(n, dd_seq=p.dd_seq, next_chunk=idx, my_more=more, last_dbd=pkt)
    acts: list[Action] = [ProcessDbdHeaders(p.headers), SendDbd(pkt)]
    if not (p.flags & FLAG_MORE) and not more:
        return replace(nxt, state=NState.LOADING), acts + [StartLoading()]
    return nxt, acts


def _on_dbd(n: NeighborState, e: DbdReceived) -> Step:
    p = e.packet
    st = n.state
    if st is NState.INIT and n.mode is Mode.NATIVE:
        # a DBD implies the neighbor already sees us: treat it as 2-WayReceived
        n, acts = _two_way(n)
        n2, more = _on_dbd(n, e)
        return n2, acts + more
    if st is NState.EXSTART:
        if not n.master:
            if p.flags & (FLAG_INIT | FLAG_MORE | FLAG_MASTER) == FLAG_INIT | FLAG_MORE | FLAG_MASTER \
                    and not p.headers:
                n = replace(n, state=NState.EXCHANGE, chunks=e.summary, next_chunk=0)
                return _slave_on_poll(n, p)
            return n, []
        if not (p.flags & (FLAG_INIT | FLAG_MASTER)) and p.dd_seq == n.dd_seq:
            n = replace(n, state=NState.EXCHANGE, chunks=e.summary, next_chunk=0, my_more=True)
            return _master_on_reply(n, p)
        return n, []
    if st is NState.EXCHANGE:
        if n.master:
            if p.flags & FLAG_MASTER:
                return n, []
            if p.dd_seq == n.dd_seq and not (p.flags & FLAG_INIT):
                return _master_on_reply(n, p)
            return n, []
        if not (p.flags & FLAG_MASTER):
            return n, []
        if p.dd_seq == n.dd_seq or p.flags & FLAG_INIT:
            return n, [SendDbd(n.last_dbd)] if n.last_dbd is not None else []
        if p.dd_seq == (n.dd_seq + 1) & 0xFFFFFFFF:
            return _slave_on_poll(n, p)
        return _restart_exchange(n)
    if st in (NState.LOADING, NState.FULL):
        if n.master:
            # an Init packet from the slave means it restarted the exchange
            if p.flags & FLAG_INIT and not p.flags & FLAG_MASTER:
                return _restart_exchange(n)
            return n, []
        if p.flags & FLAG_INIT and p.flags & FLAG_MASTER and p.dd_seq != n.dd_seq:
            return _restart_exchange(n)
        if p.dd_seq == n.dd_seq and n.last_dbd is not None:
            return n, [SendDbd(n.last_dbd)]
    return n, []


def _restart_exchange(n: NeighborState) -> Step:
    """Sequence mismatch: throw the exchange away and negotiate again."""
    acts: list[Action] = [FlushAdjacency()]
    if n.state is NState.FULL:
        acts.append(RegenerateRouterLsa())
    n2, more = _enter_exstart(n)
    return n2, acts + more


def neighbor_fsm_step(n: NeighborState, e: Event, now: int = 0) -> Step:
    """Apply one event. ``now`` (µs) only stamps the dead-interval deadline."""
    st = n.state

    if isinstance(e, HelloReceived):
        n = replace(n, dead_deadline=now + n.dead_interval * S)
        if st is NState.DOWN:
            n = replace(n, state=NState.INIT)
            st = NState.INIT
            if not e.lists_me:
                return n, []
        if st is NState.INIT:
            if e.lists_me and not n.retry_pending:
                return _two_way(n)
            return n, []
        if not e.lists_me:
            return _teardown(n, NState.INIT)
        return n, []

    if isinstance(e, Dead):
        if st is NState.DOWN:
            return n, []
        return _teardown(n, NState.DOWN)

    if isinstance(e, QuicEstablished):
        if n.mode is not Mode.OVER_QUIC or st not in (NState.INIT, NState.TWO_WAY):
            return n, []
        n2, acts = _enter_exstart(replace(n, conn=e.conn, retry_pending=False))
        return replace(n2, quic_retries=0), acts

    if isinstance(e, QuicFailed):
        if n.mode is not Mode.OVER_QUIC or st < NState.TWO_WAY and not n.retry_pending:
            return n, []
        if n.quic_retries >= MAX_QUIC_RETRIES:
            return _teardown(n, NState.DOWN)
        nxt, acts = _teardown(n, NState.INIT, keep_retries=True)
        nxt = replace(nxt, quic_retries=n.quic_retries + 1, retry_pending=True)
        return nxt, acts + [ScheduleQuicRetry()]

    if isinstance(e, DbdReceived):
        return _on_dbd(n, e)

    if isinstance(e, LoadingDone):
        if st is NState.LOADING:
            return replace(n, state=NState.FULL), [RegenerateRouterLsa()]
        return n, []

    if isinstance(e, RxmtTimerExpired):
        if st is NState.INIT and n.retry_pending:
            return _two_way(n)
        acts: list[Action] = []
        if st in (NState.EXSTART, NState.EXCHANGE) and n.master:
            acts.append(RetransmitDbd())
        if st is NState.LOADING:
            acts.append(RetransmitLsr())
        if st >= NState.EXCHANGE:
            acts.append(RetransmitLsus())
        return n, acts

    if st < NState.EXCHANGE:
        return n, []
    if isinstance(e, LsRequestReceived):
        return n, [ReplyLsr(e.packet)]
    if isinstance(e, LsUpdateReceived):
        return n, [ProcessLsu(e.packet)]
    if isinstance(e, LsAckReceived):
        return n, [ProcessAck(e.packet)]
    return n, []
