"""Scripted event traces through the OSPF neighbor state machine."""

import random
from dataclasses import replace

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from roq.netsim import S
from roq.ospf.neighbor import (
    MAX_QUIC_RETRIES,
    CloseQuic,
    DbdReceived,
    Dead,
    EstablishQuic,
    FlushAdjacency,
    HelloReceived,
    LoadingDone,
    LsAckReceived,
    LsRequestReceived,
    LsUpdateReceived,
    Mode,
    NeighborState,
    NState,
    ProcessAck,
    ProcessDbdHeaders,
    ProcessLsu,
    QuicEstablished,
    QuicFailed,
    RegenerateRouterLsa,
    ReplyLsr,
    RetransmitDbd,
    RetransmitLsr,
    RetransmitLsus,
    RxmtTimerExpired,
    ScheduleQuicRetry,
    SendDbd,
    initial_dd_seq,
    neighbor_fsm_step,
)
from roq.ospf.packets import (
    FLAG_INIT,
    FLAG_MASTER,
    FLAG_MORE,
    DbDescription,
    LsaHeader,
    LsaKey,
    LsAck,
    LsaType,
    LsRequest,
    LsUpdate,
)

NATIVE, QUIC = Mode.NATIVE, Mode.OVER_QUIC
D, I, TW, XS, EX, LD, F = (NState.DOWN, NState.INIT, NState.TWO_WAY, NState.EXSTART,
                           NState.EXCHANGE, NState.LOADING, NState.FULL)
IMMS = FLAG_INIT | FLAG_MORE | FLAG_MASTER

LSR = LsRequestReceived(LsRequest(1, ()))
LSU = LsUpdateReceived(LsUpdate(1, ()))
ACK = LsAckReceived(LsAck(1, ()))


def nbr(state=D, mode=NATIVE, master=True, **kw):
    local, peer = (2, 1) if master else (1, 2)
    return NeighborState(local, peer, mode, state, **kw)


def step(n, *events):
    acts = []
    for e in events:
        n, acts = neighbor_fsm_step(n, e)
    return n, acts


def init_dbd(n):
    seq = initial_dd_seq(n.local_id, n.router_id)
    return DbDescription(n.local_id, seq, FLAG_INIT | FLAG_MORE | (FLAG_MASTER if n.master else 0))


def exstart(mode=NATIVE, master=True):
    n = nbr(I, mode, master, conn="c" if mode is QUIC else None)
    n, _ = step(n, HelloReceived(True)) if mode is NATIVE else step(n, HelloReceived(True), QuicEstablished("c"))
    assert n.state is XS
    return n


def pump(a, b, sa=(), sb=(), dup=None):
    """Run the DBD exchange between two pure machines; return final states and seen headers."""
    rng = random.Random(0)
    na, nb = a, b
    queue = [(1, na.last_dbd), (0, nb.last_dbd)]  # (destination index, packet)
    summaries = (sa, sb)
    seen = ([], [])
    steps = 0
    while queue and steps < 10_000:
        steps += 1
        dst, pkt = queue.pop(0)
        cur = na if dst == 0 else nb
        cur, acts = neighbor_fsm_step(cur, DbdReceived(pkt, summaries[dst]))
        if dst == 0:
            na = cur
        else:
            nb = cur
        for a_ in acts:
            if isinstance(a_, ProcessDbdHeaders):
                seen[dst].extend(a_.headers)
            if isinstance(a_, SendDbd):
                queue.append((1 - dst, a_.packet))
                if dup and rng.random() < dup:
                    queue.append((1 - dst, a_.packet))
    return na, nb, seen


# (name, starting neighbor, events, expected state, expected actions of the last step)
TRACES = [
    ("down_hello_not_listing_me", nbr(D), [HelloReceived(False)], I, []),
    ("down_hello_listing_me_native", nbr(D), [HelloReceived(True)], XS,
     [SendDbd(init_dbd(nbr()))]),
    ("init_hello_listing_me_quic", nbr(I, QUIC), [HelloReceived(True)], TW, [EstablishQuic(1)]),
    ("init_hello_not_listing_me", nbr(I), [HelloReceived(False)], I, []),
    ("two_way_quic_established_master", nbr(TW, QUIC), [QuicEstablished("c")], XS,
     [SendDbd(init_dbd(nbr(master=True)))]),
    ("two_way_quic_established_slave", nbr(TW, QUIC, master=False), [QuicEstablished("c")], XS,
     [SendDbd(init_dbd(nbr(master=False)))]),
    ("full_dead_quic", nbr(F, QUIC, conn="c"), [Dead()], D,
     [FlushAdjacency(), RegenerateRouterLsa(), CloseQuic(1)]),
    ("full_dead_native", nbr(F), [Dead()], D, [FlushAdjacency(), RegenerateRouterLsa()]),
    ("init_dead", nbr(I), [Dead()], D, [FlushAdjacency()]),
    ("down_dead_noop", nbr(D), [Dead()], D, []),
    ("two_way_dead_quic_closes", nbr(TW, QUIC), [Dead()], D, [FlushAdjacency(), CloseQuic(1)]),
    ("two_way_quic_failed", nbr(TW, QUIC), [QuicFailed()], I,
     [FlushAdjacency(), CloseQuic(1), ScheduleQuicRetry()]),
    ("retry_pending_rxmt_redials", nbr(I, QUIC, retry_pending=True, quic_retries=1),
     [RxmtTimerExpired()], TW, [EstablishQuic(1)]),
    ("retry_pending_hello_waits", nbr(I, QUIC, retry_pending=True, quic_retries=1),
     [HelloReceived(True)], I, []),
    ("quic_retries_exhausted", nbr(TW, QUIC, quic_retries=MAX_QUIC_RETRIES), [QuicFailed()], D,
     [FlushAdjacency(), CloseQuic(1)]),
    ("native_ignores_quic_events", nbr(TW), [QuicEstablished("c")], TW, []),
    ("exstart_master_rxmt", exstart(), [RxmtTimerExpired()], XS, [RetransmitDbd()]),
    ("exstart_slave_rxmt", exstart(master=False), [RxmtTimerExpired()], XS, []),
    ("loading_rxmt", nbr(LD), [RxmtTimerExpired()], LD, [RetransmitLsr(), RetransmitLsus()]),
    ("full_rxmt", nbr(F), [RxmtTimerExpired()], F, [RetransmitLsus()]),
    ("loading_done", nbr(LD), [LoadingDone()], F, [RegenerateRouterLsa()]),
    ("loading_done_ignored_elsewhere", nbr(EX), [LoadingDone()], EX, []),
    ("full_one_way_hello", nbr(F), [HelloReceived(False)], I,
     [FlushAdjacency(), RegenerateRouterLsa()]),
    ("full_two_way_hello_keeps", nbr(F), [HelloReceived(True)], F, []),
    ("exchange_lsr", nbr(EX), [LSR], EX, [ReplyLsr(LSR.packet)]),
    ("full_lsu", nbr(F), [LSU], F, [ProcessLsu(LSU.packet)]),
    ("full_ack", nbr(F), [ACK], F, [ProcessAck(ACK.packet)]),
    ("two_way_ignores_lsu", nbr(TW, QUIC), [LSU], TW, []),
    ("init_native_dbd_implies_two_way", nbr(I, master=False),
     [DbdReceived(DbDescription(2, 77, IMMS))], EX,
     [SendDbd(init_dbd(nbr(master=False))), ProcessDbdHeaders(()),
      SendDbd(DbDescription(1, 77, 0))]),
]


@pytest.mark.parametrize("name,start,events,final,last", TRACES, ids=[t[0] for t in TRACES])
def test_trace(name, start, events, final, last):
    n, acts = step(start, *events)
    assert n.state is final
    assert acts == last


def test_trace_count():
    assert len(TRACES) >= 20


def test_retry_exhaustion_reaches_down():
    n = nbr(I, QUIC)
    n, _ = step(n, HelloReceived(True))
    for i in range(MAX_QUIC_RETRIES):
        n, acts = step(n, QuicFailed())
        assert n.state is I and n.quic_retries == i + 1 and ScheduleQuicRetry() in acts
        n, acts = step(n, RxmtTimerExpired())
        assert n.state is TW and acts == [EstablishQuic(1)]
    n, acts = step(n, QuicFailed())
    assert n.state is D
    assert ScheduleQuicRetry() not in acts


def test_quic_success_resets_retries():
    n = nbr(TW, QUIC)
    n, _ = step(n, QuicFailed(), RxmtTimerExpired(), QuicEstablished("c"))
    assert n.state is XS and n.quic_retries == 0 and n.conn == "c"


def test_hello_refreshes_dead_deadline():
    n = nbr(D)
    n, _ = neighbor_fsm_step(n, HelloReceived(False), now=3 * S)
    assert n.dead_deadline == 43 * S
    n, _ = neighbor_fsm_step(n, HelloReceived(True), now=13 * S)
    assert n.dead_deadline == 53 * S


def test_dead_clears_deadline():
    n, _ = neighbor_fsm_step(nbr(F, dead_deadline=40 * S), Dead())
    assert n.dead_deadline is None


def test_master_is_higher_router_id():
    assert nbr(master=True).master and nbr(master=True).dialer
    assert not nbr(master=False).master and not nbr(master=False).dialer


def _headers(n, adv):
    return tuple(LsaHeader(LsaKey(LsaType.ROUTER, adv, i), -0x7FFFFFFF + i, i) for i in range(n))


def _chunks(headers, size):
    return tuple(headers[i:i + size] for i in range(0, len(headers), size))


@pytest.mark.parametrize("na,nb,size", [(0, 0, 3), (1, 0, 3), (0, 5, 2), (7, 4, 3), (20, 1, 4)])
def test_exchange_reaches_loading_and_swaps_all_headers(na, nb, size):
    ha, hb = _headers(na, 2), _headers(nb, 1)
    a, b = exstart(master=True), exstart(master=False)
    a2, b2, seen = pump(a, b, _chunks(ha, size), _chunks(hb, size))
    assert a2.state is LD and b2.state is LD
    assert tuple(seen[0]) == hb and tuple(seen[1]) == ha


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 12), st.integers(0, 12), st.integers(1, 4), st.booleans())
def test_exchange_survives_duplicates(na, nb, size, quic):
    mode = QUIC if quic else NATIVE
    ha, hb = _headers(na, 2), _headers(nb, 1)
    a, b = exstart(mode, master=True), exstart(mode, master=False)
    a2, b2, seen = pump(a, b, _chunks(ha, size), _chunks(hb, size), dup=0.3)
    assert a2.state in (LD, XS, EX) and b2.state in (LD, XS, EX)
    if a2.state is LD and b2.state is LD:
        assert set(seen[0]) == set(hb) and set(seen[1]) == set(ha)


def test_slave_resends_on_duplicate_poll():
    b = exstart(master=False)
    poll = DbDescription(2, 500, IMMS)
    b, acts = step(b, DbdReceived(poll, ((),)))
    assert b.state is EX
    reply = b.last_dbd
    b, acts = step(b, DbdReceived(poll))
    assert acts == [SendDbd(reply)]


def test_slave_restarts_on_sequence_mismatch():
    b = exstart(master=False)
    b, _ = step(b, DbdReceived(DbDescription(2, 500, IMMS), ((), ())))
    b, acts = step(b, DbdReceived(DbDescription(2, 900, FLAG_MASTER | FLAG_MORE)))
    assert b.state is XS
    assert acts[0] == FlushAdjacency()
    assert isinstance(acts[-1], SendDbd) and acts[-1].packet.flags & FLAG_INIT


def test_master_in_full_restarts_when_slave_restarts():
    a = replace(nbr(F), dd_seq=10)
    a, acts = step(a, DbdReceived(DbDescription(1, 3, FLAG_INIT | FLAG_MORE)))
    assert a.state is XS
    assert acts[:2] == [FlushAdjacency(), RegenerateRouterLsa()]


EVENTS = [HelloReceived(True), HelloReceived(False), Dead(), QuicEstablished("c"), QuicFailed(),
          RxmtTimerExpired(), LoadingDone(), LSR, LSU, ACK,
          DbdReceived(DbDescription(1, 5, FLAG_INIT | FLAG_MORE)),
          DbdReceived(DbDescription(1, 5, 0))]


@settings(max_examples=300, deadline=None)
@given(st.lists(st.sampled_from(EVENTS), max_size=30), st.booleans(), st.booleans())
def test_connection_only_in_quic_mode_past_two_way(events, quic, master):
    n = nbr(D, QUIC if quic else NATIVE, master)
    for e in events:
        n, acts = neighbor_fsm_step(n, e)
        if n.conn is not None:
            assert n.mode is QUIC and n.state >= XS
        if quic and n.state >= XS:
            assert n.conn is not None
        assert n.quic_retries <= MAX_QUIC_RETRIES
        if not quic:
            assert not any(isinstance(a, (EstablishQuic, CloseQuic)) for a in acts)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.sampled_from(EVENTS), max_size=30))
def test_dead_always_reaches_down(events):
    n = nbr(D, QUIC)
    for e in events:
        n, _ = neighbor_fsm_step(n, e)
    n, _ = neighbor_fsm_step(n, Dead())
    assert n.state is D and n.conn is None and n.dead_deadline is None
