import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import brute_force_routes
from randmsg import random_lsa, random_ospf_packet
from roq.netsim import S
from roq.ospf import Route, spf_compute
from roq.ospf.lsdb import (
    AddRetransmit,
    ImpliedAck,
    KeyMismatch,
    Lsdb,
    LsdbChanged,
    Order,
    RunSpf,
    SendAck,
    SendLsu,
    install_and_flood,
    lsdb_compare,
)
from roq.ospf.packets import (
    INITIAL_SEQ,
    MAX_AGE,
    MAX_PACKET,
    ExternalBody,
    Hello,
    Lsa,
    LsaHeader,
    LsaKey,
    LsaType,
    LsUpdate,
    RouterBody,
    Truncated,
    UnknownPacketType,
    decode_packet,
    decode_stream,
    encode_packet,
    frame,
    seq_from_u32,
    split_lsas,
)
from roq.prefix import Prefix

KEY = LsaKey(LsaType.ROUTER, 1, 1)


def hdr(seq, age, key=KEY):
    return LsaHeader(key, seq, age)


def router_lsa(rid, links, seq=INITIAL_SEQ, age=0):
    return Lsa(LsaKey(LsaType.ROUTER, rid, rid), seq, age, RouterBody(tuple(links)))


# -- codec ------------------------------------------------------------------

def test_hello_round_trip():
    h = Hello(1, 10, 40, ())
    assert decode_packet(encode_packet(h)) == h


def test_update_with_three_lsas_keeps_order():
    rng = random.Random(3)
    lsas = tuple(random_lsa(rng) for _ in range(3))
    back = decode_packet(encode_packet(LsUpdate(7, lsas)))
    assert back.lsas == lsas


def test_stream_with_one_and_a_half_packets():
    a = frame(Hello(1, 10, 40, (2, 3)))
    b = frame(LsUpdate(1, (router_lsa(1, [(2, 1)]),)))
    buf = a + b[: len(b) // 2]
    pkt, used = decode_stream(buf)
    assert pkt == Hello(1, 10, 40, (2, 3)) and used == len(a)
    with pytest.raises(Truncated):
        decode_stream(buf, used)


def test_unknown_packet_type():
    blob = bytearray(encode_packet(Hello(1, 10, 40)))
    blob[1] = 9
    with pytest.raises(UnknownPacketType):
        decode_packet(bytes(blob))


def test_truncated_packet():
    blob = encode_packet(Hello(1, 10, 40, (5,)))
    with pytest.raises(Truncated):
        decode_packet(blob[:-2])


def test_initial_sequence_is_0x80000001():
    assert seq_from_u32(0x80000001) == INITIAL_SEQ
    assert seq_from_u32(0x80000002) == INITIAL_SEQ + 1


def test_ten_thousand_random_round_trips():
    rng = random.Random(99)
    for _ in range(10_000):
        p = random_ospf_packet(rng)
        assert decode_packet(encode_packet(p)) == p


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**64 - 1), st.integers(1, 40))
def test_stream_records_cut_anywhere(seed, piece):
    rng = random.Random(seed)
    pkts = [random_ospf_packet(rng) for _ in range(4)]
    data = b"".join(frame(p) for p in pkts)
    buf, out = bytearray(), []
    for i in range(0, len(data), piece):
        buf += data[i:i + piece]
        while True:
            try:
                p, n = decode_stream(buf)
            except Truncated:
                break
            out.append(p)
            del buf[:n]
    assert out == pkts and not buf


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**64 - 1), st.integers(1, 80))
def test_split_lsas_respects_limit(seed, n):
    rng = random.Random(seed)
    lsas = [random_lsa(rng) for _ in range(n)]
    pkts = split_lsas(1, lsas, MAX_PACKET)
    assert [a for p in pkts for a in p.lsas] == lsas
    for p in pkts:
        assert len(encode_packet(p)) <= MAX_PACKET or len(p.lsas) == 1


# -- comparison ---------------------------------------------------------------

def test_higher_seq_wins():
    assert lsdb_compare(hdr(seq_from_u32(0x80000002), 0), hdr(seq_from_u32(0x80000001), 0)) is Order.A_NEWER


def test_much_younger_copy_wins():
    assert lsdb_compare(hdr(5, 100), hdr(5, 10)) is Order.B_NEWER


def test_small_age_difference_is_same():
    assert lsdb_compare(hdr(5, 12), hdr(5, 10)) is Order.SAME


def test_max_age_copy_wins_on_equal_seq():
    assert lsdb_compare(hdr(5, MAX_AGE), hdr(5, 1)) is Order.A_NEWER


def test_key_mismatch():
    with pytest.raises(KeyMismatch):
        lsdb_compare(hdr(1, 1), hdr(1, 1, LsaKey(LsaType.ROUTER, 2, 2)))


@settings(max_examples=300, deadline=None)
@given(st.integers(-5, 5), st.integers(0, MAX_AGE), st.integers(-5, 5), st.integers(0, MAX_AGE))
def test_compare_is_antisymmetric(s1, a1, s2, a2):
    flip = {Order.A_NEWER: Order.B_NEWER, Order.B_NEWER: Order.A_NEWER, Order.SAME: Order.SAME}
    assert lsdb_compare(hdr(s2, a2), hdr(s1, a1)) is flip[lsdb_compare(hdr(s1, a1), hdr(s2, a2))]


# -- database and flooding ----------------------------------------------------

def test_age_advances_with_time():
    db = Lsdb()
    db.install(router_lsa(1, [], age=3), 0)
    assert db.age_of(KEY, 10 * S + 5) == 13
    assert db.age_of(KEY, 10_000 * S) == MAX_AGE
    assert db.next_max_age() == (MAX_AGE - 3) * S


def test_new_lsa_floods_all_other_adjacencies():
    db = Lsdb()
    lsa = router_lsa(1, [(2, 1)])
    acts = install_and_flood(db, lsa, 2, [2, 3, 4])
    assert db.get(KEY, 0) == lsa
    assert SendLsu(3, lsa) in acts and SendLsu(4, lsa) in acts
    assert not any(isinstance(a, SendLsu) and a.to == 2 for a in acts)
    assert AddRetransmit(3, lsa) in acts
    assert SendAck(2, lsa.header) in acts
    assert LsdbChanged(KEY, lsa.seq) in acts and RunSpf() in acts


def test_identical_copy_is_only_acknowledged():
    db = Lsdb()
    lsa = router_lsa(1, [(2, 1)])
    install_and_flood(db, lsa, None, [2, 3])
    acts = install_and_flood(db, lsa, 2, [2, 3])
    assert acts == [ImpliedAck(2, lsa.header), SendAck(2, lsa.header)]


def test_identical_copy_with_delegated_acks():
    db = Lsdb()
    lsa = router_lsa(1, [(2, 1)])
    install_and_flood(db, lsa, None, [2, 3], delegate_acks=True)
    acts = install_and_flood(db, lsa, 2, [2, 3], delegate_acks=True)
    assert acts == [ImpliedAck(2, lsa.header)]


def test_delegated_acks_skip_retransmission_lists():
    acts = install_and_flood(Lsdb(), router_lsa(1, []), 2, [2, 3, 4], delegate_acks=True)
    assert not any(isinstance(a, (AddRetransmit, SendAck)) for a in acts)
    assert sum(isinstance(a, SendLsu) for a in acts) == 2


def test_older_copy_is_answered_with_stored():
    db = Lsdb()
    newer = router_lsa(1, [(2, 1)], seq=INITIAL_SEQ + 3)
    install_and_flood(db, newer, None, [2])
    acts = install_and_flood(db, router_lsa(1, [], seq=INITIAL_SEQ), 2, [2])
    assert acts == [SendLsu(2, newer)]


def test_refresh_without_change_skips_spf():
    db = Lsdb()
    install_and_flood(db, router_lsa(1, [(2, 1)]), None, [])
    acts = install_and_flood(db, router_lsa(1, [(2, 1)], seq=INITIAL_SEQ + 1), None, [])
    assert RunSpf() not in acts


def test_max_age_flush_removes_entry():
    db = Lsdb()
    install_and_flood(db, router_lsa(1, [(2, 1)]), None, [])
    acts = install_and_flood(db, router_lsa(1, [(2, 1)], age=MAX_AGE), 2, [2, 3])
    assert KEY not in db
    assert RunSpf() in acts
    assert install_and_flood(db, router_lsa(1, [], age=MAX_AGE), 3, [2, 3]) == \
        [SendAck(3, router_lsa(1, [], age=MAX_AGE).header)]


def _flood_count(n, delegate=False):
    """Event-free flood model: every router applies install_and_flood to what it receives."""
    dbs = {r: Lsdb() for r in range(1, n + 1)}
    adj = {r: [x for x in dbs if x != r] for r in dbs}
    lsa = Lsa(LsaKey(LsaType.EXTERNAL_PREFIX, 1, 1), INITIAL_SEQ, 0,
              ExternalBody(Prefix.parse("203.0.113.0/24"), 1))
    queue = [(1, None, lsa)]
    sends = 0
    while queue:
        at, frm, a = queue.pop(0)
        for act in install_and_flood(dbs[at], a, frm, adj[at], delegate_acks=delegate):
            if isinstance(act, SendLsu):
                sends += 1
                queue.append((act.to, at, act.lsa))
    assert all(db.get(lsa.key, 0) == lsa for db in dbs.values())
    return sends


@pytest.mark.parametrize("n", [2, 3, 6, 8])
def test_flood_terminates_within_bound(n):
    sends = _flood_count(n)
    assert sends <= n * (n - 1)
    assert sends == (n - 1) + (n - 1) * (n - 2)


# -- SPF ----------------------------------------------------------------------

def random_graph(rng):
    n = rng.randint(1, 8)
    ids = rng.sample(range(1, 50), n)
    adverts = {r: {} for r in ids}
    for i, u in enumerate(ids):
        for v in ids[i + 1:]:
            roll = rng.random()
            if roll < 0.45:
                adverts[u][v] = rng.randint(1, 10)
                adverts[v][u] = rng.randint(1, 10)
            elif roll < 0.55:
                adverts[u][v] = rng.randint(1, 10)  # one-sided, must be ignored
    return ids, adverts


def to_lsas(adverts):
    return [router_lsa(r, sorted(links.items())) for r, links in adverts.items()]


def test_triangle_example():
    a, b, c = 1, 2, 3
    adverts = {a: {b: 1, c: 5}, b: {a: 1, c: 1}, c: {a: 5, b: 1}}
    table = spf_compute(to_lsas(adverts), a)
    assert table[c] == Route(b, 2)
    assert table[b] == Route(b, 1)
    assert table[a] == Route(a, 0)


def test_one_sided_link_is_ignored():
    table = spf_compute(to_lsas({1: {2: 1}, 2: {}}), 1)
    assert 2 not in table


def test_root_alone():
    assert spf_compute(to_lsas({1: {}}), 1) == {1: Route(1, 0)}


def test_external_prefix_uses_advertiser_route():
    p = Prefix.parse("203.0.113.0/24")
    lsas = to_lsas({1: {2: 3}, 2: {1: 3}})
    lsas.append(Lsa(LsaKey(LsaType.EXTERNAL_PREFIX, 2, 1), INITIAL_SEQ, 0, ExternalBody(p, 4)))
    assert spf_compute(lsas, 1)[p] == Route(2, 7)


def test_spf_matches_brute_force_on_1000_random_graphs():
    rng = random.Random(8)
    for _ in range(1000):
        ids, adverts = random_graph(rng)
        root = ids[0]
        assert spf_compute(to_lsas(adverts), root) == brute_force_routes(adverts, root)
