import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from roq.netsim import (
    MS,
    S,
    DuplicateLink,
    DuplicateNode,
    InvalidLink,
    LinkSpec,
    MtuExceeded,
    PastDeadline,
    Simulator,
    UnknownEndpoint,
)


def _pair(delay_ms=10.0, loss=0.0, mtu=1500, seed=0):
    sim = Simulator(seed)
    sim.add_node("a")
    sim.add_node("b")
    link = sim.add_link(LinkSpec("a", "b", delay_ms, loss, mtu))
    got = []
    sim.nodes["b"].register("raw", lambda src, payload, lk: got.append((sim.now, payload)))
    return sim, link, got


def test_triangle_with_injector_topology():
    sim = Simulator()
    for n in ("inj", "R1", "R2", "R3"):
        sim.add_node(n)
    for a, b in [("inj", "R1"), ("R1", "R2"), ("R1", "R3"), ("R2", "R3")]:
        sim.add_link(LinkSpec(a, b, 10))
    assert len(sim.links) == 4
    assert sorted(sim.nodes["R1"].links) == ["R2", "R3", "inj"]


def test_six_node_full_mesh_has_fifteen_links():
    sim = Simulator()
    names = [f"n{i}" for i in range(6)]
    for n in names:
        sim.add_node(n)
    for i in range(6):
        for j in range(i + 1, 6):
            sim.add_link(LinkSpec(names[i], names[j], 10))
    assert len(sim.links) == 15


def test_topology_errors():
    sim = Simulator()
    sim.add_node("a")
    sim.add_node("b")
    with pytest.raises(DuplicateNode):
        sim.add_node("a")
    with pytest.raises(InvalidLink):
        sim.add_link(LinkSpec("a", "b", 0))
    with pytest.raises(UnknownEndpoint):
        sim.add_link(LinkSpec("a", "zz", 1))
    sim.add_link(LinkSpec("a", "b", 1))
    with pytest.raises(DuplicateLink):
        sim.add_link(LinkSpec("b", "a", 2))


def test_lossless_delivery_after_one_way_delay():
    sim, link, got = _pair()
    sim.send_datagram("a", link, b"hi")
    sim.run_until()
    assert got == [(10 * MS, b"hi")]


def test_total_loss_never_delivers():
    sim, link, got = _pair(loss=1.0)
    for _ in range(50):
        sim.send_datagram("a", link, b"x")
    r = sim.run_until()
    assert got == []
    assert r.reason == "QueueExhausted"
    assert link.dropped == 50


def _drops(seed):
    sim, link, _ = _pair(loss=0.1, seed=seed)
    for _ in range(1000):
        sim.send_datagram("a", link, b"x")
    return link.dropped


def test_seeded_loss_is_reproducible():
    assert _drops(7) == _drops(7)
    assert 50 < _drops(7) < 150


def test_mtu_exceeded():
    sim, link, _ = _pair(mtu=100)
    sim.send_datagram("a", link, b"x" * 100)
    with pytest.raises(MtuExceeded):
        sim.send_datagram("a", link, b"x" * 101)


def test_cancelled_timer_never_fires():
    sim = Simulator()
    fired = []
    t = sim.set_timer(5 * S, fired.append, "t")
    sim.set_timer(1 * S, sim.cancel_timer, t)
    sim.run_until()
    assert fired == []
    sim.cancel_timer(t)  # idempotent


def test_same_instant_timers_fire_in_set_order():
    sim = Simulator()
    fired = []
    for tag in "abcde":
        sim.set_timer(3 * S, fired.append, tag)
    sim.run_until()
    assert fired == list("abcde")


def test_past_deadline_rejected():
    sim = Simulator()
    sim.set_timer(10, lambda: None)
    sim.run_until()
    with pytest.raises(PastDeadline):
        sim.set_timer(sim.now - 1, lambda: None)


def test_time_cap_stops_exactly_at_cap():
    sim = Simulator()

    def again():
        sim.call_later(7 * MS, again)

    sim.call_soon(again)
    r = sim.run_until(lambda: False, time_cap=300 * S)
    assert r.reason == "TimeCap"
    assert r.time == 300 * S


def test_predicate_checked_after_each_event():
    sim = Simulator()
    box = []
    for i in range(5):
        sim.set_timer(i * MS, box.append, i)
    r = sim.run_until(lambda: len(box) == 3)
    assert r.reason == "predicate"
    assert r.time == 2 * MS
    assert sim.pending() == 2


def test_instrumentation_csv():
    sim = Simulator()
    sim.instrument.add(5, "R1", "bgp", "10.0.0.0/8", 3)
    assert sim.instrument.to_csv() == "t_us,node,category,key,value\n5,R1,bgp,10.0.0.0/8,3\n"


@settings(max_examples=60, deadline=None)
@given(delay=st.integers(1, 50), loss=st.floats(0, 0.9),
       gaps=st.lists(st.integers(0, 30_000), min_size=1, max_size=60),
       seed=st.integers(0, 2**32))
def test_delay_fidelity_and_fifo(delay, loss, gaps, seed):
    sim, link, got = _pair(delay_ms=delay, loss=loss, seed=seed)
    sent_at = {}
    t = 0
    for i, g in enumerate(gaps):
        t += g
        payload = i.to_bytes(4, "big")
        sent_at[payload] = t
        sim.set_timer(t, sim.send_datagram, "a", link, payload)
    sim.run_until()
    for at, payload in got:
        assert at - sent_at[payload] == delay * MS
    order = [int.from_bytes(p, "big") for _, p in got]
    assert order == sorted(order)
    assert len(got) + link.dropped == len(gaps)


@settings(max_examples=40, deadline=None)
@given(times=st.lists(st.integers(0, 10_000), min_size=1, max_size=40))
def test_causality_and_time_monotone(times):
    sim = Simulator()
    seen = []

    def fire(scheduled_by, at):
        assert sim.now >= scheduled_by
        seen.append(sim.now)
        if at < 5_000:
            sim.call_later(at % 97, fire, sim.now, at + 5_000)

    for t in times:
        sim.set_timer(t, fire, 0, t)
    sim.run_until()
    assert seen == sorted(seen)


def test_identical_runs_have_identical_drop_patterns():
    def pattern(seed):
        sim, link, got = _pair(loss=0.3, seed=seed)
        for i in range(200):
            sim.send_datagram("a", link, i.to_bytes(2, "big"))
        sim.run_until()
        return [p for _, p in got]

    assert pattern(11) == pattern(11)
    assert pattern(11) != pattern(12)
