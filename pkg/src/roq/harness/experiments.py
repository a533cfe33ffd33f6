"""Wire routers to the simulator and run the two experiments.

BGP: an injector feeds a route table to the monitor router, which shares
it with two peers that are also connected to each other. A prefix counts
as propagated once the monitor has seen an UPDATE mentioning it from both
peers (announcement or split-horizon withdrawal).

OSPF: a full mesh is brought up from a cold start, then one external
prefix is injected at the first router and reconvergence is timed.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

from ..bgp import BgpSpeaker
from ..bgp.rib import LOCAL_PEER
from ..netsim import S, Simulator
from ..ospf import Mode, OspfRouter, converged, convergence_time
from ..ospf.packets import LSU
from ..prefix import Prefix
from ..transport import (
    ALPN_BGP,
    ALPN_OSPF,
    Identity,
    PinnedFingerprints,
    SecurityConfig,
    Transport,
    TransportKind,
)
from .config import ExperimentConfig
from .rib_io import generate_rib, ingest_rib

log = logging.getLogger(__name__)

DEFAULT_INJECT_PREFIX = "203.0.113.0/24"
KIND = {"tcp-like": TransportKind.PLAIN_STREAM, "quic": TransportKind.SECURE_MUX}


class ExperimentError(Exception):
    pass


class SessionFailed(ExperimentError):
    pass


@dataclass(frozen=True)
class BgpRecord:
    prefix: Prefix
    t_injected_us: int
    t_r2_us: int | None
    t_r3_us: int | None

    @property
    def complete(self) -> bool:
        return self.t_r2_us is not None and self.t_r3_us is not None

    @property
    def latency_us(self) -> int | None:
        if not self.complete:
            return None
        return max(self.t_r2_us, self.t_r3_us) - self.t_injected_us


@dataclass
class BgpRun:
    records: list[BgpRecord]
    partial: bool
    reason: str
    t_injected_us: int
    lower_bound_us: int
    digests: dict[tuple[str, str], str]
    message_counts: dict[tuple[str, str], int]
    loop_violations: int
    end_us: int
    peers: tuple[str, str]

    @property
    def missing(self) -> int:
        return sum(1 for r in self.records if not r.complete)

    def latencies(self) -> list[int]:
        return [r.latency_us for r in self.records if r.complete]


@dataclass(frozen=True)
class OspfEvent:
    event: str
    t_us: int


@dataclass
class OspfRun:
    events: list[OspfEvent]
    partial: bool
    reason: str
    mode: str
    cold_start_us: int | None
    cold_quiescent_us: int | None
    injected_at_us: int | None
    reconvergence_us: int | None
    reconverge_quiescent_us: int | None
    injection_lsus: int | None
    routers: list[OspfRouter] = field(repr=False, default_factory=list)


def _identities(names, seed: int) -> dict[str, Identity]:
    return {n: Identity.generate(n, seed) for n in names}


def _security(name: str, neighbors, ids: dict[str, Identity], alpn: str) -> SecurityConfig:
    trust = PinnedFingerprints([ids[n].fingerprint for n in neighbors])
    return SecurityConfig(ids[name], trust, alpn)


def _build_sim(cfg: ExperimentConfig) -> Simulator:
    sim = Simulator(cfg.seed)
    for n in cfg.nodes:
        sim.add_node(n.name)
    for ln in cfg.links:
        sim.add_link(ln.spec)
    return sim


def load_routes(cfg: ExperimentConfig):
    if cfg.rib is None:
        raise ExperimentError("no rib configured")
    if cfg.rib.path is not None:
        return ingest_rib(cfg.rib.path)
    return generate_rib(cfg.rib.generate, cfg.seed)


def run_bgp_experiment(cfg: ExperimentConfig, routes=None) -> BgpRun:
    if cfg.protocol != "bgp":
        raise ExperimentError("run_bgp_experiment needs protocol = bgp")
    if routes is None:
        routes = load_routes(cfg)
    sim = _build_sim(cfg)
    transport = Transport(sim)
    roles = {n.name: n.role for n in cfg.nodes}
    injector = next(n for n in cfg.nodes if n.role == "injector")
    monitor = next(n for n in cfg.nodes if n.role == "monitor")
    peers = tuple(sorted((n for n in cfg.nodes if n.role == "peer"), key=lambda n: n.name))

    neighbors: dict[str, list[str]] = {n.name: [] for n in cfg.nodes}
    for ln in cfg.links:
        neighbors[ln.spec.a].append(ln.spec.b)
        neighbors[ln.spec.b].append(ln.spec.a)
    ids = _identities(neighbors, cfg.seed)
    speakers = {}
    for n in cfg.nodes:
        sec = _security(n.name, neighbors[n.name], ids, ALPN_BGP)
        speakers[n.name] = BgpSpeaker(sim, transport, n.name, n.asn, n.router_id, sec)
    for ln in cfg.links:
        a, b = cfg.node(ln.spec.a), cfg.node(ln.spec.b)
        # the injector always speaks tcp-like, whatever the experiment transport
        if "injector" in (roles[a.name], roles[b.name]):
            kind = TransportKind.PLAIN_STREAM
        else:
            kind = KIND[cfg.transport]
        speakers[a.name].add_peer(b.name, b.asn, b.router_id, kind)
        speakers[b.name].add_peer(a.name, a.asn, a.router_id, kind)
    sessions = [s for sp in speakers.values() for s in sp.sessions.values()]
    for name in sorted(speakers):
        speakers[name].start()

    cap = round(cfg.time_cap * S)
    res = sim.run_until(lambda: all(s.established for s in sessions), time_cap=cap)
    if res.reason != "predicate":
        down = [repr(s) for s in sessions if not s.established]
        raise SessionFailed(f"sessions not established by {cfg.time_cap}s: {', '.join(down)}")

    r2_id, r3_id = peers[0].router_id, peers[1].router_id
    first = {r2_id: {}, r3_id: {}}
    pending = {p for p, _ in routes}
    total = len(pending)
    done = [0]

    def on_update(router: str, peer_id: int, prefix: Prefix, t: int) -> None:
        seen = first.get(peer_id)
        if seen is None or prefix in seen or prefix not in pending:
            return
        seen[prefix] = t
        other = first[r3_id if peer_id == r2_id else r2_id]
        if prefix in other:
            done[0] += 1

    speakers[monitor.name].update_taps.append(on_update)
    t_inj = sim.now
    speakers[injector.name].originate(routes)
    res = sim.run_until(lambda: done[0] >= total, time_cap=cap)

    records = [BgpRecord(p, t_inj, first[r2_id].get(p), first[r3_id].get(p)) for p, _ in routes]
    delays = [sim.link_between(monitor.name, p.name).delay for p in peers]
    loops = sum(sp.loop_violations for sp in speakers.values())
    for sp in speakers.values():
        loops += sum(1 for e in sp.rib.entries()
                     if e.learned_from != LOCAL_PEER and sp.asn in e.attrs.as_path)
    digests, counts = {}, {}
    for name, sp in sorted(speakers.items()):
        if roles[name] == "injector":
            continue
        for s in sp.sessions.values():
            if roles[s.cfg.peer_node] == "injector":
                continue
            digests[(name, s.cfg.peer_node)] = s.tx_digest
            counts[(name, s.cfg.peer_node)] = s.tx_count
    partial = res.reason != "predicate"
    return BgpRun(records, partial, res.reason, t_inj, 2 * min(delays), digests, counts, loops,
                  sim.now, (peers[0].name, peers[1].name))


def build_ospf(cfg: ExperimentConfig) -> tuple[Simulator, list[OspfRouter]]:
    sim = _build_sim(cfg)
    mode = Mode.OVER_QUIC if cfg.transport == "quic" else Mode.NATIVE
    transport = Transport(sim) if mode is Mode.OVER_QUIC else None
    neighbors: dict[str, dict[str, int]] = {n.name: {} for n in cfg.nodes}
    for ln in cfg.links:
        neighbors[ln.spec.a][ln.spec.b] = ln.cost
        neighbors[ln.spec.b][ln.spec.a] = ln.cost
    ids = _identities(neighbors, cfg.seed) if transport else {}
    routers = []
    for n in cfg.nodes:
        sec = _security(n.name, neighbors[n.name], ids, ALPN_OSPF) if transport else None
        routers.append(OspfRouter(sim, n.name, n.router_id, mode, transport=transport, sec=sec,
                                  delegate_acks=cfg.delegate_acks, costs=neighbors[n.name]))
    return sim, routers


def _lsu_total(routers) -> int:
    return sum(c for r in routers for (path, t), c in r.tx.items() if t == LSU)


def run_ospf_experiment(cfg: ExperimentConfig) -> OspfRun:
    if cfg.protocol != "ospf":
        raise ExperimentError("run_ospf_experiment needs protocol = ospf")
    sim, routers = build_ospf(cfg)
    mode = routers[0].mode.value + ("+delegate-acks" if cfg.delegate_acks else "")
    cap = round(cfg.time_cap * S)
    for r in routers:
        r.start()
    events: list[OspfEvent] = []

    def finish(partial: bool, reason: str, cold, cold_q, inj, reconv, reconv_q, lsus) -> OspfRun:
        for r in routers:
            if r.route_changed_at is not None:
                events.append(OspfEvent(f"{r.node_id}.last_route_change", r.route_changed_at))
        return OspfRun(events, partial, reason, mode, cold, cold_q, inj, reconv, reconv_q, lsus,
                       routers)

    res = sim.run_until(lambda: converged(routers), time_cap=cap)
    if res.reason != "predicate":
        events.append(OspfEvent("time_cap", sim.now))
        return finish(True, res.reason, None, None, None, None, None, None)
    cold = convergence_time(routers, 0)
    cold_q = sim.now
    events.append(OspfEvent("cold_start_converged", cold))
    events.append(OspfEvent("cold_start_quiescent", cold_q))

    prefix = cfg.inject_prefix or Prefix.parse(DEFAULT_INJECT_PREFIX)
    t_inj = sim.now
    lsus_before = _lsu_total(routers)
    events.append(OspfEvent("prefix_injected", t_inj))
    routers[0].originate_prefix(prefix)
    res = sim.run_until(lambda: converged(routers) and all(prefix in r.routes for r in routers),
                        time_cap=cap)
    if res.reason != "predicate":
        events.append(OspfEvent("time_cap", sim.now))
        return finish(True, res.reason, cold, cold_q, t_inj, None, None, None)
    reconv = convergence_time(routers, t_inj)
    events.append(OspfEvent("reconverged", t_inj + reconv))
    events.append(OspfEvent("reconverge_quiescent", sim.now))
    events.append(OspfEvent("reconvergence_duration", reconv))
    return finish(False, res.reason, cold, cold_q, t_inj, reconv, sim.now - t_inj,
                  _lsu_total(routers) - lsus_before)


def triangle_config(transport: str = "quic", routes: int = 10_000, seed: int = 42,
                    delay_ms: float = 10, loss: float = 0.0, time_cap: float = 300.0):
    """The injector / three-router topology, built without a config file."""
    from .config import parse_config
    text = _TRIANGLE.format(transport=transport, routes=routes, seed=seed, delay=delay_ms,
                            loss=loss, cap=time_cap)
    return parse_config(text)


def mesh_config(n: int = 6, transport: str = "tcp-like", delegate: bool = False, seed: int = 42,
                delay_ms: float = 10, loss: float = 0.0, time_cap: float = 300.0):
    """A full mesh of ``n`` OSPF routers R1..Rn."""
    from .config import parse_config
    lines = ['protocol = "ospf"', f'transport = "{transport}"', f"seed = {seed}",
             f"time_cap = {time_cap}", "[ospf]",
             f'mode = "{"delegate-acks" if delegate else "paper-fidelity"}"']
    for i in range(1, n + 1):
        lines += ["[[nodes]]", f'name = "R{i}"', f"router_id = {i}"]
    for i in range(1, n + 1):
        for j in range(i + 1, n + 1):
            lines += ["[[links]]", f'a = "R{i}"', f'b = "R{j}"', f"one_way_delay_ms = {delay_ms}",
                      f"loss_rate = {loss}"]
    return parse_config("\n".join(lines))


_TRIANGLE = """
protocol = "bgp"
transport = "{transport}"
seed = {seed}
time_cap = {cap}

[rib]
generate = {routes}

[[nodes]]
name = "INJ"
asn = 64500
router_id = 100
role = "injector"

[[nodes]]
name = "R1"
asn = 64501
router_id = 1
role = "monitor"

[[nodes]]
name = "R2"
asn = 64502
router_id = 2
role = "peer"

[[nodes]]
name = "R3"
asn = 64503
router_id = 3
role = "peer"

[[links]]
a = "INJ"
b = "R1"
one_way_delay_ms = {delay}
loss_rate = {loss}

[[links]]
a = "R1"
b = "R2"
one_way_delay_ms = {delay}
loss_rate = {loss}

[[links]]
a = "R1"
b = "R3"
one_way_delay_ms = {delay}
loss_rate = {loss}

[[links]]
a = "R2"
b = "R3"
one_way_delay_ms = {delay}
loss_rate = {loss}
"""
