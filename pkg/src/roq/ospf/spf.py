"""Shortest-path-first computation over an LSDB."""

from __future__ import annotations

import heapq
from typing import Mapping, NamedTuple

from ..prefix import Prefix
from .lsdb import Lsdb
from .packets import MAX_AGE, Lsa, LsaKey, LsaType


class Route(NamedTuple):
    next_hop: int  # first-hop router_id; the root itself for local destinations
    cost: int


RouteTable = dict  # router_id | Prefix -> Route


def _as_map(db) -> Mapping[LsaKey, Lsa]:
    if isinstance(db, Mapping):
        return db
    if isinstance(db, Lsdb):
        return db.stored()
    return {lsa.key: lsa for lsa in db}


def router_graph(lsas: Mapping[LsaKey, Lsa]) -> dict[int, dict[int, int]]:
    """Adjacency map keeping only links that both endpoints advertise."""
    adv: dict[int, dict[int, int]] = {}
    for key, lsa in lsas.items():
        if key.type is LsaType.ROUTER and lsa.age < MAX_AGE:
            links: dict[int, int] = {}
            for nbr, cost in lsa.body.links:
                if nbr not in links or cost < links[nbr]:
                    links[nbr] = cost
            adv[key.adv_router] = links
    graph: dict[int, dict[int, int]] = {}
    for u, links in adv.items():
        graph[u] = {v: c for v, c in links.items() if u in adv.get(v, {})}
    return graph


def spf_compute(db, root: int) -> RouteTable:
    """Dijkstra from ``root``; ties on cost go to the lowest first-hop router_id.

    ``db`` is an ``Lsdb``, a mapping of ``LsaKey`` to ``Lsa`` or an iterable
    of LSAs. Returns routes to every reachable router and to every prefix
    advertised in an external-prefix LSA by a reachable router.
    """
    lsas = _as_map(db)
    graph = router_graph(lsas)
    best: dict[int, tuple[int, int]] = {root: (0, root)}
    heap = [(0, root, root)]
    done: set[int] = set()
    while heap:
        cost, hop, u = heapq.heappop(heap)
        if u in done:
            continue
        done.add(u)
        for v, w in graph.get(u, {}).items():
            if v in done:
                continue
            cand = (cost + w, v if u == root else hop)
            cur = best.get(v)
            if cur is None or cand < cur:
                best[v] = cand
                heapq.heappush(heap, (cand[0], cand[1], v))
    table: RouteTable = {r: Route(hop, c) for r, (c, hop) in best.items()}
    for key, lsa in lsas.items():
        if key.type is not LsaType.EXTERNAL_PREFIX or lsa.age >= MAX_AGE:
            continue
        origin = best.get(key.adv_router)
        if origin is None:
            continue
        cand = Route(origin[1], origin[0] + lsa.body.cost)
        prefix: Prefix = lsa.body.prefix
        cur = table.get(prefix)
        if cur is None or (cand.cost, cand.next_hop) < (cur.cost, cur.next_hop):
            table[prefix] = cand
    return table
