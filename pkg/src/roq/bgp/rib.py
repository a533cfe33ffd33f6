"""Adj-RIB-In / Loc-RIB / Adj-RIB-Out state and the route selection logic."""

from __future__ import annotations

from dataclasses import dataclass, field

from ..prefix import Prefix
from .messages import MAX_MESSAGE, PathAttrs, Update, encode_attrs, prefix_wire_len, update_size

LOCAL_PEER = 0  # learned_from value for locally originated routes


@dataclass(frozen=True)
class RibEntry:
    prefix: Prefix
    attrs: PathAttrs
    learned_from: int
    t_received: int = 0


@dataclass
class Rib:
    adj_in: dict[int, dict[Prefix, RibEntry]] = field(default_factory=dict)
    loc: dict[Prefix, RibEntry] = field(default_factory=dict)
    adj_out: dict[int, set[Prefix]] = field(default_factory=dict)

    def candidates(self, prefix: Prefix) -> list[RibEntry]:
        out = []
        for table in self.adj_in.values():
            e = table.get(prefix)
            if e is not None:
                out.append(e)
        return out

    def entries(self):
        for table in self.adj_in.values():
            yield from table.values()
        yield from self.loc.values()


def decide(prefix: Prefix, candidates: list[RibEntry]) -> RibEntry | None:
    """Shortest AS path wins; ties go to the lowest peer identifier."""
    best = None
    best_key = None
    for c in candidates:
        key = (len(c.attrs.as_path), c.learned_from)
        if best_key is None or key < best_key:
            best, best_key = c, key
    return best


def _same_route(a: RibEntry | None, b: RibEntry | None) -> bool:
    if a is None or b is None:
        return a is b
    return a.learned_from == b.learned_from and a.attrs == b.attrs


def redecide(rib: Rib, affected) -> list[Prefix]:
    """Re-run selection for ``affected`` prefixes; return those whose best changed."""
    delta = []
    loc = rib.loc
    for p in affected:
        new = decide(p, rib.candidates(p))
        old = loc.get(p)
        if _same_route(old, new):
            if new is not None:
                loc[p] = new
            continue
        if new is None:
            del loc[p]
        else:
            loc[p] = new
        delta.append(p)
    return delta


def process_update(rib: Rib, peer: int, u: Update, local_as: int, now: int = 0) -> list[Prefix]:
    """Apply an UPDATE from ``peer`` and return the Loc-RIB delta (in order).

    Routes whose AS path already contains ``local_as`` are treated as
    withdrawals: they never enter Adj-RIB-In.
    """
    table = rib.adj_in.setdefault(peer, {})
    affected: dict[Prefix, None] = {}
    for p in u.withdrawn:
        if table.pop(p, None) is not None:
            affected[p] = None
    if u.nlri:
        attrs = u.attrs
        if local_as in attrs.as_path:
            for p in u.nlri:
                if table.pop(p, None) is not None:
                    affected[p] = None
        else:
            for p in u.nlri:
                table[p] = RibEntry(p, attrs, peer, now)
                affected[p] = None
    return redecide(rib, affected)


def drop_peer(rib: Rib, peer: int) -> list[Prefix]:
    """Forget everything learned from ``peer`` (session went down)."""
    table = rib.adj_in.pop(peer, {})
    rib.adj_out.pop(peer, None)
    return redecide(rib, list(table))


def originate(rib: Rib, routes, now: int = 0) -> list[Prefix]:
    """Install locally originated ``(prefix, attrs)`` routes."""
    table = rib.adj_in.setdefault(LOCAL_PEER, {})
    affected = []
    for p, attrs in routes:
        table[p] = RibEntry(p, attrs, LOCAL_PEER, now)
        affected.append(p)
    return redecide(rib, affected)


def export_attrs(attrs: PathAttrs, local_as: int, self_id: int) -> PathAttrs:
    path = attrs.as_path
    if not path or path[0] != local_as:
        path = (local_as,) + path
    return PathAttrs(attrs.origin, path, self_id)


def pack_updates(withdraw: list[Prefix], announce: dict[PathAttrs, list[Prefix]]) -> list[Update]:
    """Pack into as few UPDATEs as fit under the 4096-byte message cap."""
    out: list[Update] = []
    base = update_size(0, 0, 0)
    batch: list[Prefix] = []
    used = base
    for p in withdraw:
        n = prefix_wire_len(p)
        if batch and used + n > MAX_MESSAGE:
            out.append(Update(withdrawn=tuple(batch)))
            batch, used = [], base
        batch.append(p)
        used += n
    if batch:
        out.append(Update(withdrawn=tuple(batch)))
    for attrs, prefixes in announce.items():
        head = base + len(encode_attrs(attrs))
        batch, used = [], head
        for p in prefixes:
            n = prefix_wire_len(p)
            if batch and used + n > MAX_MESSAGE:
                out.append(Update(attrs=attrs, nlri=tuple(batch)))
                batch, used = [], head
            batch.append(p)
            used += n
        if batch:
            out.append(Update(attrs=attrs, nlri=tuple(batch)))
    return out


def export(rib: Rib, delta, to_peer: int, to_peer_as: int, local_as: int,
           self_id: int) -> list[Update]:
    """Build the UPDATEs announcing ``delta`` to one peer.

    Split horizon: a best route learned from ``to_peer`` is withdrawn
    towards it. A best path that already contains the peer's AS is not sent;
    an earlier advertisement for that prefix is withdrawn instead.
    """
    sent = rib.adj_out.setdefault(to_peer, set())
    withdraw: list[Prefix] = []
    announce: dict[PathAttrs, list[Prefix]] = {}
    cache: dict[int, PathAttrs] = {}
    for p in delta:
        best = rib.loc.get(p)
        if best is None:
            if p in sent:
                sent.discard(p)
                withdraw.append(p)
            continue
        if best.learned_from == to_peer:
            sent.discard(p)
            withdraw.append(p)
            continue
        if to_peer_as in best.attrs.as_path:
            if p in sent:
                sent.discard(p)
                withdraw.append(p)
            continue
        key = id(best.attrs)
        out = cache.get(key)
        if out is None:
            out = cache[key] = export_attrs(best.attrs, local_as, self_id)
        announce.setdefault(out, []).append(p)
        sent.add(p)
    return pack_updates(withdraw, announce)
