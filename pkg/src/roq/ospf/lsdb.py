"""Link-state database, instance comparison and the flooding procedure."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable, Union

from ..netsim import S
from .packets import MAX_AGE, MAX_AGE_DIFF, Lsa, LsaHeader, LsaKey


class Order(enum.Enum):
    A_NEWER = "ANewer"
    SAME = "Same"
    B_NEWER = "BNewer"


class KeyMismatch(ValueError):
    pass


def lsdb_compare(a: LsaHeader, b: LsaHeader) -> Order:
    """Decide which of two instances of the same LSA is more recent.

    Higher sequence number wins. On equal sequence numbers a MaxAge copy
    wins (so flushes can propagate), otherwise the younger copy wins when
    the ages differ by more than 15 s.
    """
    if a.key != b.key:
        raise KeyMismatch(f"{a.key} vs {b.key}")
    if a.seq != b.seq:
        return Order.A_NEWER if a.seq > b.seq else Order.B_NEWER
    a_max, b_max = a.age >= MAX_AGE, b.age >= MAX_AGE
    if a_max != b_max:
        return Order.A_NEWER if a_max else Order.B_NEWER
    if abs(a.age - b.age) > MAX_AGE_DIFF:
        return Order.A_NEWER if a.age < b.age else Order.B_NEWER
    return Order.SAME


class Lsdb:
    """LSAs keyed by ``LsaKey``. Ages advance with virtual time.

    Each entry remembers when it was installed; the current age is the
    installed age plus whole seconds elapsed since, capped at MaxAge.
    """

    def __init__(self) -> None:
        self._db: dict[LsaKey, tuple[Lsa, int]] = {}

    def __len__(self) -> int:
        return len(self._db)

    def __contains__(self, key: LsaKey) -> bool:
        return key in self._db

    def keys(self) -> list[LsaKey]:
        return sorted(self._db)

    def age_of(self, key: LsaKey, now: int) -> int:
        lsa, at = self._db[key]
        return min(MAX_AGE, lsa.age + (now - at) // S)

    def get(self, key: LsaKey, now: int) -> Lsa | None:
        entry = self._db.get(key)
        if entry is None:
            return None
        lsa, at = entry
        return lsa.with_age(lsa.age + (now - at) // S)

    def header(self, key: LsaKey, now: int) -> LsaHeader | None:
        lsa = self.get(key, now)
        return None if lsa is None else lsa.header

    def headers(self, now: int) -> list[LsaHeader]:
        return [self.get(k, now).header for k in self.keys()]

    def lsas(self, now: int) -> list[Lsa]:
        return [self.get(k, now) for k in self.keys()]

    def stored(self) -> dict[LsaKey, Lsa]:
        """Entries as installed, without age advancement."""
        return {k: lsa for k, (lsa, _) in self._db.items()}

    def install(self, lsa: Lsa, now: int) -> None:
        self._db[lsa.key] = (lsa, now)

    def remove(self, key: LsaKey) -> None:
        self._db.pop(key, None)

    def snapshot(self) -> dict[LsaKey, tuple[int, object]]:
        """Age-free view used to compare databases across routers."""
        return {k: (lsa.seq, lsa.body) for k, (lsa, _) in self._db.items()}

    def next_max_age(self) -> int | None:
        """Virtual time at which the oldest entry reaches MaxAge."""
        best = None
        for lsa, at in self._db.values():
            t = at + (MAX_AGE - lsa.age) * S
            if best is None or t < best:
                best = t
        return best


# flooding actions, addressed by neighbor router_id

@dataclass(frozen=True)
class SendLsu:
    to: int
    lsa: Lsa


@dataclass(frozen=True)
class AddRetransmit:
    to: int
    lsa: Lsa


@dataclass(frozen=True)
class SendAck:
    to: int
    header: LsaHeader


@dataclass(frozen=True)
class ImpliedAck:
    to: int
    header: LsaHeader


@dataclass(frozen=True)
class RunSpf:
    pass


@dataclass(frozen=True)
class LsdbChanged:
    key: LsaKey
    seq: int


FloodAction = Union[SendLsu, AddRetransmit, SendAck, ImpliedAck, RunSpf, LsdbChanged]


def install_and_flood(db: Lsdb, lsa: Lsa, from_nbr: int | None, adjacencies: Iterable[int],
                      now: int = 0, *, delegate_acks: bool = False) -> list[FloodAction]:
    """Receive ``lsa`` from neighbor ``from_nbr`` (``None`` = self-originated).

    Newer instances are installed and flooded on every adjacency except the
    one they came from. A copy equal to the stored one is only acknowledged.
    An older copy is answered with the stored instance.
    """
    stored = db.get(lsa.key, now)
    acts: list[FloodAction] = []
    ack = from_nbr is not None and not delegate_acks

    if stored is not None:
        order = lsdb_compare(lsa.header, stored.header)
        if order is Order.SAME:
            if from_nbr is not None:
                acts.append(ImpliedAck(from_nbr, lsa.header))
            if ack:
                acts.append(SendAck(from_nbr, lsa.header))
            return acts
        if order is Order.B_NEWER:
            if from_nbr is not None:
                acts.append(SendLsu(from_nbr, stored))
            return acts
    elif lsa.age >= MAX_AGE:
        # flushing something we never had: acknowledge and forget
        return [SendAck(from_nbr, lsa.header)] if ack else []

    changed = stored is None or stored.body != lsa.body or lsa.age >= MAX_AGE
    if lsa.age >= MAX_AGE:
        db.remove(lsa.key)
    else:
        db.install(lsa, now)
    acts.append(LsdbChanged(lsa.key, lsa.seq))
    for nbr in adjacencies:
        if nbr == from_nbr:
            continue
        acts.append(SendLsu(nbr, lsa))
        if not delegate_acks:
            acts.append(AddRetransmit(nbr, lsa))
    if ack:
        acts.append(SendAck(from_nbr, lsa.header))
    if changed:
        acts.append(RunSpf())
    return acts
