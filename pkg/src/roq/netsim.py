"""Deterministic discrete-event network fabric.

Virtual time is an integer number of microseconds. Events run in
``(at, seq)`` order where ``seq`` is a global insertion counter, so two
simulations built the same way with the same seed execute identically.

Links are point-to-point, symmetric, with a fixed one-way delay and
i.i.d. Bernoulli loss. Each link owns its own generator derived from the
simulation seed and the link endpoints, so adding traffic on one link does
not perturb loss decisions on another.
"""

from __future__ import annotations

import csv
import hashlib
import heapq
import io
import logging
import random
from dataclasses import dataclass, field
from typing import Any, Callable

log = logging.getLogger(__name__)

US = 1
MS = 1_000
S = 1_000_000

DEFAULT_MTU = 1500


class NetsimError(Exception):
    pass


class DuplicateNode(NetsimError):
    pass


class DuplicateLink(NetsimError):
    pass


class UnknownEndpoint(NetsimError):
    pass


class InvalidLink(NetsimError):
    pass


class MtuExceeded(NetsimError):
    pass


class PastDeadline(NetsimError):
    pass


class NoRoute(NetsimError):
    pass


def link_rng(seed: int, a: str, b: str) -> random.Random:
    """Per-link Mersenne Twister seeded from a SHA-256 of (seed, endpoints)."""
    lo, hi = sorted((a, b))
    digest = hashlib.sha256(f"{seed}|{lo}|{hi}".encode()).digest()
    return random.Random(int.from_bytes(digest[:8], "big"))


@dataclass
class LinkSpec:
    a: str
    b: str
    one_way_delay_ms: float
    loss_rate: float = 0.0
    mtu: int = DEFAULT_MTU

    def validate(self) -> None:
        if self.a == self.b:
            raise InvalidLink("link endpoints must differ")
        if not self.one_way_delay_ms > 0:
            raise InvalidLink("one_way_delay must be positive")
        if not 0.0 <= self.loss_rate <= 1.0:
            raise InvalidLink("loss_rate must be within [0, 1]")
        if self.mtu <= 0:
            raise InvalidLink("mtu must be positive")

    @property
    def delay_us(self) -> int:
        return round(self.one_way_delay_ms * MS)


class Link:
    def __init__(self, spec: LinkSpec, rng: random.Random):
        self.spec = spec
        self.rng = rng
        self.delay = spec.delay_us
        self.sent = 0
        self.dropped = 0

    @property
    def endpoints(self) -> tuple[str, str]:
        return (self.spec.a, self.spec.b)

    def other(self, node_id: str) -> str:
        if node_id == self.spec.a:
            return self.spec.b
        if node_id == self.spec.b:
            return self.spec.a
        raise UnknownEndpoint(node_id)

    def set_loss(self, rate: float) -> None:
        if not 0.0 <= rate <= 1.0:
            raise InvalidLink("loss_rate must be within [0, 1]")
        self.spec.loss_rate = rate

    def __repr__(self) -> str:
        return f"Link({self.spec.a}<->{self.spec.b}, {self.spec.one_way_delay_ms}ms)"


class Node:
    """A simulated host. Protocols register a handler per demux key."""

    def __init__(self, sim: "Simulator", node_id: str):
        self.sim = sim
        self.id = node_id
        self.links: dict[str, Link] = {}
        self.handlers: dict[str, Callable[[str, bytes, Link], None]] = {}

    def register(self, proto: str, handler: Callable[[str, bytes, Link], None]) -> None:
        self.handlers[proto] = handler

    def deliver(self, src: str, proto: str, payload: bytes, link: Link) -> None:
        handler = self.handlers.get(proto)
        if handler is None:
            log.debug("%s: no handler for %s, dropping", self.id, proto)
            return
        handler(src, payload, link)

    def __repr__(self) -> str:
        return f"Node({self.id})"


class Timer:
    __slots__ = ("at", "fn", "args", "cancelled", "fired")

    def __init__(self, at: int, fn: Callable, args: tuple):
        self.at = at
        self.fn = fn
        self.args = args
        self.cancelled = False
        self.fired = False

    def cancel(self) -> None:
        self.cancelled = True


@dataclass(frozen=True)
class Record:
    t_us: int
    node: str
    category: str
    key: str
    value: Any


@dataclass
class RunResult:
    time: int
    reason: str  # "predicate" | "QueueExhausted" | "TimeCap"
    events: int = 0


@dataclass
class Instrumentation:
    records: list[Record] = field(default_factory=list)

    def add(self, t_us: int, node: str, category: str, key: str, value: Any = "") -> None:
        self.records.append(Record(t_us, node, category, key, value))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t_us", "node", "category", "key", "value"])
        for r in self.records:
            w.writerow([r.t_us, r.node, r.category, r.key, r.value])
        return buf.getvalue()


class Simulator:
    def __init__(self, seed: int = 0):
        self.seed = seed
        self.now = 0
        self._queue: list[tuple[int, int, Timer]] = []
        self._seq = 0
        self.nodes: dict[str, Node] = {}
        self.links: dict[frozenset, Link] = {}
        self.instrument = Instrumentation()
        # called as tap(t, src, dst, proto, payload, delivered)
        self.taps: list[Callable[[int, str, str, str, bytes, bool], None]] = []
        self.events_run = 0

    # -- topology ---------------------------------------------------------

    def add_node(self, node_id: str) -> Node:
        if node_id in self.nodes:
            raise DuplicateNode(node_id)
        node = Node(self, node_id)
        self.nodes[node_id] = node
        return node

    def add_link(self, spec: LinkSpec) -> Link:
        spec.validate()
        for end in (spec.a, spec.b):
            if end not in self.nodes:
                raise UnknownEndpoint(end)
        key = frozenset((spec.a, spec.b))
        if key in self.links:
            raise DuplicateLink(f"{spec.a}<->{spec.b}")
        link = Link(spec, link_rng(self.seed, spec.a, spec.b))
        self.links[key] = link
        self.nodes[spec.a].links[spec.b] = link
        self.nodes[spec.b].links[spec.a] = link
        return link

    def link_between(self, a: str, b: str) -> Link:
        try:
            return self.links[frozenset((a, b))]
        except KeyError:
            raise NoRoute(f"no link between {a} and {b}") from None

    # -- datagrams --------------------------------------------------------

    def send_datagram(self, src: str, link: Link, payload: bytes, proto: str = "raw") -> None:
        if len(payload) > link.spec.mtu:
            log.debug("%s: %d-byte datagram exceeds mtu %d", src, len(payload), link.spec.mtu)
            raise MtuExceeded(f"{len(payload)} > {link.spec.mtu}")
        dst = link.other(src)
        link.sent += 1
        loss = link.spec.loss_rate
        delivered = not (loss > 0.0 and link.rng.random() < loss)
        for tap in self.taps:
            tap(self.now, src, dst, proto, payload, delivered)
        if not delivered:
            link.dropped += 1
            return
        self._push(self.now + link.delay, self.nodes[dst].deliver, (src, proto, payload, link))

    # -- timers -----------------------------------------------------------

    def set_timer(self, at: int, fn: Callable, *args) -> Timer:
        if at < self.now:
            raise PastDeadline(f"{at} < now {self.now}")
        return self._push(at, fn, args)

    def call_later(self, delay: int, fn: Callable, *args) -> Timer:
        return self.set_timer(self.now + delay, fn, *args)

    def call_soon(self, fn: Callable, *args) -> Timer:
        return self._push(self.now, fn, args)

    @staticmethod
    def cancel_timer(timer: Timer | None) -> None:
        if timer is not None:
            timer.cancelled = True

    def _push(self, at: int, fn: Callable, args: tuple) -> Timer:
        t = Timer(at, fn, args)
        self._seq += 1
        heapq.heappush(self._queue, (at, self._seq, t))
        return t

    def pending(self) -> int:
        return sum(1 for _, _, t in self._queue if not t.cancelled)

    # -- execution --------------------------------------------------------

    def step(self) -> bool:
        while self._queue:
            at, _, t = heapq.heappop(self._queue)
            if t.cancelled:
                continue
            self.now = at
            t.fired = True
            self.events_run += 1
            t.fn(*t.args)
            return True
        return False

    def run_until(
        self,
        pred: Callable[[], bool] | None = None,
        time_cap: int | None = None,
    ) -> RunResult:
        """Run events until ``pred()`` holds, the queue empties or ``time_cap``.

        ``pred`` is checked before the first event and after every event.
        """
        start_events = self.events_run
        if pred is not None and pred():
            return RunResult(self.now, "predicate", 0)
        q = self._queue
        while True:
            while q and q[0][2].cancelled:
                heapq.heappop(q)
            if not q:
                return RunResult(self.now, "QueueExhausted", self.events_run - start_events)
            if time_cap is not None and q[0][0] > time_cap:
                self.now = max(self.now, time_cap)
                return RunResult(self.now, "TimeCap", self.events_run - start_events)
            self.step()
            if pred is not None and pred():
                return RunResult(self.now, "predicate", self.events_run - start_events)

    def run_for(self, duration: int) -> RunResult:
        return self.run_until(None, self.now + duration)
