"""Route table input: a plain text reader and a seeded synthetic generator.

Text format, one route per line::

    <prefix> <as1> <as2> ...

``#`` starts a comment; blank lines are ignored.
"""

from __future__ import annotations

import ipaddress
import random
from pathlib import Path

from ..prefix import V4, V6
from ..prefix import BadPrefix as _BadPrefix
from ..prefix import Prefix

V4_SHARE = 0.85  # the 970k : 171k split of a full table
MAX_PATH_LEN = 5
MAX_GENERATED_ASN = 64495  # stay below the documentation and private ranges


class BadPrefix(_BadPrefix):
    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


class BadAsNumber(ValueError):
    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


class RouteList(list):
    """``(Prefix, as_path)`` pairs with per-family counts."""

    @property
    def counts(self) -> dict[int, int]:
        out = {V4: 0, V6: 0}
        for p, _ in self:
            out[p.family] += 1
        return out


def canonical_prefix(text: str) -> Prefix:
    """Parse a prefix, clearing host bits (``10.1.2.3/8`` becomes ``10.0.0.0/8``)."""
    if "/" not in text:
        raise _BadPrefix(f"missing prefix length in {text!r}")
    try:
        net = ipaddress.ip_network(text, strict=False)
    except ValueError as exc:
        raise _BadPrefix(str(exc)) from None
    return Prefix(net.version, net.network_address.packed, net.prefixlen)


def parse_rib(lines) -> RouteList:
    routes = RouteList()
    seen: set[Prefix] = set()
    for lineno, raw in enumerate(lines, 1):
        text = raw.split("#", 1)[0].strip()
        if not text:
            continue
        fields = text.split()
        try:
            prefix = canonical_prefix(fields[0])
        except _BadPrefix as exc:
            raise BadPrefix(lineno, str(exc)) from None
        path = []
        for tok in fields[1:]:
            if not tok.isdigit():
                raise BadAsNumber(lineno, f"{tok!r} is not an AS number")
            asn = int(tok)
            if not 1 <= asn <= 0xFFFFFFFF:
                raise BadAsNumber(lineno, f"AS {asn} out of range")
            path.append(asn)
        if prefix in seen:
            continue
        seen.add(prefix)
        routes.append((prefix, tuple(path)))
    return routes


def ingest_rib(path: str | Path) -> RouteList:
    with open(path, encoding="utf-8") as fh:
        return parse_rib(fh)


def _random_v4(rng: random.Random) -> Prefix:
    length = rng.randint(16, 24)
    first = rng.randint(1, 223)
    while first in (10, 127):
        first = rng.randint(1, 223)
    value = (first << 24) | rng.getrandbits(24)
    value &= ~((1 << (32 - length)) - 1) & 0xFFFFFFFF
    return Prefix(V4, value.to_bytes(4, "big"), length)


def _random_v6(rng: random.Random) -> Prefix:
    length = rng.randint(32, 48)
    value = (0x2 << 125) | (rng.getrandbits(125))  # 2000::/3
    value &= ~((1 << (128 - length)) - 1) & ((1 << 128) - 1)
    return Prefix(V6, value.to_bytes(16, "big"), length)


def generate_rib(count: int, seed: int = 0) -> RouteList:
    """``count`` unique synthetic routes, 85% IPv4, AS paths of 1 to 5 hops."""
    if count < 1:
        raise ValueError("count must be at least 1")
    rng = random.Random(seed)
    n4 = round(count * V4_SHARE)
    families = [V4] * n4 + [V6] * (count - n4)
    rng.shuffle(families)
    seen: set[Prefix] = set()
    routes = RouteList()
    for fam in families:
        make = _random_v4 if fam == V4 else _random_v6
        p = make(rng)
        while p in seen:
            p = make(rng)
        seen.add(p)
        path = tuple(rng.randint(1, MAX_GENERATED_ASN) for _ in range(rng.randint(1, MAX_PATH_LEN)))
        routes.append((p, path))
    return routes


def write_rib(routes, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for prefix, as_path in routes:
            fh.write(" ".join([str(prefix), *map(str, as_path)]) + "\n")
