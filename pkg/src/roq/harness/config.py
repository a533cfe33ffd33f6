"""Experiment configuration files (TOML) and their validation.

A config looks like::

    protocol = "bgp"          # bgp | ospf
    transport = "quic"        # tcp-like | quic
    seed = 42
    time_cap = 300            # virtual seconds
    out = "results/run"

    [rib]                     # bgp only: exactly one of path / generate
    generate = 10000

    [ospf]                    # ospf only
    mode = "paper-fidelity"   # paper-fidelity | delegate-acks
    inject_prefix = "203.0.113.0/24"

    [[nodes]]
    name = "R1"
    asn = 64501
    role = "monitor"          # injector | monitor | peer (bgp); router (ospf)

    [[links]]
    a = "INJ"
    b = "R1"
    one_way_delay_ms = 10
    loss_rate = 0.0

Every problem found is collected; ``load_config`` raises a single
``ConfigErrors`` listing all of them.
"""

from __future__ import annotations

import re
import sys
from dataclasses import dataclass, replace
from pathlib import Path

from ..netsim import DEFAULT_MTU, LinkSpec
from ..prefix import BadPrefix, Prefix

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

PROTOCOLS = ("bgp", "ospf")
TRANSPORTS = ("tcp-like", "quic")
OSPF_MODES = ("paper-fidelity", "delegate-acks")
BGP_ROLES = ("injector", "monitor", "peer")
DEFAULT_RATIO_BOUND = 2.0


class ConfigError(Exception):
    pass


class ParseError(ConfigError):
    def __init__(self, message: str, line: int | None = None):
        super().__init__(f"line {line}: {message}" if line else message)
        self.line = line


class UnknownField(ConfigError):
    def __init__(self, where: str):
        super().__init__(f"unknown field {where!r}")
        self.where = where


class InvalidValue(ConfigError):
    def __init__(self, where: str, message: str):
        super().__init__(f"{where}: {message}")
        self.where = where


class ConfigErrors(ConfigError):
    """All validation problems of one config file."""

    def __init__(self, errors: list[ConfigError]):
        super().__init__("; ".join(str(e) for e in errors))
        self.errors = errors


@dataclass(frozen=True)
class NodeConfig:
    name: str
    router_id: int
    asn: int | None = None
    role: str = "router"


@dataclass(frozen=True)
class LinkConfig:
    spec: LinkSpec
    cost: int = 1


@dataclass(frozen=True)
class RibConfig:
    path: Path | None = None
    generate: int | None = None


@dataclass(frozen=True)
class ExperimentConfig:
    protocol: str
    transport: str
    nodes: tuple[NodeConfig, ...]
    links: tuple[LinkConfig, ...]
    seed: int = 0
    time_cap: float = 300.0
    out: Path | None = None
    rib: RibConfig | None = None
    ospf_mode: str = "paper-fidelity"
    inject_prefix: Prefix | None = None
    ratio_bound: float = DEFAULT_RATIO_BOUND

    @property
    def delegate_acks(self) -> bool:
        return self.protocol == "ospf" and self.ospf_mode == "delegate-acks"

    def node(self, name: str) -> NodeConfig:
        for n in self.nodes:
            if n.name == name:
                return n
        raise KeyError(name)

    def with_overrides(self, **kw) -> "ExperimentConfig":
        return replace(self, **{k: v for k, v in kw.items() if v is not None})


_TOP = {"protocol", "transport", "seed", "time_cap", "out", "rib", "ospf", "bgp", "nodes", "links"}
_NODE = {"name", "asn", "router_id", "role"}
_LINK = {"a", "b", "one_way_delay_ms", "loss_rate", "mtu", "cost"}
_RIB = {"path", "generate"}
_OSPF = {"mode", "inject_prefix"}
_BGP = {"ratio_bound"}


class _Collector:
    def __init__(self) -> None:
        self.errors: list[ConfigError] = []

    def unknown(self, table: dict, allowed: set[str], where: str) -> None:
        for key in table:
            if key not in allowed:
                self.errors.append(UnknownField(f"{where}{key}"))

    def bad(self, where: str, message: str) -> None:
        self.errors.append(InvalidValue(where, message))

    def number(self, table: dict, key: str, where: str, default, *, integer: bool = False,
               lo: float | None = None, hi: float | None = None, lo_open: bool = False):
        if key not in table:
            return default
        v = table[key]
        ok_types = (int,) if integer else (int, float)
        if isinstance(v, bool) or not isinstance(v, ok_types):
            self.bad(where + key, f"expected {'an integer' if integer else 'a number'}, got {v!r}")
            return default
        if lo is not None and (v <= lo if lo_open else v < lo):
            self.bad(where + key, f"{v!r} is below the allowed range")
            return default
        if hi is not None and v > hi:
            self.bad(where + key, f"{v!r} is above the allowed range")
            return default
        return v

    def choice(self, table: dict, key: str, where: str, options, default=None, required=False):
        if key not in table:
            if required:
                self.bad(where + key, "missing")
            return default
        v = table[key]
        if v not in options:
            self.bad(where + key, f"{v!r} is not one of {', '.join(options)}")
            return default
        return v


def _parse_error(exc: Exception) -> ParseError:
    line = getattr(exc, "lineno", None)
    if line is None:
        m = re.search(r"line (\d+)", str(exc))
        line = int(m.group(1)) if m else None
    return ParseError(str(exc), line)


def parse_config(text: str, base: Path | None = None) -> ExperimentConfig:
    """Validate config ``text``; relative paths resolve against ``base``."""
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigErrors([_parse_error(exc)]) from None
    c = _Collector()
    c.unknown(raw, _TOP, "")

    protocol = c.choice(raw, "protocol", "", PROTOCOLS, required=True)
    transport = c.choice(raw, "transport", "", TRANSPORTS, default="tcp-like")
    seed = c.number(raw, "seed", "", 0, integer=True, lo=0, hi=2**64 - 1)
    time_cap = c.number(raw, "time_cap", "", 300.0, lo=0, lo_open=True)
    out = raw.get("out")
    if out is not None and not isinstance(out, str):
        c.bad("out", "expected a path string")
        out = None

    nodes: list[NodeConfig] = []
    names: set[str] = set()
    raw_nodes = raw.get("nodes", [])
    if not isinstance(raw_nodes, list) or not raw_nodes:
        c.bad("nodes", "at least one [[nodes]] entry is required")
        raw_nodes = []
    for i, n in enumerate(raw_nodes):
        where = f"nodes[{i}]."
        if not isinstance(n, dict):
            c.bad(where[:-1], "expected a table")
            continue
        c.unknown(n, _NODE, where)
        name = n.get("name")
        if not isinstance(name, str) or not name:
            c.bad(where + "name", "missing or not a string")
            continue
        if name in names:
            c.bad(where + "name", f"duplicate node {name!r}")
            continue
        names.add(name)
        rid = c.number(n, "router_id", where, i + 1, integer=True, lo=1, hi=2**32 - 1)
        asn = c.number(n, "asn", where, None, integer=True, lo=1, hi=2**32 - 1)
        roles = BGP_ROLES if protocol == "bgp" else ("router",)
        role = c.choice(n, "role", where, roles, default="router" if protocol != "bgp" else None,
                        required=protocol == "bgp")
        if protocol == "bgp" and asn is None and "asn" not in n:
            c.bad(where + "asn", "missing (required for bgp)")
        nodes.append(NodeConfig(name, rid, asn, role or "router"))
    ids = [n.router_id for n in nodes]
    if len(set(ids)) != len(ids):
        c.bad("nodes", "router_id values must be unique")

    links: list[LinkConfig] = []
    pairs: set[frozenset] = set()
    raw_links = raw.get("links", [])
    if not isinstance(raw_links, list):
        c.bad("links", "expected [[links]] entries")
        raw_links = []
    for i, ln in enumerate(raw_links):
        where = f"links[{i}]."
        if not isinstance(ln, dict):
            c.bad(where[:-1], "expected a table")
            continue
        c.unknown(ln, _LINK, where)
        a, b = ln.get("a"), ln.get("b")
        ok = True
        for key, v in (("a", a), ("b", b)):
            if v not in names:
                c.bad(where + key, f"unknown node {v!r}")
                ok = False
        if ok and a == b:
            c.bad(where + "b", "a link needs two different endpoints")
            ok = False
        if ok and frozenset((a, b)) in pairs:
            c.bad(where[:-1], f"duplicate link {a}-{b}")
            ok = False
        delay = c.number(ln, "one_way_delay_ms", where, 10, lo=0, lo_open=True)
        loss = c.number(ln, "loss_rate", where, 0.0, lo=0.0, hi=1.0)
        mtu = c.number(ln, "mtu", where, DEFAULT_MTU, integer=True, lo=1280, hi=65535)
        cost = c.number(ln, "cost", where, 1, integer=True, lo=1, hi=65535)
        if ok:
            pairs.add(frozenset((a, b)))
            links.append(LinkConfig(LinkSpec(a, b, delay, float(loss), mtu), cost))

    rib = None
    raw_rib = raw.get("rib")
    if raw_rib is not None:
        if not isinstance(raw_rib, dict):
            c.bad("rib", "expected a table")
        else:
            c.unknown(raw_rib, _RIB, "rib.")
            path, gen = raw_rib.get("path"), raw_rib.get("generate")
            if path is not None and gen is not None:
                c.bad("rib", "path and generate are mutually exclusive")
            elif path is None and gen is None:
                c.bad("rib", "one of path or generate is required")
            elif path is not None:
                if not isinstance(path, str):
                    c.bad("rib.path", "expected a path string")
                else:
                    p = Path(path)
                    if base is not None and not p.is_absolute():
                        p = base / p
                    rib = RibConfig(path=p)
            else:
                n = c.number(raw_rib, "generate", "rib.", None, integer=True, lo=1)
                if n is not None:
                    rib = RibConfig(generate=n)

    ospf_mode, inject = "paper-fidelity", None
    raw_ospf = raw.get("ospf")
    if raw_ospf is not None:
        if protocol != "ospf":
            c.bad("ospf", "only valid with protocol = \"ospf\"")
        elif not isinstance(raw_ospf, dict):
            c.bad("ospf", "expected a table")
        else:
            c.unknown(raw_ospf, _OSPF, "ospf.")
            ospf_mode = c.choice(raw_ospf, "mode", "ospf.", OSPF_MODES, default="paper-fidelity")
            if "inject_prefix" in raw_ospf:
                try:
                    inject = Prefix.parse(str(raw_ospf["inject_prefix"]))
                except BadPrefix as exc:
                    c.bad("ospf.inject_prefix", str(exc))

    ratio = DEFAULT_RATIO_BOUND
    raw_bgp = raw.get("bgp")
    if raw_bgp is not None:
        if protocol != "bgp":
            c.bad("bgp", "only valid with protocol = \"bgp\"")
        elif not isinstance(raw_bgp, dict):
            c.bad("bgp", "expected a table")
        else:
            c.unknown(raw_bgp, _BGP, "bgp.")
            ratio = c.number(raw_bgp, "ratio_bound", "bgp.", DEFAULT_RATIO_BOUND, lo=0, lo_open=True)

    if protocol == "bgp":
        _check_bgp_roles(c, nodes, links)
        if rib is None and raw_rib is None:
            c.bad("rib", "a [rib] table is required for bgp")
    elif protocol == "ospf":
        if raw_rib is not None:
            c.bad("rib", "only valid with protocol = \"bgp\"")
        if ospf_mode == "delegate-acks" and transport != "quic":
            c.bad("ospf.mode", "delegate-acks requires transport = \"quic\"")

    if c.errors:
        raise ConfigErrors(c.errors)
    out_path = None
    if out is not None:
        out_path = Path(out)
        if base is not None and not out_path.is_absolute():
            out_path = base / out_path
    return ExperimentConfig(protocol, transport, tuple(nodes), tuple(links), seed, float(time_cap),
                            out_path, rib, ospf_mode, inject, float(ratio))


def _check_bgp_roles(c: _Collector, nodes: list[NodeConfig], links: list[LinkConfig]) -> None:
    by_role: dict[str, list[str]] = {}
    for n in nodes:
        by_role.setdefault(n.role, []).append(n.name)
    ok = True
    for role, count in (("injector", 1), ("monitor", 1), ("peer", 2)):
        if len(by_role.get(role, [])) != count:
            c.bad("nodes", f"exactly {count} node(s) must have role = {role!r}")
            ok = False
    if not ok:
        return
    inj, mon = by_role["injector"][0], by_role["monitor"][0]
    linked = {frozenset((ln.spec.a, ln.spec.b)) for ln in links}
    if frozenset((inj, mon)) not in linked:
        c.bad("links", f"the injector {inj} must be linked to the monitor {mon}")
    for ln in links:
        if inj in (ln.spec.a, ln.spec.b) and mon not in (ln.spec.a, ln.spec.b):
            c.bad("links", "the injector may only peer with the monitor")
    for peer in by_role["peer"]:
        if frozenset((peer, mon)) not in linked:
            c.bad("links", f"peer {peer} must be linked to the monitor {mon}")


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigErrors([ParseError(f"cannot read {path}: {exc.strerror}")]) from None
    return parse_config(text, path.parent)


def shipped_config(name: str) -> Path:
    """Path of a config bundled with the package, e.g. ``bgp-triangle.conf``."""
    return Path(__file__).resolve().parent.parent / "configs" / name

