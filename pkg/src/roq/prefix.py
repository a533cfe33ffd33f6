"""IPv4/IPv6 prefixes in canonical form, shared by the BGP and OSPF code."""

from __future__ import annotations

import ipaddress
from typing import NamedTuple

V4 = 4
V6 = 6

_WIDTH = {V4: 4, V6: 16}


class BadPrefix(ValueError):
    pass


class Prefix(NamedTuple):
    """A network prefix. ``bits`` always has the host part zeroed."""

    family: int
    bits: bytes
    length: int

    @classmethod
    def make(cls, family: int, bits: bytes, length: int) -> "Prefix":
        width = _WIDTH.get(family)
        if width is None:
            raise BadPrefix(f"unknown address family {family!r}")
        if not 0 <= length <= width * 8:
            raise BadPrefix(f"prefix length {length} out of range for v{family}")
        if len(bits) != width:
            raise BadPrefix(f"expected {width} address bytes, got {len(bits)}")
        value = int.from_bytes(bits, "big")
        host_mask = (1 << (width * 8 - length)) - 1
        if value & host_mask:
            raise BadPrefix("host bits set beyond prefix length")
        return cls(family, bytes(bits), length)

    @classmethod
    def parse(cls, text: str) -> "Prefix":
        try:
            net = ipaddress.ip_network(text.strip(), strict=True)
        except ValueError as exc:
            raise BadPrefix(str(exc)) from None
        if "/" not in text:
            raise BadPrefix(f"missing prefix length in {text!r}")
        return cls(net.version, net.network_address.packed, net.prefixlen)

    @property
    def nbytes(self) -> int:
        """Number of significant address bytes on the wire."""
        return (self.length + 7) // 8

    def __str__(self) -> str:
        addr = ipaddress.ip_address(self.bits)
        return f"{addr}/{self.length}"
