"""Simplified point-to-point OSPF with an optional secure-stream adjacency mode."""

from .lsdb import KeyMismatch, Lsdb, Order, install_and_flood, lsdb_compare
from .neighbor import Mode, NeighborState, NState, neighbor_fsm_step
from .packets import (
    DbDescription,
    ExternalBody,
    Hello,
    Lsa,
    LsaHeader,
    LsaKey,
    LsaType,
    LsAck,
    LsRequest,
    LsUpdate,
    RouterBody,
    Truncated,
    UnknownPacketType,
    decode_packet,
    decode_stream,
    encode_packet,
    frame,
)
from .router import OspfRouter, convergence_time, converged
from .spf import Route, spf_compute

__all__ = [
    "KeyMismatch", "Lsdb", "Order", "install_and_flood", "lsdb_compare", "Mode", "NeighborState",
    "NState", "neighbor_fsm_step", "DbDescription", "ExternalBody", "Hello", "Lsa", "LsaHeader",
    "LsaKey", "LsaType", "LsAck", "LsRequest", "LsUpdate", "RouterBody", "Truncated",
    "UnknownPacketType", "decode_packet", "decode_stream", "encode_packet", "frame", "OspfRouter",
    "convergence_time", "converged", "Route", "spf_compute",
]
