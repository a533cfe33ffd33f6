"""Backend-agnostic transport API (PlainStream / SecureMux)."""

from .security import (
    ALPN_BGP,
    ALPN_OSPF,
    AcceptAny,
    Certificate,
    Identity,
    PinnedFingerprints,
    SecurityConfig,
)
from .stack import (
    AddressInUse,
    CloseCause,
    CloseReason,
    Connection,
    ConnectionClosed,
    ConnState,
    EndpointAddress,
    EventKind,
    Listener,
    MissingSecurityConfig,
    NotEstablished,
    Stream,
    StreamClosed,
    StreamLimitExceeded,
    Transport,
    TransportError,
    TransportEvent,
    TransportKind,
)

__all__ = [
    "ALPN_BGP", "ALPN_OSPF", "AcceptAny", "Certificate", "Identity", "PinnedFingerprints",
    "SecurityConfig", "AddressInUse", "CloseCause", "CloseReason", "Connection",
    "ConnectionClosed", "ConnState", "EndpointAddress", "EventKind", "Listener",
    "MissingSecurityConfig", "NotEstablished", "Stream", "StreamClosed",
    "StreamLimitExceeded", "Transport", "TransportError", "TransportEvent", "TransportKind",
]
