"""Minimal BGP-4 speaker that runs unchanged over either transport backend."""

from .fsm import SessionConfig, SessionState, State, fsm_step
from .messages import (
    BadLength,
    BadMarker,
    BgpError,
    Keepalive,
    MalformedUpdate,
    MessageTooLarge,
    NeedMoreData,
    Notification,
    Open,
    Origin,
    PathAttrs,
    UnknownType,
    Update,
    decode_message,
    encode_message,
)
from .rib import Rib, RibEntry, decide, export, process_update
from .speaker import BgpSession, BgpSpeaker

__all__ = [
    "SessionConfig", "SessionState", "State", "fsm_step", "BadLength", "BadMarker", "BgpError",
    "Keepalive", "MalformedUpdate", "MessageTooLarge", "NeedMoreData", "Notification", "Open",
    "Origin", "PathAttrs", "UnknownType", "Update", "decode_message", "encode_message", "Rib",
    "RibEntry", "decide", "export", "process_update", "BgpSession", "BgpSpeaker",
]
