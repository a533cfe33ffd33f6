"""BGP session finite state machine as a pure transition function.

``fsm_step(state, event, now)`` returns the next ``SessionState`` and the
list of actions the session driver must carry out. Nothing here touches
the transport or the clock.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace
from typing import Union

from ..netsim import S
from ..transport import TransportKind
from .messages import Open, Update

DEFAULT_HOLD_TIME = 90
OPEN_SENT_HOLD = 240
BGP_PORT = 179


class State(enum.Enum):
    IDLE = "Idle"
    CONNECT = "Connect"
    ACTIVE = "Active"
    OPEN_SENT = "OpenSent"
    OPEN_CONFIRM = "OpenConfirm"
    ESTABLISHED = "Established"


TIMED_STATES = {State.OPEN_SENT, State.OPEN_CONFIRM, State.ESTABLISHED}


@dataclass(frozen=True)
class SessionConfig:
    local_node: str
    peer_node: str
    local_as: int
    peer_as: int
    local_id: int
    peer_id: int
    kind: TransportKind = TransportKind.PLAIN_STREAM
    hold_time: int = DEFAULT_HOLD_TIME
    port: int = BGP_PORT

    @property
    def dialer(self) -> bool:
        """The speaker with the numerically lower BGP identifier dials."""
        return self.local_id < self.peer_id


@dataclass(frozen=True)
class SessionState:
    config: SessionConfig
    state: State = State.IDLE
    hold_time: int = 0
    keepalive_time: int = 0
    hold_timer_deadline: int | None = None


# events

@dataclass(frozen=True)
class ManualStart:
    pass


@dataclass(frozen=True)
class TransportEstablished:
    pass


@dataclass(frozen=True)
class TransportFailed:
    pass


@dataclass(frozen=True)
class OpenReceived:
    msg: Open


@dataclass(frozen=True)
class KeepaliveReceived:
    pass


@dataclass(frozen=True)
class UpdateReceived:
    msg: Update


@dataclass(frozen=True)
class NotificationReceived:
    code: int = 0
    subcode: int = 0


@dataclass(frozen=True)
class DecodeError:
    code: int
    subcode: int


@dataclass(frozen=True)
class HoldTimerExpired:
    pass


@dataclass(frozen=True)
class KeepaliveTimerExpired:
    pass


Event = Union[ManualStart, TransportEstablished, TransportFailed, OpenReceived,
              KeepaliveReceived, UpdateReceived, NotificationReceived, DecodeError,
              HoldTimerExpired, KeepaliveTimerExpired]


# actions

@dataclass(frozen=True)
class DialTransport:
    pass


@dataclass(frozen=True)
class SendOpen:
    pass


@dataclass(frozen=True)
class SendKeepalive:
    pass


@dataclass(frozen=True)
class SendNotification:
    code: int
    subcode: int


@dataclass(frozen=True)
class ProcessUpdate:
    msg: Update


@dataclass(frozen=True)
class CloseTransport:
    pass


@dataclass(frozen=True)
class SetHoldTimer:
    seconds: int


@dataclass(frozen=True)
class SetKeepaliveTimer:
    seconds: int


Action = Union[DialTransport, SendOpen, SendKeepalive, SendNotification, ProcessUpdate,
               CloseTransport, SetHoldTimer, SetKeepaliveTimer]

# FSM error subcodes (RFC 6608)
_UNEXPECTED = {State.OPEN_SENT: 1, State.OPEN_CONFIRM: 2, State.ESTABLISHED: 3}


def keepalive_interval(hold_time: int) -> int:
    return max(1, hold_time // 3) if hold_time > 0 else 0


def _idle(s: SessionState) -> SessionState:
    return replace(s, state=State.IDLE, hold_time=0, keepalive_time=0, hold_timer_deadline=None)


def _violation(s: SessionState) -> tuple[SessionState, list[Action]]:
    return _idle(s), [SendNotification(5, _UNEXPECTED.get(s.state, 0)), CloseTransport()]


def _refresh_hold(s: SessionState, now: int) -> tuple[SessionState, list[Action]]:
    if s.hold_time <= 0:
        return s, []
    return replace(s, hold_timer_deadline=now + s.hold_time * S), [SetHoldTimer(s.hold_time)]


def _check_open(s: SessionState, m: Open) -> SendNotification | None:
    cfg = s.config
    if m.version != 4:
        return SendNotification(2, 1)
    if m.my_as != cfg.peer_as:
        return SendNotification(2, 2)
    if m.bgp_id == 0 or m.bgp_id == cfg.local_id:
        return SendNotification(2, 3)
    if m.hold_time in (1, 2):
        return SendNotification(2, 6)
    return None


def fsm_step(s: SessionState, e: Event, now: int = 0) -> tuple[SessionState, list[Action]]:
    """Apply one event; ``now`` (µs) is only used to stamp hold-timer deadlines."""
    st = s.state

    if st is State.IDLE:
        if isinstance(e, ManualStart):
            if s.config.dialer:
                return replace(s, state=State.CONNECT), [DialTransport()]
            return replace(s, state=State.ACTIVE), []
        return s, []

    if isinstance(e, ManualStart):
        return s, []
    if isinstance(e, (TransportFailed, NotificationReceived)):
        return _idle(s), [CloseTransport()]
    if isinstance(e, DecodeError):
        return _idle(s), [SendNotification(e.code, e.subcode), CloseTransport()]

    if st in (State.CONNECT, State.ACTIVE):
        if isinstance(e, TransportEstablished):
            hold = OPEN_SENT_HOLD if s.config.hold_time > 0 else 0
            deadline = now + hold * S if hold else None
            acts: list[Action] = [SendOpen()]
            if hold:
                acts.append(SetHoldTimer(hold))
            return replace(s, state=State.OPEN_SENT, hold_timer_deadline=deadline), acts
        if isinstance(e, (HoldTimerExpired, KeepaliveTimerExpired)):
            return s, []
        return _idle(s), [SendNotification(5, 0), CloseTransport()]

    if isinstance(e, HoldTimerExpired):
        return _idle(s), [SendNotification(4, 0), CloseTransport()]
    if isinstance(e, TransportEstablished):
        return s, []

    if st is State.OPEN_SENT:
        if isinstance(e, OpenReceived):
            bad = _check_open(s, e.msg)
            if bad is not None:
                return _idle(s), [bad, CloseTransport()]
            hold = min(s.config.hold_time, e.msg.hold_time)
            ka = keepalive_interval(hold)
            nxt = replace(s, state=State.OPEN_CONFIRM, hold_time=hold, keepalive_time=ka,
                          hold_timer_deadline=now + hold * S if hold else None)
            acts = [SendKeepalive()]
            if hold:
                acts += [SetHoldTimer(hold), SetKeepaliveTimer(ka)]
            return nxt, acts
        if isinstance(e, KeepaliveTimerExpired):
            return s, []
        return _violation(s)

    if st is State.OPEN_CONFIRM:
        if isinstance(e, KeepaliveReceived):
            nxt, acts = _refresh_hold(replace(s, state=State.ESTABLISHED), now)
            return nxt, acts
        if isinstance(e, KeepaliveTimerExpired):
            return s, [SendKeepalive(), SetKeepaliveTimer(s.keepalive_time)]
        return _violation(s)

    # Established
    if isinstance(e, KeepaliveReceived):
        return _refresh_hold(s, now)
    if isinstance(e, UpdateReceived):
        nxt, acts = _refresh_hold(s, now)
        return nxt, [ProcessUpdate(e.msg)] + acts
    if isinstance(e, KeepaliveTimerExpired):
        return s, [SendKeepalive(), SetKeepaliveTimer(s.keepalive_time)]
    return _violation(s)
