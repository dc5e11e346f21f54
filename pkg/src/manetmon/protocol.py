"""Per-node monitoring automaton.

``step(ctx, event, now)`` is a pure transition function: it never mutates
``ctx``, reads no clock and returns the successor context together with
the effects the host must carry out (sends, timer changes, verdicts,
errors). ``now`` is the host's simulated time in milliseconds and is only
used to keep timer deadlines consistent across restarts.

States follow the query phase (Q1 waiting for a first child, Q2 collecting
children) and the aggregate phase (A1 sent upward, A2 routed to the
parent, A3 forwarding to relay-set ancestors).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace
from typing import Union

from . import vht
from .aggregation import (NEUTRAL, AggregationError, MonitorFunction, PartialAggregate,
                          finalize, local_observe, merge)
from .wire import AggregatePayload, Message, MessageType, QueryPayload

__all__ = [
    "State", "Via", "NodeCtx", "new_node",
    "StartMonitoring", "Received", "TimerFired", "Event",
    "SendBroadcast", "SendUnicast", "SendRouted", "SetTimer", "CancelTimer",
    "Verdict", "Error", "Effect",
    "ProtocolError", "StartRejected",
    "step", "ALLOWED_TRANSITIONS", "check_ctx",
    "DEFAULT_TIMEOUT_MS", "COLLECT_WINDOW_FACTOR",
]

DEFAULT_TIMEOUT_MS = 500
# Q2 waits this many timeouts after the last child ack: long enough for a
# leaf child's whole escalation ladder (Q1 + A1 + A2 + two A3 retries).
COLLECT_WINDOW_FACTOR = 6

UNREACHABLE = "node unreachable: out of network range or major outage"
NO_RELAYS = "no relay candidates"


class State(str, enum.Enum):
    INITIAL = "Initial"
    Q1 = "Q1"
    Q2 = "Q2"
    A1 = "A1"
    A2 = "A2"
    A3 = "A3"


class Via(str, enum.Enum):
    BROADCAST = "broadcast"
    UNICAST = "unicast"
    ROUTED = "routed"


S = State
ALLOWED_TRANSITIONS = frozenset({
    (S.INITIAL, S.Q1),
    (S.Q1, S.Q2), (S.Q1, S.A1), (S.Q2, S.A1),
    (S.Q1, S.INITIAL), (S.Q2, S.INITIAL),  # root verdict
    (S.A1, S.A2), (S.A2, S.A3),
    (S.A1, S.INITIAL), (S.A2, S.INITIAL), (S.A3, S.INITIAL),
})


# -- events ---------------------------------------------------------------

@dataclass(frozen=True)
class StartMonitoring:
    function: MonitorFunction
    timeout_ms: int = DEFAULT_TIMEOUT_MS


@dataclass(frozen=True)
class Received:
    msg: Message
    via: Via = Via.BROADCAST


@dataclass(frozen=True)
class TimerFired:
    pass


Event = Union[StartMonitoring, Received, TimerFired]


# -- effects --------------------------------------------------------------

@dataclass(frozen=True)
class SendBroadcast:
    msg: Message


@dataclass(frozen=True)
class SendUnicast:
    dest: str
    msg: Message


@dataclass(frozen=True)
class SendRouted:
    dest: str
    msg: Message


@dataclass(frozen=True)
class SetTimer:
    ms: float


@dataclass(frozen=True)
class CancelTimer:
    pass


@dataclass(frozen=True)
class Verdict:
    value: float
    observations: int


@dataclass(frozen=True)
class Error:
    reason: str


Effect = Union[SendBroadcast, SendUnicast, SendRouted, SetTimer, CancelTimer, Verdict, Error]
SEND_EFFECTS = (SendBroadcast, SendUnicast, SendRouted)


class ProtocolError(RuntimeError):
    pass


class StartRejected(ProtocolError):
    pass


# -- node context ---------------------------------------------------------

@dataclass(frozen=True)
class NodeCtx:
    self_addr: str
    is_root: bool = False
    observation: float = 0.0
    state: State = State.INITIAL
    parent: str | None = None
    own_relay_set: tuple[str, ...] = ()
    function: MonitorFunction | None = None
    timeout_ms: int = DEFAULT_TIMEOUT_MS
    acked_children: frozenset[str] = frozenset()
    merged_sources: frozenset[str] = frozenset()
    # acked children a grandchild report has shown to be gone
    presumed_offline: frozenset[str] = frozenset()
    unexpected_merged: bool = False
    partial: PartialAggregate = NEUTRAL
    forward_candidates: tuple[str, ...] = ()
    timer_active: bool = False
    deadline: float | None = None
    outgoing: Message | None = None
    # participated in the current round and finished; blocks re-adoption
    spent: bool = False

    @property
    def collect_window_ms(self) -> int:
        return COLLECT_WINDOW_FACTOR * self.timeout_ms


def new_node(addr: str, observation: float = 0.0, is_root: bool = False,
             timeout_ms: int = DEFAULT_TIMEOUT_MS) -> NodeCtx:
    return NodeCtx(self_addr=addr, is_root=is_root, observation=observation,
                   timeout_ms=timeout_ms)


def check_ctx(ctx: NodeCtx) -> list[str]:
    """Invariant violations of a single context (for property checks)."""
    out = []
    if ctx.is_root and ctx.parent is not None:
        out.append("root has a parent")
    if not ctx.is_root and ctx.state is not State.INITIAL and ctx.parent is None:
        out.append("non-root node active without a parent")
    if ctx.self_addr in ctx.acked_children:
        out.append("node acked itself")
    if ctx.parent is not None and ctx.parent in ctx.acked_children:
        out.append("parent among acked children")
    if ctx.state is State.A3 and not set(ctx.forward_candidates) <= set(ctx.own_relay_set):
        out.append("forward candidates outside relay set")
    if ctx.state is State.INITIAL and ctx.timer_active:
        out.append("timer active in Initial")
    if ctx.state is not State.INITIAL and not ctx.timer_active:
        out.append(f"no timer active in {ctx.state.value}")
    if len(ctx.own_relay_set) > 3:
        out.append("relay set longer than 3")
    return out


# -- helpers --------------------------------------------------------------

def _timer(ctx: NodeCtx, now: float, ms: float) -> tuple[NodeCtx, SetTimer]:
    return replace(ctx, timer_active=True, deadline=now + ms), SetTimer(ms)


def _extend(ctx: NodeCtx, now: float, ms: float) -> tuple[NodeCtx, SetTimer]:
    """Restart the timer without shortening the current deadline."""
    target = now + ms
    if ctx.timer_active and ctx.deadline is not None and ctx.deadline > target:
        target = ctx.deadline
    return replace(ctx, timer_active=True, deadline=target), SetTimer(target - now)


def _stopped(ctx: NodeCtx, **changes) -> NodeCtx:
    return replace(ctx, state=State.INITIAL, timer_active=False, deadline=None,
                   forward_candidates=(), spent=True, **changes)


def _header_parent(ctx: NodeCtx) -> str:
    return ctx.self_addr if ctx.is_root else ctx.parent


def _ack_for(ctx: NodeCtx, msg: Message) -> SendRouted:
    a = msg.aggregate
    ack = Message(MessageType.AGGREGATE_ACK, _header_parent(ctx) or ctx.self_addr,
                  ctx.self_addr, ctx.timeout_ms,
                  aggregate=AggregatePayload(a.outcome, msg.source, a.observations))
    return SendRouted(msg.source, ack)


def _complete(ctx: NodeCtx, now: float) -> tuple[NodeCtx, tuple[Effect, ...]]:
    """Report the collected result: upward for a node, as a verdict at the root."""
    p = ctx.partial
    if ctx.is_root:
        value = finalize(p, ctx.function)
        final = Message(MessageType.AGGREGATE, ctx.self_addr, ctx.self_addr, ctx.timeout_ms,
                        aggregate=AggregatePayload(value, ctx.self_addr, p.observations))
        return _stopped(ctx), (Verdict(value, p.observations), SendBroadcast(final), CancelTimer())
    msg = Message(MessageType.AGGREGATE, ctx.parent, ctx.self_addr, ctx.timeout_ms,
                  aggregate=AggregatePayload(p.value, ctx.parent, p.observations))
    ctx, timer = _timer(replace(ctx, state=State.A1, outgoing=msg), now, ctx.timeout_ms)
    return ctx, (SendBroadcast(msg), timer)


def _forward_next(ctx: NodeCtx, now: float) -> tuple[NodeCtx, tuple[Effect, ...]]:
    if not ctx.forward_candidates:
        reason = UNREACHABLE if ctx.state is State.A3 else NO_RELAYS
        return _stopped(ctx), (Error(reason),)
    relay, rest = ctx.forward_candidates[0], ctx.forward_candidates[1:]
    base = ctx.outgoing
    a = base.aggregate
    fwd = Message(MessageType.AGGREGATE_FORWARD, base.parent, base.source, base.timeout,
                  aggregate=AggregatePayload(a.outcome, relay, a.observations))
    ctx, timer = _timer(replace(ctx, state=State.A3, forward_candidates=rest), now,
                        ctx.timeout_ms)
    return ctx, (SendRouted(relay, fwd), timer)


# -- handlers -------------------------------------------------------------

def _on_start(ctx: NodeCtx, ev: StartMonitoring, now: float):
    if not ctx.is_root:
        raise StartRejected(f"{ctx.self_addr} is not the root")
    if ctx.state is not State.INITIAL:
        raise StartRejected(f"{ctx.self_addr} is already monitoring ({ctx.state.value})")
    fresh = NodeCtx(self_addr=ctx.self_addr, is_root=True, observation=ctx.observation,
                    state=State.Q1, function=ev.function, timeout_ms=ev.timeout_ms,
                    partial=local_observe(ctx.observation, ev.function))
    query = Message(MessageType.QUERY, ctx.self_addr, ctx.self_addr, ev.timeout_ms,
                    query=QueryPayload(str(ev.function), ()))
    fresh, timer = _timer(fresh, now, ev.timeout_ms)
    return fresh, (SendBroadcast(query), timer)


def _on_query(ctx: NodeCtx, msg: Message, now: float):
    if ctx.state is State.INITIAL:
        if ctx.is_root or ctx.spent:
            return ctx, ()
        try:
            function = MonitorFunction.parse(msg.query.function)
        except AggregationError:
            return ctx, ()
        adopted = replace(ctx, state=State.Q1, parent=msg.source,
                          own_relay_set=tuple(msg.query.relay_set), function=function,
                          timeout_ms=msg.timeout,
                          partial=local_observe(ctx.observation, function))
        relays = vht.advertise_relay_set(adopted)
        query = Message(MessageType.QUERY, adopted.parent, ctx.self_addr, msg.timeout,
                        query=QueryPayload(msg.query.function, relays))
        adopted, timer = _timer(adopted, now, adopted.timeout_ms)
        return adopted, (SendBroadcast(query), timer)

    # a child's rebroadcast naming us as its parent is that child's QueryACK
    if (ctx.state in (State.Q1, State.Q2) and msg.parent == ctx.self_addr
            and msg.source != ctx.self_addr and msg.source != ctx.parent):
        ctx = replace(ctx, state=State.Q2, acked_children=ctx.acked_children | {msg.source})
        ctx, timer = _extend(ctx, now, ctx.collect_window_ms)
        return ctx, (timer,)
    return ctx, ()


def _is_ack(ctx: NodeCtx, msg: Message, via: Via) -> bool:
    if msg.type is MessageType.AGGREGATE_ACK:
        return msg.aggregate.destination == ctx.self_addr
    return (msg.type is MessageType.AGGREGATE and via is Via.BROADCAST
            and msg.source == ctx.parent)


def _on_aggregate(ctx: NodeCtx, msg: Message, via: Via, now: float):
    if ctx.state in (State.A1, State.A2, State.A3) and _is_ack(ctx, msg, via):
        return _stopped(ctx), (CancelTimer(),)
    a = msg.aggregate
    if msg.type is MessageType.AGGREGATE_ACK or a.destination != ctx.self_addr:
        return ctx, ()
    if msg.source in ctx.merged_sources:
        # already folded in; re-acknowledge so a re-sending child can stop
        return ctx, ((_ack_for(ctx, msg),) if via is Via.ROUTED else ())
    if ctx.state not in (State.Q1, State.Q2) or msg.source == ctx.self_addr:
        return ctx, ()

    effects: list[Effect] = []
    if via is Via.ROUTED:
        effects.append(_ack_for(ctx, msg))
    unexpected = msg.source not in ctx.acked_children
    presumed = ctx.presumed_offline
    if unexpected and msg.parent in ctx.acked_children and msg.parent not in ctx.merged_sources:
        presumed = presumed | {msg.parent}
    ctx = replace(ctx, state=State.Q2,
                  partial=merge(ctx.partial, PartialAggregate(a.outcome, a.observations),
                                ctx.function),
                  merged_sources=ctx.merged_sources | {msg.source},
                  presumed_offline=presumed,
                  unexpected_merged=ctx.unexpected_merged or unexpected)
    satisfied = ctx.acked_children <= (ctx.merged_sources | ctx.presumed_offline)
    if satisfied and not ctx.unexpected_merged:
        ctx, more = _complete(ctx, now)
        return ctx, (*effects, *more)
    if satisfied:
        # grandchild data seen: give further stragglers one timeout
        ctx, timer = _timer(ctx, now, ctx.timeout_ms)
    else:
        ctx, timer = _extend(ctx, now, ctx.timeout_ms)
    return ctx, (*effects, timer)


def _on_timer(ctx: NodeCtx, now: float):
    if not ctx.timer_active or ctx.state is State.INITIAL:
        return ctx, ()
    ctx = replace(ctx, timer_active=False, deadline=None)
    st = ctx.state
    if st is State.Q1:
        if ctx.is_root:
            value = finalize(ctx.partial, ctx.function)
            return _stopped(ctx), (Verdict(value, ctx.partial.observations), CancelTimer())
        return _complete(ctx, now)
    if st is State.Q2:
        return _complete(ctx, now)
    if st is State.A1:
        route = ctx.outgoing.with_type(MessageType.AGGREGATE_ROUTE)
        ctx, timer = _timer(replace(ctx, state=State.A2), now, ctx.timeout_ms)
        return ctx, (SendRouted(ctx.parent, route), timer)
    if st is State.A2:
        return _forward_next(replace(ctx, forward_candidates=ctx.own_relay_set), now)
    return _forward_next(ctx, now)


def step(ctx: NodeCtx, event: Event, now: float = 0.0) -> tuple[NodeCtx, tuple[Effect, ...]]:
    """Apply one event to a node. Raises ``StartRejected`` for a misplaced start."""
    if isinstance(event, Received):
        msg = event.msg
        if msg.type is MessageType.QUERY:
            return _on_query(ctx, msg, now)
        return _on_aggregate(ctx, msg, event.via, now)
    if isinstance(event, TimerFired):
        return _on_timer(ctx, now)
    if isinstance(event, StartMonitoring):
        return _on_start(ctx, event, now)
    raise TypeError(f"unknown event {event!r}")
