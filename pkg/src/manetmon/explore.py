"""Exhaustive interleaving check of the automaton on small topologies.

Time is adversarial for timers: in every mode the explorer branches on
which armed timer fires next, so every relative timer ordering is covered,
including a parent giving up before its children report. Deliveries follow
a deterministic scheduler by default (send order, no link delay); the
``global``, ``fifo`` and ``any`` orders successively hand the adversary more
control over messages and are practical on fewer nodes. Messages are never
lost, but a message arriving after its receiver moved on is the same as a
lost one to the protocol. Routed sends arrive whenever the fixed topology
connects the two nodes.

Every reachable global state is visited once. On each transition the
node invariants of :func:`manetmon.protocol.check_ctx` and a set of
per-step properties are checked, terminal states must have every node in
``Initial``, and the state graph must be acyclic (so every run
terminates within a bounded number of events).

Deliveries that can never again change their receiver (see :func:`inert`)
are dropped from the pending set, which keeps the state space small
without hiding any reachable node state.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from . import protocol as P
from .aggregation import MonitorFunction
from .protocol import NodeCtx, State, Via
from .simulator.radio import routed_path
from .wire import MessageType

__all__ = ["ExploreResult", "explore", "inert", "check_all", "connected_graphs",
           "all_small_topologies", "ORDERS"]

_COUNT = MonitorFunction.parse("count(node)")
ORDERS = ("prompt", "global", "fifo", "any")


@dataclass
class ExploreResult:
    nodes: int
    edges: tuple[tuple[int, int], ...]
    root: int
    states: int = 0
    transitions: int = 0
    terminals: int = 0
    violations: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def _step_violations(i: int, before: NodeCtx, after: NodeCtx, effects) -> list[str]:
    out = [f"node {i}: {v}" for v in P.check_ctx(after)]
    if (before.state, after.state) not in P.ALLOWED_TRANSITIONS and before.state is not after.state:
        out.append(f"node {i}: illegal transition {before.state.value}->{after.state.value}")
    if before.parent is not None and after.parent != before.parent:
        out.append(f"node {i}: parent reassigned within the round")
    if after.state is State.Q1 and before.state is State.INITIAL and before.spent \
            and not before.is_root:
        out.append(f"node {i}: re-joined a finished round")
    n_timers = 0
    for eff in effects:
        if isinstance(eff, (P.SetTimer, P.CancelTimer)):
            n_timers += 1
        if isinstance(eff, P.Verdict) and not after.is_root:
            out.append(f"node {i}: verdict from a non-root node")
        if isinstance(eff, P.Error) and before.state not in (State.A2, State.A3):
            out.append(f"node {i}: error outside the forwarding ladder")
        if isinstance(eff, P.SEND_EFFECTS):
            m = eff.msg
            if m.source != after.self_addr:
                out.append(f"node {i}: sent a message with foreign source")
            if m.type is MessageType.QUERY and not (
                    before.state is State.INITIAL and after.state is State.Q1):
                out.append(f"node {i}: query sent outside adoption")
            if m.type is MessageType.AGGREGATE and not after.is_root and not (
                    before.state in (State.Q1, State.Q2) and after.state is State.A1):
                out.append(f"node {i}: first-attempt aggregate sent twice or out of turn")
            if m.type is MessageType.AGGREGATE and after.state is State.A1:
                if m.aggregate.observations != after.partial.observations:
                    out.append(f"node {i}: aggregate does not carry its partial")
                if after.partial.observations < 1 + len(after.merged_sources):
                    out.append(f"node {i}: observations lost on merge")
            if m.type is MessageType.AGGREGATE_ROUTE and m != before.outgoing.with_type(
                    MessageType.AGGREGATE_ROUTE):
                out.append(f"node {i}: routed re-send differs from the first attempt")
            if m.type is MessageType.AGGREGATE_FORWARD:
                a, b = m.aggregate, before.outgoing.aggregate
                if (a.outcome, a.observations) != (b.outcome, b.observations):
                    out.append(f"node {i}: forwarded re-send differs from the first attempt")
                if a.destination not in before.own_relay_set:
                    out.append(f"node {i}: forward target outside relay set")
    if n_timers > 1:
        out.append(f"node {i}: several timer effects in one step")
    return out


def explore(n: int, edges: Iterable[tuple[int, int]], root: int = 0,
            timeout_ms: int = 500, max_states: int = 5_000_000,
            order: str = "prompt") -> ExploreResult:
    """Visit every reachable global state of one monitoring round.

    ``order`` picks how much freedom the adversary has over deliveries;
    the adversary always chooses the order in which armed timers fire.

    ``prompt``
        messages arrive in send order and take no time, so a timer only
        fires once nothing is in flight.
    ``global``
        messages arrive in send order, as with the simulator's scheduler
        under equal link latency, and timers may fire at any point.
    ``fifo``
        each (sender, receiver, mode) channel is first in first out and
        the adversary picks which channel delivers next, and timers may
        fire at any point (likewise for the two modes below).
    ``any``
        any pending message may overtake any other.
    """
    if order not in ORDERS:
        raise ValueError(f"order must be one of {ORDERS}")
    edges = tuple(sorted(tuple(sorted(e)) for e in edges))
    adj: list[list[int]] = [[] for _ in range(n)]
    for a, b in edges:
        adj[a].append(b)
        adj[b].append(a)
    for row in adj:
        row.sort()
    addrs = [f"10.0.0.{i + 1}" for i in range(n)]
    index = {a: i for i, a in enumerate(addrs)}
    reachable = [[routed_path(adj, i, j) is not None for j in range(n)] for i in range(n)]
    res = ExploreResult(n, edges, root)

    def push(chans: dict, j: int, i: int, msg, via: Via) -> None:
        if order in ("prompt", "global"):
            key = (0,)
        elif order == "fifo":
            key = (j, i, via.value)
        else:
            key = (j, i, via.value) + _msg_key(msg)
        chans[key] = chans.get(key, ()) + ((j, msg, via),)

    def outputs(i: int, effects, chans: dict) -> None:
        for eff in effects:
            if isinstance(eff, P.SendBroadcast):
                for j in adj[i]:
                    push(chans, j, i, eff.msg, Via.BROADCAST)
            elif isinstance(eff, P.SendUnicast):
                j = index[eff.dest]
                if j in adj[i]:
                    push(chans, j, i, eff.msg, Via.UNICAST)
            elif isinstance(eff, P.SendRouted):
                j = index[eff.dest]
                if j != i and reachable[i][j]:
                    push(chans, j, i, eff.msg, Via.ROUTED)

    ctxs = [P.new_node(addrs[i], float(i + 1), i == root, timeout_ms) for i in range(n)]
    r_ctx, eff = P.step(ctxs[root], P.StartMonitoring(_COUNT, timeout_ms))
    ctxs[root] = r_ctx
    chans0: dict = {}
    outputs(root, eff, chans0)
    start = (tuple(ctxs), frozenset(chans0.items()))

    # iterative DFS; ON_STACK marks states on the current path (cycle check)
    ON_STACK, DONE = 1, 2
    mark: dict = {start: ON_STACK}
    stack = [(start, None)]
    while stack:
        state, it = stack[-1]
        if it is None:
            it = iter(_successors(state, outputs, res, order == "prompt"))
            stack[-1] = (state, it)
        nxt = next(it, None)
        if nxt is None:
            mark[state] = DONE
            stack.pop()
            continue
        res.transitions += 1
        m = mark.get(nxt)
        if m is None:
            if len(mark) >= max_states:
                res.violations.append(f"state budget {max_states} exhausted")
                break
            mark[nxt] = ON_STACK
            stack.append((nxt, None))
        elif m == ON_STACK:
            res.violations.append("cycle in the global state graph (possible livelock)")
            break
        if len(res.violations) > 20:
            break
    res.states = len(mark)
    return res


def _successors(state, outputs, res: ExploreResult, prompt: bool = False) -> list:
    ctxs, chan_items = state
    chans = dict(chan_items)
    moves = [("msg", k) for k in sorted(chans)]
    if not (prompt and moves):
        moves += [("timer", i) for i, c in enumerate(ctxs) if c.timer_active]
    if not moves:
        res.terminals += 1
        for i, c in enumerate(ctxs):
            if c.state is not State.INITIAL:
                res.violations.append(f"terminal state with node {i} in {c.state.value}")
        return []
    out = []
    for kind, arg in moves:
        rest = dict(chans)
        if kind == "msg":
            q = rest.pop(arg)
            (i, msg, via), tail = q[0], q[1:]
            if tail:
                rest[arg] = tail
            event = P.Received(msg, via)
        else:
            i = arg
            event = P.TimerFired()
        before = ctxs[i]
        after, effects = P.step(before, event)
        bad = _step_violations(i, before, after, effects)
        if bad:
            res.violations.extend(bad)
        outputs(i, effects, rest)
        new_ctxs = ctxs[:i] + (after,) + ctxs[i + 1:]
        live = {}
        for k, q in rest.items():
            kept = tuple(e for e in q if not inert(new_ctxs[e[0]], e[1], e[2]))
            if kept:
                live[k] = kept
        out.append((new_ctxs, frozenset(live.items())))
    return out


def inert(ctx: NodeCtx, msg, via: Via) -> bool:
    """True when delivering ``msg`` is a no-op now and in every later state.

    Such deliveries are pure stuttering steps, so they are dropped from the
    pending set without changing what the explorer can reach.
    """
    st = ctx.state
    finished = st is State.INITIAL and (ctx.spent or ctx.is_root)
    gone_past_q = st in (State.A1, State.A2, State.A3) or finished
    if msg.type is MessageType.QUERY:
        if st in (State.Q1, State.Q2):
            return msg.parent != ctx.self_addr
        return gone_past_q
    a = msg.aggregate
    if msg.type is MessageType.AGGREGATE_ACK:
        return a.destination != ctx.self_addr or finished
    if a.destination == ctx.self_addr:
        if msg.source in ctx.merged_sources:
            return via is not Via.ROUTED
        return gone_past_q or msg.source == ctx.self_addr
    if msg.type is MessageType.AGGREGATE and via is Via.BROADCAST and msg.source == ctx.parent:
        return finished
    return True


def _msg_key(msg) -> tuple:
    a = msg.aggregate
    return (msg.type.value, msg.source, msg.parent,
            a.destination if a else "", a.observations if a else 0)


# -- topologies -----------------------------------------------------------

def _connected(n: int, edges: Sequence[tuple[int, int]]) -> bool:
    adj = {i: set() for i in range(n)}
    for a, b in edges:
        adj[a].add(b)
        adj[b].add(a)
    seen, frontier = {0}, [0]
    while frontier:
        u = frontier.pop()
        for v in adj[u] - seen:
            seen.add(v)
            frontier.append(v)
    return len(seen) == n


def connected_graphs(n: int) -> list[tuple[tuple[int, int], ...]]:
    """One representative per isomorphism class of connected graphs on n nodes."""
    pairs = list(itertools.combinations(range(n), 2))
    perms = list(itertools.permutations(range(n)))
    seen: set = set()
    out = []
    for mask in range(1 << len(pairs)):
        edges = tuple(p for k, p in enumerate(pairs) if mask >> k & 1)
        if not _connected(n, edges):
            continue
        canon = min(tuple(sorted(tuple(sorted((pm[a], pm[b]))) for a, b in edges))
                    for pm in perms)
        if canon in seen:
            continue
        seen.add(canon)
        out.append(canon)
    return out


def _root_orbits(n: int, edges) -> list[int]:
    """Roots up to graph automorphism."""
    eset = {tuple(sorted(e)) for e in edges}
    autos = [pm for pm in itertools.permutations(range(n))
             if {tuple(sorted((pm[a], pm[b]))) for a, b in eset} == eset]
    roots, covered = [], set()
    for r in range(n):
        if r in covered:
            continue
        roots.append(r)
        covered |= {pm[r] for pm in autos}
    return roots


def all_small_topologies(max_nodes: int = 5):
    """Yield ``(n, edges, root)`` for every connected graph and root class."""
    for n in range(1, max_nodes + 1):
        for edges in connected_graphs(n):
            for root in _root_orbits(n, edges):
                yield n, edges, root


def check_all(max_nodes: int = 5, order: str = "prompt", timeout_ms: int = 500) -> list[ExploreResult]:
    """Explore every connected topology up to ``max_nodes`` nodes, every root class."""
    return [explore(n, edges, root, timeout_ms=timeout_ms, order=order)
            for n, edges, root in all_small_topologies(max_nodes)]
