"""Seeded discrete-event wireless simulation of one monitoring round."""

from __future__ import annotations

import heapq
import json
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .. import protocol as P
from ..aggregation import direct
from ..protocol import NodeCtx, State, Via
from ..vht import VhtSnapshot, extract_vht
from ..wire import Message, MessageType, encode_message, to_json_obj
from .config import (Constant, Explicit, Grid, RandomWaypoint, ScenarioConfig, SeededInt,
                     SeededRandom, UniformRandom, format_config)
from .mobility import rwp_step, start_motion
from .radio import adjacency, place_grid, place_random, routed_path

__all__ = ["RunMetrics", "RunResult", "simulate", "run", "addr_of", "place_nodes"]

_DELIVER, _TIMER, _MOVE, _TELEPORT = 0, 1, 2, 3


def addr_of(i: int) -> str:
    return f"10.0.{i // 250}.{i % 250 + 1}"


@dataclass
class RunMetrics:
    converged: bool
    convergence_ms: float | None
    verdict: tuple[float, int] | None
    messages_by_type: dict[str, int]
    messages_total: int
    total_bytes: int
    nodes_reached: int
    final_states: dict[str, int]
    errors: int = 0
    # f over the verdict's contributing observations, evaluated directly
    oracle_value: float | None = None
    distinct_observed: int = 0

    @property
    def observations(self) -> int:
        return self.verdict[1] if self.verdict else 0

    def to_json_obj(self) -> dict:
        return {
            "converged": self.converged,
            "convergence_ms": self.convergence_ms,
            "verdict": list(self.verdict) if self.verdict else None,
            "messages_by_type": self.messages_by_type,
            "messages_total": self.messages_total,
            "total_bytes": self.total_bytes,
            "nodes_reached": self.nodes_reached,
            "final_states": self.final_states,
            "errors": self.errors,
            "oracle_value": self.oracle_value,
            "distinct_observed": self.distinct_observed,
        }


@dataclass
class RunResult:
    config: ScenarioConfig
    root: int
    metrics: RunMetrics
    positions: np.ndarray
    observations: list[float]
    final: list[NodeCtx]
    vht: VhtSnapshot | None
    adjacency_at_adoption: dict[str, set[str]]
    state_history: dict[str, list[State]]
    contributors: Counter | None
    trace: list[str] = field(default_factory=list)

    @property
    def addrs(self) -> list[str]:
        return [c.self_addr for c in self.final]


def place_nodes(cfg: ScenarioConfig, rng: np.random.Generator) -> np.ndarray:
    p = cfg.placement
    if isinstance(p, Grid):
        return place_grid(cfg.node_count, p.spacing, cfg.area)
    if isinstance(p, UniformRandom):
        return place_random(cfg.node_count, cfg.area, rng)
    if isinstance(p, Explicit):
        return np.array(p.positions, dtype=float).reshape(-1, 2)
    raise TypeError(p)


def _observations(cfg: ScenarioConfig, rng: np.random.Generator) -> list[float]:
    src, n = cfg.observation_source, cfg.node_count
    if isinstance(src, Constant):
        return [float(src.value)] * n
    if isinstance(src, SeededInt):
        return [float(v) for v in rng.integers(src.low, src.high + 1, size=n)]
    if isinstance(src, SeededRandom):
        return [float(v) for v in rng.uniform(src.low, src.high, size=n)]
    raise TypeError(src)


def _dumps(obj) -> str:
    return json.dumps(obj, separators=(",", ":"), allow_nan=False)


class _Engine:
    def __init__(self, cfg: ScenarioConfig, record: bool):
        cfg.validate()
        self.cfg = cfg
        self.record = record
        streams = [np.random.default_rng(s) for s in np.random.SeedSequence(cfg.seed).spawn(5)]
        rng_place, rng_obs, rng_root, self.rng_link, self.rng_move = streams
        n = cfg.node_count
        self.pos = place_nodes(cfg, rng_place)
        self.initial_pos = self.pos.copy()
        self.obs = _observations(cfg, rng_obs)
        self.root = cfg.root if cfg.root is not None else int(rng_root.integers(n))
        self.addrs = [addr_of(i) for i in range(n)]
        self.index = {a: i for i, a in enumerate(self.addrs)}
        self.nodes = [P.new_node(self.addrs[i], self.obs[i], i == self.root, cfg.timeout_ms)
                      for i in range(n)]
        self._adj: list[list[int]] | None = None

        self.heap: list = []
        self.seq = 0
        self.now = 0.0
        self.timer_gen = [0] * n
        self.timers_active = 0
        self._active_gen: list[int | None] = [None] * n
        self.pending = 0
        self.pending_query = 0
        self.msg_id = 0
        self.msgs: dict[int, Message] = {}
        self.msg_shadow: dict[int, Counter] = {}
        self.shadow = [Counter() for _ in range(n)]

        self.counts = {t.value: 0 for t in MessageType}
        self.total_bytes = 0
        self.errors = 0
        self.verdict: tuple[float, int] | None = None
        self.verdict_t: float | None = None
        self.contributors: Counter | None = None
        self.adopted_at: dict[str, float] = {}
        self.adj_at_adoption: dict[str, set[str]] = {}
        self.history = {a: [State.INITIAL] for a in self.addrs}
        self.vht: VhtSnapshot | None = None
        self.lines: list[str] = []

        self.motions = None
        if isinstance(cfg.mobility, RandomWaypoint):
            self.motions = [start_motion(x, y, cfg.area, self.rng_move) for x, y in self.pos]

    # -- bookkeeping ------------------------------------------------------

    def _push(self, t: float, kind: int, *data) -> None:
        heapq.heappush(self.heap, (t, self.seq, kind, data))
        self.seq += 1

    def _rec(self, kind: str, node: str | None, payload=None, **info) -> None:
        if self.record:
            rec = {"t": self.now, "node": node, "kind": kind, "payload": payload}
            if info:
                rec["info"] = info
            self.lines.append(_dumps(rec))

    def adj(self) -> list[list[int]]:
        if self._adj is None:
            self._adj = adjacency(self.pos, self.cfg.radio_range)
        return self._adj

    def _latency(self) -> float:
        base, jitter = self.cfg.hop_latency
        return base + (float(self.rng_link.random()) - 0.5) * jitter

    def _lost(self, hops: int = 1) -> bool:
        p = self.cfg.loss_prob
        if p <= 0.0:
            return False
        return any(float(self.rng_link.random()) < p for _ in range(hops))

    # -- effects ----------------------------------------------------------

    def _deliver_later(self, mid: int, to: int, via: Via, delay: float) -> None:
        self.pending += 1
        if self.msgs[mid].type is MessageType.QUERY:
            self.pending_query += 1
        self._push(self.now + delay, _DELIVER, mid, to, via)

    def _send(self, i: int, msg: Message, mode: Via, dest: str | None) -> None:
        mid = self.msg_id
        self.msg_id += 1
        self.msgs[mid] = msg
        size = len(encode_message(msg))
        self.counts[msg.type.value] += 1
        self.total_bytes += size
        if msg.type.is_aggregate and msg.type is not MessageType.AGGREGATE_ACK:
            self.msg_shadow[mid] = Counter(self.shadow[i])
        self._rec("send", self.addrs[i], to_json_obj(msg), id=mid, mode=mode.value,
                  dest=dest, bytes=size)
        adj = self.adj()
        if mode is Via.BROADCAST:
            for j in adj[i]:
                if self._lost():
                    self._rec("drop", self.addrs[j], None, id=mid, reason="loss")
                else:
                    self._deliver_later(mid, j, mode, self._latency())
            return
        j = self.index.get(dest)
        if j is None:
            self._rec("drop", dest, None, id=mid, reason="unknown-address")
            return
        if mode is Via.UNICAST:
            if j not in adj[i]:
                self._rec("drop", dest, None, id=mid, reason="not-adjacent")
            elif self._lost():
                self._rec("drop", dest, None, id=mid, reason="loss")
            else:
                self._deliver_later(mid, j, mode, self._latency())
            return
        path = routed_path(adj, i, j)
        if path is None:
            self._rec("drop", dest, None, id=mid, reason="no-route")
            return
        hops = len(path) - 1
        if self._lost(hops):
            self._rec("drop", dest, None, id=mid, reason="loss")
            return
        self._deliver_later(mid, j, mode, self._latency() * hops)

    def _apply(self, i: int, before: NodeCtx, after: NodeCtx, effects) -> None:
        addr = self.addrs[i]
        self.nodes[i] = after
        if before.state is not after.state:
            self._rec("state", addr, None, **{"from": before.state.value, "to": after.state.value})
            self.history[addr].append(after.state)
            if before.state is State.INITIAL and after.state is State.Q1:
                self.shadow[i] = Counter({i: 1})
                if not after.is_root:
                    self.adopted_at[addr] = self.now
                    self.adj_at_adoption[addr] = {self.addrs[k] for k in self.adj()[i]}
        for eff in effects:
            if isinstance(eff, P.SendBroadcast):
                self._send(i, eff.msg, Via.BROADCAST, None)
            elif isinstance(eff, P.SendRouted):
                self._send(i, eff.msg, Via.ROUTED, eff.dest)
            elif isinstance(eff, P.SendUnicast):
                self._send(i, eff.msg, Via.UNICAST, eff.dest)
            elif isinstance(eff, P.SetTimer):
                if not self._timer_on(i):
                    self.timers_active += 1
                self.timer_gen[i] += 1
                self._active_gen[i] = self.timer_gen[i]
                self._push(self.now + eff.ms, _TIMER, i, self.timer_gen[i])
                self._rec("set_timer", addr, None, ms=eff.ms)
            elif isinstance(eff, P.CancelTimer):
                self._timer_off(i)
                self._rec("cancel_timer", addr, None)
            elif isinstance(eff, P.Verdict):
                self.verdict = (eff.value, eff.observations)
                self.verdict_t = self.now
                self.contributors = Counter(self.shadow[i])
                self._rec("verdict", addr, None, value=eff.value, observations=eff.observations)
            elif isinstance(eff, P.Error):
                self.errors += 1
                self._rec("error", addr, None, reason=eff.reason)

    def _timer_on(self, i: int) -> bool:
        return self._active_gen[i] is not None

    def _timer_off(self, i: int) -> None:
        if self._active_gen[i] is not None:
            self._active_gen[i] = None
            self.timers_active -= 1

    # -- main loop --------------------------------------------------------

    def _snapshot_if_quiet(self) -> None:
        if self.vht is None and self.pending_query == 0:
            self.vht = extract_vht(self.nodes, self.adopted_at)
            self._rec("vht", None, self.vht.to_json_obj())

    def _move(self) -> None:
        m = self.cfg.mobility
        dt = m.tick_ms / 1000.0
        for k, mo in enumerate(self.motions):
            mo = rwp_step(mo, dt, m.speed, self.cfg.area, self.rng_move, m.pause_s)
            self.motions[k] = mo
            self.pos[k] = (mo.x, mo.y)
        self._adj = None

    def run(self) -> RunResult:
        cfg = self.cfg
        self._rec("config", None, None, config=format_config(cfg), root=self.addrs[self.root])
        if self.motions is not None:
            self._push(cfg.mobility.tick_ms, _MOVE)
        for tp in cfg.script:
            self._push(tp.t_ms, _TELEPORT, tp.node, tp.x, tp.y)

        r = self.root
        before = self.nodes[r]
        after, effects = P.step(before, P.StartMonitoring(cfg.function, cfg.timeout_ms), 0.0)
        self._rec("start", self.addrs[r], None, function=str(cfg.function),
                  timeout=cfg.timeout_ms)
        self._apply(r, before, after, effects)
        self._snapshot_if_quiet()

        while self.heap and (self.pending or self.timers_active):
            t, _, kind, data = heapq.heappop(self.heap)
            if t > cfg.duration_ms:
                break
            self.now = t
            if kind == _DELIVER:
                mid, j, via = data
                self.pending -= 1
                msg = self.msgs[mid]
                if msg.type is MessageType.QUERY:
                    self.pending_query -= 1
                self._rec("deliver", self.addrs[j], to_json_obj(msg), id=mid,
                          via=via.value)
                before = self.nodes[j]
                after, effects = P.step(before, P.Received(msg, via), t)
                if (msg.source not in before.merged_sources
                        and msg.source in after.merged_sources):
                    self.shadow[j] += self.msg_shadow.get(mid, Counter())
                self._apply(j, before, after, effects)
                self._snapshot_if_quiet()
            elif kind == _TIMER:
                i, gen = data
                if self._active_gen[i] != gen:
                    continue
                self._timer_off(i)
                self._rec("timer", self.addrs[i], None)
                before = self.nodes[i]
                after, effects = P.step(before, P.TimerFired(), t)
                self._apply(i, before, after, effects)
            elif kind == _MOVE:
                self._move()
                if t + cfg.mobility.tick_ms <= cfg.duration_ms:
                    self._push(t + cfg.mobility.tick_ms, _MOVE)
            elif kind == _TELEPORT:
                k, x, y = data
                self.pos[k] = (x, y)
                if self.motions is not None:
                    self.motions[k].x, self.motions[k].y = x, y
                self._adj = None
                self._rec("teleport", self.addrs[k], None, x=x, y=y)

        metrics = self._metrics()
        self._rec("end", None, None, metrics=metrics.to_json_obj())
        return RunResult(cfg, self.root, metrics, self.initial_pos, self.obs, list(self.nodes),
                         self.vht, self.adj_at_adoption, self.history, self.contributors,
                         self.lines)

    def _metrics(self) -> RunMetrics:
        cfg = self.cfg
        converged = self.verdict is not None and self.verdict_t <= cfg.duration_ms
        oracle = None
        if self.contributors:
            values = [self.obs[k] for k in sorted(self.contributors)
                      for _ in range(self.contributors[k])]
            oracle = direct(values, cfg.function)
        states = Counter(c.state.value for c in self.nodes)
        return RunMetrics(
            converged=converged,
            convergence_ms=self.verdict_t if converged else None,
            verdict=self.verdict,
            messages_by_type=dict(self.counts),
            messages_total=sum(self.counts.values()),
            total_bytes=self.total_bytes,
            nodes_reached=1 + len(self.adopted_at),
            final_states={s.value: states.get(s.value, 0) for s in State},
            errors=self.errors,
            oracle_value=oracle,
            distinct_observed=len(self.contributors) if self.contributors else 0,
        )


def simulate(config: ScenarioConfig, trace: bool = True) -> RunResult:
    """Run one monitoring round and keep everything needed for inspection."""
    return _Engine(config, trace).run()


def run(config: ScenarioConfig) -> tuple[RunMetrics, list[str]]:
    res = simulate(config, trace=True)
    return res.metrics, res.trace
