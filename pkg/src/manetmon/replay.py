"""Offline re-validation of a recorded JSONL trace.

The checker walks the records in order and stops at the first problem:

* every line is a JSON object with ``t``, ``node``, ``kind`` and ``payload``;
* timestamps never decrease;
* a ``deliver`` or ``drop`` names a message id whose ``send`` came earlier,
  and a delivered payload matches what was sent;
* each ``state`` record starts from the node's last recorded state and is
  an allowed transition of the automaton;
* the ``vht`` record is a valid tree rooted at the monitoring root, and
  each of its edges is backed by a query the child received from its
  parent;
* verdicts come from the root only, errors only from a node that just left
  the forwarding ladder.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from .protocol import ALLOWED_TRANSITIONS, State
from .vht import VhtSnapshot, validate_tree
from .wire import MessageType

__all__ = ["ReplayReport", "replay_lines", "replay_file"]

_KEYS = ("t", "node", "kind", "payload")


@dataclass
class ReplayReport:
    ok: bool
    records: int
    line: int | None = None
    message: str = ""

    def __str__(self) -> str:
        if self.ok:
            return f"trace ok ({self.records} records)"
        return f"line {self.line}: {self.message}"


class _Violation(Exception):
    pass


def replay_lines(lines) -> ReplayReport:
    checker = _Checker()
    count = 0
    for lineno, raw in enumerate(lines, 1):
        if not raw.strip():
            continue
        try:
            rec = json.loads(raw)
        except ValueError as exc:
            return ReplayReport(False, count, lineno, f"corrupt record: {exc}")
        if not isinstance(rec, dict) or any(k not in rec for k in _KEYS):
            return ReplayReport(False, count, lineno, "corrupt record: missing fields")
        try:
            checker.check(rec)
        except _Violation as exc:
            return ReplayReport(False, count, lineno, str(exc))
        except (TypeError, KeyError, ValueError) as exc:
            return ReplayReport(False, count, lineno, f"corrupt record: {exc!r}")
        count += 1
    if count == 0:
        return ReplayReport(False, 0, None, "empty trace")
    return ReplayReport(True, count)


def replay_file(path) -> ReplayReport:
    with open(path, encoding="utf-8") as fh:
        return replay_lines(fh)


class _Checker:
    def __init__(self):
        self.last_t = float("-inf")
        self.sent: dict[int, dict] = {}
        self.state: dict[str, State] = {}
        self.last_move: dict[str, tuple[State, State]] = {}
        self.query_from: set[tuple[str, str]] = set()  # (receiver, sender)
        self.root: str | None = None
        self.ended = False

    def check(self, rec: dict) -> None:
        t, node, kind = rec["t"], rec["node"], rec["kind"]
        info = rec.get("info") or {}
        if self.ended:
            raise _Violation("record after end of trace")
        if not isinstance(t, (int, float)) or t < 0:
            raise _Violation(f"bad timestamp {t!r}")
        if t < self.last_t:
            raise _Violation(f"time goes backwards ({t} after {self.last_t})")
        self.last_t = t
        handler = getattr(self, "_on_" + str(kind), None)
        if handler is None:
            raise _Violation(f"unknown record kind {kind!r}")
        handler(node, rec["payload"], info)

    def _on_config(self, node, payload, info):
        self.root = info.get("root")

    def _on_start(self, node, payload, info):
        if self.root is not None and node != self.root:
            raise _Violation(f"monitoring started at {node}, not the root {self.root}")
        self.root = node

    def _on_send(self, node, payload, info):
        mid = info["id"]
        if mid in self.sent:
            raise _Violation(f"message id {mid} sent twice")
        if payload.get("source") != node:
            raise _Violation(f"{node} sent a message with source {payload.get('source')}")
        self.sent[mid] = payload

    def _sent(self, info) -> dict:
        mid = info["id"]
        if mid not in self.sent:
            raise _Violation(f"message {mid} delivered or dropped before it was sent")
        return self.sent[mid]

    def _on_deliver(self, node, payload, info):
        sent = self._sent(info)
        if payload != sent:
            raise _Violation(f"delivered payload of message {info['id']} differs from the send")
        if sent.get("type") == MessageType.QUERY.value:
            self.query_from.add((node, sent["source"]))

    def _on_drop(self, node, payload, info):
        self._sent(info)

    def _on_state(self, node, payload, info):
        a, b = State(info["from"]), State(info["to"])
        cur = self.state.get(node, State.INITIAL)
        if a is not cur:
            raise _Violation(f"{node} leaves {a.value} but was in {cur.value}")
        if (a, b) not in ALLOWED_TRANSITIONS:
            raise _Violation(f"{node}: transition {a.value} -> {b.value} not allowed")
        self.state[node] = b
        self.last_move[node] = (a, b)

    def _on_vht(self, node, payload, info):
        snap = VhtSnapshot.from_json_obj(payload)
        if self.root is not None and snap.root != self.root:
            raise _Violation(f"tree rooted at {snap.root}, monitoring root is {self.root}")
        problems = validate_tree(snap)
        if problems:
            raise _Violation("tree violation: " + problems[0])
        for child, parent in sorted(snap.edges):
            if (child, parent) not in self.query_from:
                raise _Violation(f"tree edge {child} -> {parent} without a delivered query")

    def _on_verdict(self, node, payload, info):
        if node != self.root:
            raise _Violation(f"verdict from {node}, which is not the root")

    def _on_error(self, node, payload, info):
        move = self.last_move.get(node)
        if move is None or move[0] not in (State.A2, State.A3):
            raise _Violation(f"error from {node} outside the forwarding ladder")

    def _on_end(self, node, payload, info):
        self.ended = True

    def _noop(self, node, payload, info):
        pass

    _on_set_timer = _on_cancel_timer = _on_timer = _on_teleport = _noop
