"""Monitoring packet: canonical JSON encoding, decoding and validation.

One packet shape carries every message of the protocol. The header
(``type``, ``parent``, ``source``, ``timeout``) is always present; a
``query`` section travels with query messages and an ``aggregate`` section
with every aggregate-family message. Encoding uses a fixed key order and
no insignificant whitespace so the bytes of a message are reproducible.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass

__all__ = [
    "MessageType",
    "QueryPayload",
    "AggregatePayload",
    "Message",
    "WireError",
    "EncodeError",
    "MalformedJSON",
    "MissingField",
    "UnknownType",
    "RelaySetTooLong",
    "NonPositiveTimeout",
    "InvalidMessage",
    "MAX_RELAY_SET",
    "encode_message",
    "decode_message",
    "validate",
]

MAX_RELAY_SET = 3


class MessageType(str, enum.Enum):
    QUERY = "Query"
    AGGREGATE = "Aggregate"
    AGGREGATE_ROUTE = "AggregateRoute"
    AGGREGATE_FORWARD = "AggregateForward"
    AGGREGATE_ACK = "AggregateACK"

    @property
    def is_aggregate(self) -> bool:
        return self is not MessageType.QUERY


_TYPES_BY_TAG = {t.value: t for t in MessageType}


@dataclass(frozen=True)
class QueryPayload:
    function: str
    relay_set: tuple[str, ...] = ()


@dataclass(frozen=True)
class AggregatePayload:
    outcome: float
    destination: str
    observations: int


@dataclass(frozen=True)
class Message:
    type: MessageType
    parent: str
    source: str
    timeout: int
    query: QueryPayload | None = None
    aggregate: AggregatePayload | None = None

    def with_type(self, new_type: MessageType) -> Message:
        return Message(new_type, self.parent, self.source, self.timeout,
                       self.query, self.aggregate)


class WireError(ValueError):
    """Base class for every decode failure."""


class MalformedJSON(WireError):
    pass


class MissingField(WireError):
    pass


class UnknownType(WireError):
    pass


class RelaySetTooLong(WireError):
    pass


class NonPositiveTimeout(WireError):
    pass


class InvalidMessage(WireError):
    """Well-formed JSON that breaks some other packet invariant."""

    def __init__(self, violations: list[str]):
        super().__init__("; ".join(violations))
        self.violations = violations


class EncodeError(ValueError):
    def __init__(self, violations: list[str]):
        super().__init__("refusing to encode: " + "; ".join(violations))
        self.violations = violations


def _is_addr(value: object) -> bool:
    return isinstance(value, str) and bool(value)


def _is_int(value: object) -> bool:
    return isinstance(value, int) and not isinstance(value, bool)


def validate(msg: Message) -> list[str]:
    """Return the invariant violations of ``msg``; empty means valid."""
    out: list[str] = []
    if not isinstance(msg.type, MessageType):
        out.append(f"type: unknown tag {msg.type!r}")
        return out
    if not _is_addr(msg.parent):
        out.append("parent: must be a non-empty address")
    if not _is_addr(msg.source):
        out.append("source: must be a non-empty address")
    if not _is_int(msg.timeout) or msg.timeout <= 0:
        out.append("timeout: must be a positive integer of milliseconds")

    if msg.type is MessageType.QUERY:
        if msg.aggregate is not None:
            out.append("aggregate: not allowed on a Query message")
        q = msg.query
        if q is None:
            out.append("query: required on a Query message")
        else:
            if not isinstance(q.function, str) or not q.function:
                out.append("query.function: must be a non-empty string")
            relays = q.relay_set
            if len(relays) > MAX_RELAY_SET:
                out.append(f"query.relaySet: {len(relays)} entries, at most {MAX_RELAY_SET}")
            if not all(_is_addr(r) for r in relays):
                out.append("query.relaySet: entries must be non-empty addresses")
            elif len(set(relays)) != len(relays):
                out.append("query.relaySet: duplicate entries")
            if msg.source in relays:
                out.append("query.relaySet: contains the message source")
    else:
        if msg.query is not None:
            out.append(f"query: not allowed on a {msg.type.value} message")
        a = msg.aggregate
        if a is None:
            out.append(f"aggregate: required on a {msg.type.value} message")
        else:
            if (not isinstance(a.outcome, (int, float)) or isinstance(a.outcome, bool)
                    or not math.isfinite(a.outcome)):
                out.append("aggregate.outcome: must be a finite number")
            if not _is_addr(a.destination):
                out.append("aggregate.destination: must be a non-empty address")
            if not _is_int(a.observations) or a.observations < 1:
                out.append("aggregate.observations: must be an integer >= 1")
    return out


def _to_obj(msg: Message) -> dict:
    obj: dict = {
        "type": msg.type.value,
        "parent": msg.parent,
        "source": msg.source,
        "timeout": msg.timeout,
    }
    if msg.query is not None:
        obj["query"] = {"function": msg.query.function,
                        "relaySet": list(msg.query.relay_set)}
    if msg.aggregate is not None:
        obj["aggregate"] = {"outcome": float(msg.aggregate.outcome),
                            "destination": msg.aggregate.destination,
                            "observations": msg.aggregate.observations}
    return obj


def to_json_obj(msg: Message) -> dict:
    """The packet as a plain dict in canonical key order (used by traces)."""
    return _to_obj(msg)


def encode_message(msg: Message) -> bytes:
    violations = validate(msg)
    if violations:
        raise EncodeError(violations)
    return json.dumps(_to_obj(msg), separators=(",", ":"),
                      ensure_ascii=True, allow_nan=False).encode("ascii")


def _require(obj: dict, key: str, where: str):
    if key not in obj:
        raise MissingField(f"{where}{key}: missing")
    return obj[key]


def from_json_obj(obj: object) -> Message:
    if not isinstance(obj, dict):
        raise MalformedJSON("packet must be a JSON object")
    tag = _require(obj, "type", "")
    if not isinstance(tag, str) or tag not in _TYPES_BY_TAG:
        raise UnknownType(f"type: unknown tag {tag!r}")
    mtype = _TYPES_BY_TAG[tag]
    parent = _require(obj, "parent", "")
    source = _require(obj, "source", "")
    timeout = _require(obj, "timeout", "")
    if _is_int(timeout) and timeout <= 0:
        raise NonPositiveTimeout(f"timeout: {timeout} is not positive")

    query = aggregate = None
    if "query" in obj and obj["query"] is not None:
        q = obj["query"]
        if not isinstance(q, dict):
            raise InvalidMessage(["query: must be an object"])
        function = _require(q, "function", "query.")
        relays = _require(q, "relaySet", "query.")
        if not isinstance(relays, list):
            raise InvalidMessage(["query.relaySet: must be a list"])
        if len(relays) > MAX_RELAY_SET:
            raise RelaySetTooLong(
                f"query.relaySet: {len(relays)} entries, at most {MAX_RELAY_SET}")
        query = QueryPayload(function, tuple(relays))
    if "aggregate" in obj and obj["aggregate"] is not None:
        a = obj["aggregate"]
        if not isinstance(a, dict):
            raise InvalidMessage(["aggregate: must be an object"])
        outcome = _require(a, "outcome", "aggregate.")
        destination = _require(a, "destination", "aggregate.")
        observations = _require(a, "observations", "aggregate.")
        if isinstance(outcome, int) and not isinstance(outcome, bool):
            outcome = float(outcome)
        aggregate = AggregatePayload(outcome, destination, observations)

    msg = Message(mtype, parent, source, timeout, query, aggregate)
    violations = validate(msg)
    if violations:
        raise InvalidMessage(violations)
    return msg


def decode_message(data: bytes | bytearray | str) -> Message:
    """Parse a packet. Key order is free and unknown keys are ignored."""
    try:
        if isinstance(data, (bytes, bytearray)):
            data = bytes(data).decode("utf-8")
        obj = json.loads(data)
    except (UnicodeDecodeError, ValueError, RecursionError) as exc:
        raise MalformedJSON(f"not a JSON document: {exc}") from None
    return from_json_obj(obj)
