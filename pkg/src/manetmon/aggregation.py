"""Monitored functions and the partial-result algebra of the convergecast."""

from __future__ import annotations

import enum
import math
import re
from dataclasses import dataclass
from typing import Iterable

__all__ = [
    "Kind",
    "MonitorFunction",
    "PartialAggregate",
    "NEUTRAL",
    "AggregationError",
    "local_observe",
    "merge",
    "finalize",
    "direct",
]


class AggregationError(ValueError):
    pass


class Kind(str, enum.Enum):
    AVG = "avg"
    SUM = "sum"
    COUNT = "count"
    MIN = "min"
    MAX = "max"


_FUNC_RE = re.compile(r"^([a-z]+)\(([A-Za-z_][A-Za-z0-9_.]*)\)$")


@dataclass(frozen=True)
class MonitorFunction:
    kind: Kind
    metric: str = "cpu"

    @classmethod
    def parse(cls, text: str) -> MonitorFunction:
        m = _FUNC_RE.match(text.strip()) if isinstance(text, str) else None
        if m is None:
            raise AggregationError(f"bad function {text!r}, expected '<kind>(<metric>)'")
        try:
            kind = Kind(m.group(1))
        except ValueError:
            raise AggregationError(f"unsupported function kind {m.group(1)!r}") from None
        return cls(kind, m.group(2))

    def __str__(self) -> str:
        return f"{self.kind.value}({self.metric})"


@dataclass(frozen=True)
class PartialAggregate:
    """Running value of f plus the number of node observations folded in.

    For AVG the value is the running mean, so ``(value, observations)`` is
    all a parent needs to re-weight on merge.
    """

    value: float
    observations: int

    @property
    def is_neutral(self) -> bool:
        return self.observations == 0


NEUTRAL = PartialAggregate(0.0, 0)


def local_observe(node_value: float, f: MonitorFunction) -> PartialAggregate:
    if f.kind is Kind.COUNT:
        return PartialAggregate(1.0, 1)
    return PartialAggregate(float(node_value), 1)


def merge(a: PartialAggregate, b: PartialAggregate, f: MonitorFunction) -> PartialAggregate:
    if a.observations == 0:
        return b
    if b.observations == 0:
        return a
    n = a.observations + b.observations
    kind = f.kind
    if kind is Kind.AVG:
        value = (a.value * a.observations + b.value * b.observations) / n
    elif kind is Kind.SUM or kind is Kind.COUNT:
        value = a.value + b.value
    elif kind is Kind.MIN:
        value = min(a.value, b.value)
    else:
        value = max(a.value, b.value)
    return PartialAggregate(value, n)


def finalize(p: PartialAggregate, f: MonitorFunction) -> float:
    if p.observations < 1:
        raise AggregationError("cannot finalize the neutral element")
    return p.value


def direct(values: Iterable[float], f: MonitorFunction) -> float:
    """Evaluate f over a whole observation list at once, with no merging."""
    vals = [float(v) for v in values]
    if not vals:
        raise AggregationError("no observations")
    kind = f.kind
    if kind is Kind.AVG:
        return math.fsum(vals) / len(vals)
    if kind is Kind.SUM:
        return math.fsum(vals)
    if kind is Kind.COUNT:
        return float(len(vals))
    if kind is Kind.MIN:
        return min(vals)
    return max(vals)
