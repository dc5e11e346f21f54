"""Scenario summaries and CSV export.

Definitions used throughout:

* a run *succeeds* when the root returned a verdict within the run's
  duration;
* *observations* is the verdict's observation count, which includes the
  root's own reading;
* time and observation means are taken over successful runs only, message
  and byte figures over all runs.

Sums go through :func:`math.fsum`, so a summary does not depend on the
order in which runs are listed.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .simulator.config import ScenarioConfig, format_value
from .simulator.engine import RunMetrics
from .wire import MessageType

__all__ = ["RunRow", "ScenarioSummary", "summarize", "RUN_COLUMNS", "SUMMARY_COLUMNS",
           "run_rows_csv", "export_csv", "summary_rows_csv", "export_summary_csv",
           "summary_json"]


@dataclass(frozen=True)
class RunRow:
    """One simulated run and where it sits in a sweep."""

    variant: int
    repetition: int
    config: ScenarioConfig
    metrics: RunMetrics
    root: int = 0


@dataclass
class ScenarioSummary:
    runs: int
    successes: int
    success_rate: float
    mean_convergence_ms: float | None
    mean_observations: float | None
    mean_messages: float
    mean_bytes_per_message: float | None
    # successful runs whose verdict covers every node
    complete_rate: float
    rows: list[RunMetrics] = field(default_factory=list, repr=False)

    def to_json_obj(self) -> dict:
        return {
            "runs": self.runs,
            "successes": self.successes,
            "success_rate": self.success_rate,
            "mean_convergence_ms": self.mean_convergence_ms,
            "mean_observations": self.mean_observations,
            "mean_messages": self.mean_messages,
            "mean_bytes_per_message": self.mean_bytes_per_message,
            "complete_rate": self.complete_rate,
        }


def _node_count(m: RunMetrics) -> int:
    return sum(m.final_states.values())


def summarize(runs: Iterable[RunMetrics]) -> ScenarioSummary:
    rows = list(runs)
    if not rows:
        raise ValueError("cannot summarize an empty list of runs")
    ok = [m for m in rows if m.converged]
    n = len(rows)
    msgs = math.fsum(m.messages_total for m in rows)
    total_bytes = math.fsum(m.total_bytes for m in rows)
    complete = sum(1 for m in ok if m.distinct_observed == _node_count(m))
    return ScenarioSummary(
        runs=n,
        successes=len(ok),
        success_rate=len(ok) / n,
        mean_convergence_ms=math.fsum(m.convergence_ms for m in ok) / len(ok) if ok else None,
        mean_observations=math.fsum(m.observations for m in ok) / len(ok) if ok else None,
        mean_messages=msgs / n,
        mean_bytes_per_message=total_bytes / msgs if msgs else None,
        complete_rate=complete / n,
        rows=rows,
    )


# -- CSV ---------------------------------------------------------------------

# Per-run columns, in order. ``success`` is 1 or 0, empty cells mean "none",
# and ``oracle`` is f evaluated directly over the verdict's contributors.
RUN_COLUMNS = (
    "variant", "repetition", "seed", "node_count", "area", "mobility", "root",
    "success", "convergence_ms", "observations", "distinct_observed", "nodes_reached",
    "verdict", "oracle", "errors", "messages_total", "bytes_total",
    *(f"msgs_{t.value}" for t in MessageType),
)

SUMMARY_COLUMNS = (
    "variant", "node_count", "area", "mobility", "runs", "successes", "success_rate",
    "mean_convergence_ms", "mean_observations", "mean_messages", "mean_bytes_per_message",
    "complete_rate",
)


def _num(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _run_record(r: RunRow) -> list[str]:
    m, c = r.metrics, r.config
    return [
        str(r.variant), str(r.repetition), str(c.seed), str(c.node_count),
        format_value("area", c.area), format_value("mobility", c.mobility), str(r.root),
        "1" if m.converged else "0", _num(m.convergence_ms), str(m.observations),
        str(m.distinct_observed), str(m.nodes_reached),
        _num(m.verdict[0] if m.verdict else None), _num(m.oracle_value), str(m.errors),
        str(m.messages_total), str(m.total_bytes),
        *(str(m.messages_by_type.get(t.value, 0)) for t in MessageType),
    ]


def _write(header: Sequence[str], records: Iterable[Sequence[str]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(records)
    return buf.getvalue()


def run_rows_csv(rows: Iterable[RunRow]) -> str:
    ordered = sorted(rows, key=lambda r: (r.variant, r.repetition))
    return _write(RUN_COLUMNS, (_run_record(r) for r in ordered))


def export_csv(rows: Iterable[RunRow], path) -> None:
    """Header plus one line per run, ordered by (variant, repetition)."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(run_rows_csv(rows))


def _group(rows: Iterable[RunRow]) -> list[tuple[int, ScenarioConfig, ScenarioSummary]]:
    by: dict[int, list[RunRow]] = {}
    for r in rows:
        by.setdefault(r.variant, []).append(r)
    out = []
    for v in sorted(by):
        group = sorted(by[v], key=lambda r: r.repetition)
        out.append((v, group[0].config, summarize(r.metrics for r in group)))
    return out


def summary_rows_csv(rows: Iterable[RunRow]) -> str:
    records = []
    for v, c, s in _group(rows):
        records.append([
            str(v), str(c.node_count), format_value("area", c.area),
            format_value("mobility", c.mobility), str(s.runs), str(s.successes),
            _num(s.success_rate), _num(s.mean_convergence_ms), _num(s.mean_observations),
            _num(s.mean_messages), _num(s.mean_bytes_per_message), _num(s.complete_rate),
        ])
    return _write(SUMMARY_COLUMNS, records)


def export_summary_csv(rows: Iterable[RunRow], path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(summary_rows_csv(rows))


def summary_json(rows: Iterable[RunRow]) -> str:
    out = []
    for v, c, s in _group(rows):
        obj = {"variant": v, "node_count": c.node_count, "area": format_value("area", c.area),
               "mobility": format_value("mobility", c.mobility)}
        obj.update(s.to_json_obj())
        out.append(obj)
    return json.dumps(out, indent=2, sort_keys=False) + "\n"
