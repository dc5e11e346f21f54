"""Virtual hierarchical topology: relay sets and whole-network tree checks.

Nodes only ever know their own parent and relay set. The snapshot and
validator here are observer-side tools used by the simulator, the trace
replayer and the tests.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Iterable, Mapping

from .wire import MAX_RELAY_SET

if TYPE_CHECKING:
    from .protocol import NodeCtx

__all__ = ["VhtSnapshot", "advertise_relay_set", "extract_vht", "validate_tree",
           "is_spanning", "depths"]


def advertise_relay_set(ctx: NodeCtx) -> tuple[str, ...]:
    """Relay set a node puts in its own query broadcast.

    The node's parent comes first, followed by the ancestors the parent
    advertised, so each child learns up to three ancestors above it.
    """
    if ctx.is_root or ctx.parent is None:
        return ()
    out: list[str] = []
    for addr in (ctx.parent, *ctx.own_relay_set):
        if addr != ctx.self_addr and addr not in out:
            out.append(addr)
        if len(out) == MAX_RELAY_SET:
            break
    return tuple(out)


@dataclass(frozen=True)
class VhtSnapshot:
    root: str
    edges: frozenset[tuple[str, str]]  # (child, parent)
    unreached: frozenset[str] = frozenset()
    adopted_at: Mapping[str, float] = field(default_factory=dict, compare=False)

    @property
    def parents(self) -> dict[str, str]:
        return dict(self.edges)

    def to_json_obj(self) -> dict:
        return {
            "root": self.root,
            "edges": sorted([c, p] for c, p in self.edges),
            "unreached": sorted(self.unreached),
            "adopted_at": {k: self.adopted_at[k] for k in sorted(self.adopted_at)},
        }

    @classmethod
    def from_json_obj(cls, obj: dict) -> VhtSnapshot:
        return cls(obj["root"], frozenset((c, p) for c, p in obj["edges"]),
                   frozenset(obj.get("unreached", ())), dict(obj.get("adopted_at", {})))


def extract_vht(views: Iterable, adopted_at: Mapping[str, float] | None = None) -> VhtSnapshot:
    """Collect every node's (self, parent) link.

    ``views`` are objects exposing ``self_addr``, ``is_root`` and ``parent``
    (``NodeCtx`` works directly).
    """
    root = None
    edges = set()
    unreached = set()
    for v in views:
        if v.is_root:
            root = v.self_addr
        elif v.parent is not None:
            edges.add((v.self_addr, v.parent))
        else:
            unreached.add(v.self_addr)
    if root is None:
        raise ValueError("no root among node views")
    return VhtSnapshot(root, frozenset(edges), frozenset(unreached), dict(adopted_at or {}))


def depths(s: VhtSnapshot) -> dict[str, int]:
    """Tree depth of every node connected to the root (root is 0)."""
    children: dict[str, list[str]] = {}
    for c, p in s.edges:
        children.setdefault(p, []).append(c)
    out = {s.root: 0}
    stack = [s.root]
    while stack:
        p = stack.pop()
        for c in children.get(p, ()):
            if c not in out:
                out[c] = out[p] + 1
                stack.append(c)
    return out


def validate_tree(s: VhtSnapshot,
                  adjacency_at_adoption: Mapping[str, Iterable[str]] | None = None) -> list[str]:
    """List structural violations of a snapshot; empty means a valid tree.

    Checks a single parent per node, a parentless root, no cycles, every
    parented node hanging off the root, every link being a radio link when
    the child adopted (if adjacency is given) and, if adoption times are
    recorded, each parent having adopted strictly before its child.
    """
    out: list[str] = []
    parent_of: dict[str, str] = {}
    for child, parent in sorted(s.edges):
        if child == parent:
            out.append(f"self-loop at {child}")
            continue
        if child in parent_of:
            out.append(f"{child} has several parents ({parent_of[child]}, {parent})")
            continue
        parent_of[child] = parent
    if s.root in parent_of:
        out.append(f"root {s.root} has a parent {parent_of[s.root]}")

    cycles: set[frozenset] = set()
    for start in sorted(parent_of):
        path = [start]
        cur = start
        while cur in parent_of:
            cur = parent_of[cur]
            if cur in path:
                ring = frozenset(path[path.index(cur):])
                if ring not in cycles:
                    cycles.add(ring)
                    out.append("cycle through " + ", ".join(sorted(ring)))
                if start not in ring:
                    out.append(f"{start} hangs off a cycle")
                break
            path.append(cur)
        else:
            if cur != s.root:
                out.append(f"{start} is detached from the root (chain ends at {cur})")

    if adjacency_at_adoption is not None:
        for child, parent in sorted(parent_of.items()):
            if parent not in set(adjacency_at_adoption.get(child, ())):
                out.append(f"edge {child}->{parent} was not a radio link at adoption")

    if s.adopted_at:
        for child, parent in sorted(parent_of.items()):
            tc, tp = s.adopted_at.get(child), s.adopted_at.get(parent)
            if tc is not None and tp is not None and not tp < tc:
                out.append(f"{parent} adopted at {tp} not before its child {child} at {tc}")
    return out


def is_spanning(s: VhtSnapshot, nodes: Iterable[str]) -> bool:
    nodes = set(nodes)
    return not s.unreached and set(depths(s)) == nodes
