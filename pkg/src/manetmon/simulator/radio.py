"""Node placement, unit-disk connectivity and the routing stand-in."""

from __future__ import annotations

import math
from collections import deque
from typing import Sequence

import numpy as np

from .config import ConfigError

__all__ = ["place_grid", "place_random", "adjacency", "neighbors_of", "routed_path"]


def place_grid(n: int, spacing: float, area: tuple[float, float]) -> np.ndarray:
    """Row-major square grid anchored at the origin, truncated to ``n`` cells."""
    if n == 0:
        return np.zeros((0, 2))
    side = math.isqrt(n - 1) + 1
    if (side - 1) * spacing > min(area):
        raise ConfigError("area", f"{side}x{side} grid at {spacing:g} m does not fit")
    idx = np.arange(n)
    return np.column_stack([(idx % side) * spacing, (idx // side) * spacing]).astype(float)


def place_random(n: int, area: tuple[float, float], rng: np.random.Generator) -> np.ndarray:
    return rng.uniform((0.0, 0.0), area, size=(n, 2))


def adjacency(positions: np.ndarray, radio_range: float) -> list[list[int]]:
    """Neighbor lists (ascending) of the unit-disk graph."""
    pos = np.asarray(positions, dtype=float)
    diff = pos[:, None, :] - pos[None, :, :]
    within = np.einsum("ijk,ijk->ij", diff, diff) <= radio_range * radio_range
    np.fill_diagonal(within, False)
    return [np.flatnonzero(row).tolist() for row in within]


def neighbors_of(positions: np.ndarray, i: int, radio_range: float) -> list[int]:
    d = positions - positions[i]
    within = np.einsum("ij,ij->i", d, d) <= radio_range * radio_range
    within[i] = False
    return np.flatnonzero(within).tolist()


def routed_path(adj: Sequence[Sequence[int]], src: int, dst: int) -> list[int] | None:
    """Shortest hop path by BFS; ties go to the lowest node index."""
    if src == dst:
        return [src]
    prev = {src: None}
    frontier = deque([src])
    while frontier:
        u = frontier.popleft()
        for v in sorted(adj[u]):
            if v in prev:
                continue
            prev[v] = u
            if v == dst:
                path = [v]
                while prev[path[-1]] is not None:
                    path.append(prev[path[-1]])
                return path[::-1]
            frontier.append(v)
    return None
