"""Discrete-event wireless simulator driving the monitoring protocol."""

from .config import (ConfigError, Constant, Explicit, Grid, NoMobility, RandomWaypoint,
                     ScenarioConfig, SeededInt, SeededRandom, SweepSpec, Teleport,
                     UniformRandom, format_config, load_config, parse_config)
from .engine import RunMetrics, RunResult, addr_of, run, simulate
from .mobility import Motion, rwp_step
from .radio import adjacency, place_grid, place_random, routed_path

__all__ = [
    "ConfigError", "Constant", "Explicit", "Grid", "NoMobility", "RandomWaypoint",
    "ScenarioConfig", "SeededInt", "SeededRandom", "SweepSpec", "Teleport", "UniformRandom",
    "format_config", "load_config", "parse_config", "RunMetrics", "RunResult", "addr_of",
    "run", "simulate", "Motion", "rwp_step", "adjacency", "place_grid", "place_random",
    "routed_path",
]
