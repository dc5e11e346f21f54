"""Scenario configuration and its flat ``key = value`` file format.

Example::

    node_count = 25
    area = 500x500
    placement = grid(100)
    radio_range = 125
    root = random
    mobility = rwp(2)
    # sweeps: alternatives separated by '|'
    vary.node_count = 10 | 20 | 25
    repetitions = 40

Values use the same syntax as :func:`format_config` prints, so a config
round-trips through text.
"""

from __future__ import annotations

import itertools
import math
import re
from dataclasses import dataclass, fields, replace
from typing import Union

from ..aggregation import AggregationError, MonitorFunction

__all__ = [
    "ConfigError", "Grid", "UniformRandom", "Explicit", "NoMobility", "RandomWaypoint",
    "Constant", "SeededRandom", "SeededInt", "Teleport", "ScenarioConfig", "SweepSpec",
    "parse_config", "format_config", "load_config", "CONFIG_FIELDS", "format_value",
]


class ConfigError(ValueError):
    def __init__(self, fieldname: str, message: str):
        super().__init__(f"{fieldname}: {message}")
        self.field = fieldname


@dataclass(frozen=True)
class Grid:
    spacing: float = 100.0


@dataclass(frozen=True)
class UniformRandom:
    pass


@dataclass(frozen=True)
class Explicit:
    positions: tuple[tuple[float, float], ...]


@dataclass(frozen=True)
class NoMobility:
    pass


@dataclass(frozen=True)
class RandomWaypoint:
    speed: float
    pause_s: float = 0.0
    tick_ms: float = 100.0


@dataclass(frozen=True)
class Constant:
    value: float


@dataclass(frozen=True)
class SeededRandom:
    low: float = 0.0
    high: float = 100.0


@dataclass(frozen=True)
class SeededInt:
    low: int = 0
    high: int = 100


@dataclass(frozen=True)
class Teleport:
    """Scripted relocation of one node, used for failure scenarios."""
    t_ms: float
    node: int
    x: float
    y: float


Placement = Union[Grid, UniformRandom, Explicit]
Mobility = Union[NoMobility, RandomWaypoint]
ObservationSource = Union[Constant, SeededRandom, SeededInt]


@dataclass(frozen=True)
class ScenarioConfig:
    node_count: int = 25
    area: tuple[float, float] = (500.0, 500.0)
    placement: Placement = Grid(100.0)
    radio_range: float = 125.0
    root: int | None = 0  # None draws the root from the seed
    function: MonitorFunction = MonitorFunction.parse("avg(cpu)")
    timeout_ms: int = 500
    hop_latency: tuple[float, float] = (2.0, 2.0)  # base, full jitter spread
    loss_prob: float = 0.0
    mobility: Mobility = NoMobility()
    duration_ms: float = 20000.0
    seed: int = 0
    observation_source: ObservationSource = SeededRandom(0.0, 100.0)
    script: tuple[Teleport, ...] = ()

    def validate(self) -> None:
        if not isinstance(self.node_count, int) or self.node_count < 1:
            raise ConfigError("node_count", "must be an integer >= 1")
        w, h = self.area
        if not (w > 0 and h > 0):
            raise ConfigError("area", "width and height must be positive")
        if not self.radio_range > 0:
            raise ConfigError("radio_range", "must be positive")
        if self.root is not None and not 0 <= self.root < self.node_count:
            raise ConfigError("root", f"index {self.root} outside 0..{self.node_count - 1}")
        if not isinstance(self.timeout_ms, int) or self.timeout_ms <= 0:
            raise ConfigError("timeout_ms", "must be a positive integer")
        base, jitter = self.hop_latency
        if base < 0 or jitter < 0 or jitter > 2 * base:
            raise ConfigError("hop_latency", "need base >= 0 and 0 <= jitter <= 2*base")
        if not 0.0 <= self.loss_prob <= 1.0:
            raise ConfigError("loss_prob", "must lie in [0, 1]")
        if not self.duration_ms > 0:
            raise ConfigError("duration_ms", "must be positive")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed", "must be an unsigned 64-bit integer")
        p = self.placement
        if isinstance(p, Grid):
            if not p.spacing > 0:
                raise ConfigError("placement", "grid spacing must be positive")
            side = math.isqrt(self.node_count - 1) + 1
            if (side - 1) * p.spacing > min(w, h):
                raise ConfigError("placement", f"a {side}x{side} grid with spacing "
                                  f"{p.spacing:g} does not fit in {w:g}x{h:g}")
        elif isinstance(p, Explicit):
            if len(p.positions) != self.node_count:
                raise ConfigError("placement", f"{len(p.positions)} positions for "
                                  f"{self.node_count} nodes")
        m = self.mobility
        if isinstance(m, RandomWaypoint):
            if not m.speed > 0:
                raise ConfigError("mobility", "rwp speed must be positive")
            if m.pause_s < 0 or not m.tick_ms > 0:
                raise ConfigError("mobility", "rwp pause must be >= 0 and tick > 0")
        o = self.observation_source
        if isinstance(o, (SeededRandom, SeededInt)) and o.high < o.low:
            raise ConfigError("observation_source", "high below low")
        for tp in self.script:
            if not 0 <= tp.node < self.node_count or tp.t_ms < 0:
                raise ConfigError("script", f"bad teleport {tp}")


CONFIG_FIELDS = tuple(f.name for f in fields(ScenarioConfig))


@dataclass(frozen=True)
class SweepSpec:
    base: ScenarioConfig
    vary: tuple[tuple[str, tuple], ...] = ()
    repetitions: int = 1
    seed_base: int = 0

    def variants(self) -> list[ScenarioConfig]:
        """Cartesian product of the varied fields, in file order."""
        if not self.vary:
            return [self.base]
        names = [name for name, _ in self.vary]
        out = []
        for combo in itertools.product(*(vals for _, vals in self.vary)):
            out.append(replace(self.base, **dict(zip(names, combo))))
        return out

    def seed_for(self, variant: int, run: int) -> int:
        return (self.seed_base + variant * self.repetitions + run) % 2**64


# -- value syntax ---------------------------------------------------------

_CALL = re.compile(r"^\s*([a-z_]+)\s*(?:\((.*)\))?\s*$", re.S)


def _num(text: str, name: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise ConfigError(name, f"not a number: {text!r}") from None


def _int(text: str, name: str) -> int:
    try:
        return int(text.strip())
    except ValueError:
        raise ConfigError(name, f"not an integer: {text!r}") from None


def _call(text: str, name: str) -> tuple[str, list[str]]:
    m = _CALL.match(text)
    if not m:
        raise ConfigError(name, f"cannot parse {text!r}")
    args = m.group(2)
    return m.group(1), ([a.strip() for a in args.split(",")] if args and args.strip() else [])


def _pair(text: str, name: str, sep: str) -> tuple[float, float]:
    parts = [p for p in re.split(sep, text.strip()) if p]
    if len(parts) != 2:
        raise ConfigError(name, f"expected two numbers, got {text!r}")
    return _num(parts[0], name), _num(parts[1], name)


def _parse_value(name: str, text: str):
    text = text.strip()
    if name in ("node_count", "timeout_ms"):
        return _int(text, name)
    if name == "seed":
        v = _int(text, name)
        if not 0 <= v < 2**64:
            raise ConfigError(name, "must be an unsigned 64-bit integer")
        return v
    if name in ("radio_range", "loss_prob", "duration_ms"):
        return _num(text, name)
    if name == "area":
        return _pair(text, name, r"\s*[x×,]\s*")
    if name == "hop_latency":
        return _pair(text, name, r"\s*,\s*")
    if name == "root":
        return None if text.lower() == "random" else _int(text, name)
    if name == "function":
        try:
            return MonitorFunction.parse(text)
        except AggregationError as exc:
            raise ConfigError(name, str(exc)) from None
    if name == "placement":
        if text.startswith("explicit"):
            m = re.match(r"^explicit\s*\((.*)\)\s*$", text, re.S)
            if not m:
                raise ConfigError(name, f"cannot parse {text!r}")
            pts = [_pair(p, name, r"\s*,\s*") for p in m.group(1).split(";") if p.strip()]
            return Explicit(tuple(pts))
        kind, args = _call(text, name)
        if kind == "grid":
            return Grid(_num(args[0], name) if args else 100.0)
        if kind == "random":
            return UniformRandom()
        raise ConfigError(name, f"unknown placement {kind!r}")
    if name == "mobility":
        kind, args = _call(text, name)
        if kind == "none":
            return NoMobility()
        if kind == "rwp":
            if not args:
                raise ConfigError(name, "rwp needs a speed")
            vals = [_num(a, name) for a in args]
            return RandomWaypoint(*vals[:3])
        raise ConfigError(name, f"unknown mobility {kind!r}")
    if name == "observation_source":
        kind, args = _call(text, name)
        if kind == "constant" and len(args) == 1:
            return Constant(_num(args[0], name))
        if kind == "seeded_random":
            return SeededRandom(*[_num(a, name) for a in args]) if args else SeededRandom()
        if kind == "seeded_int":
            return SeededInt(*[_int(a, name) for a in args]) if args else SeededInt()
        raise ConfigError(name, f"unknown observation source {text!r}")
    if name == "script":
        out = []
        for item in text.split(";"):
            if not item.strip():
                continue
            m = re.match(r"^\s*([^@\s]+)\s*@\s*(\d+)\s*:\s*(.+)$", item)
            if not m:
                raise ConfigError(name, f"expected '<t_ms>@<node>:<x>,<y>', got {item!r}")
            x, y = _pair(m.group(3), name, r"\s*,\s*")
            out.append(Teleport(_num(m.group(1), name), int(m.group(2)), x, y))
        return tuple(out)
    raise ConfigError(name, "unknown field")


def _g(v: float) -> str:
    return repr(float(v)) if float(v) != int(v) else str(int(v))


def format_value(name: str, v) -> str:
    if name == "area":
        return f"{_g(v[0])}x{_g(v[1])}"
    if name == "hop_latency":
        return f"{_g(v[0])}, {_g(v[1])}"
    if name == "root":
        return "random" if v is None else str(v)
    if name == "function":
        return str(v)
    if name == "placement":
        if isinstance(v, Grid):
            return f"grid({_g(v.spacing)})"
        if isinstance(v, UniformRandom):
            return "random"
        return "explicit(" + "; ".join(f"{_g(x)},{_g(y)}" for x, y in v.positions) + ")"
    if name == "mobility":
        if isinstance(v, NoMobility):
            return "none"
        return f"rwp({_g(v.speed)}, {_g(v.pause_s)}, {_g(v.tick_ms)})"
    if name == "observation_source":
        if isinstance(v, Constant):
            return f"constant({_g(v.value)})"
        if isinstance(v, SeededInt):
            return f"seeded_int({v.low}, {v.high})"
        return f"seeded_random({_g(v.low)}, {_g(v.high)})"
    if name == "script":
        return "; ".join(f"{_g(t.t_ms)}@{t.node}:{_g(t.x)},{_g(t.y)}" for t in v)
    if isinstance(v, float):
        return _g(v)
    return str(v)


def format_config(cfg: ScenarioConfig) -> str:
    return "".join(f"{name} = {format_value(name, getattr(cfg, name))}\n"
                   for name in CONFIG_FIELDS)


def parse_config(text: str) -> SweepSpec:
    """Parse a config file into a sweep (a single run is a 1-variant sweep)."""
    values: dict = {}
    vary: list[tuple[str, tuple]] = []
    repetitions = 1
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}", f"expected 'key = value', got {raw.strip()!r}")
        key, _, value = (s.strip() for s in line.partition("="))
        if key == "repetitions":
            repetitions = _int(value, key)
            if repetitions < 1:
                raise ConfigError(key, "must be >= 1")
        elif key.startswith("vary."):
            name = key[5:]
            if name not in CONFIG_FIELDS:
                raise ConfigError(key, "unknown field")
            vary.append((name, tuple(_parse_value(name, v) for v in value.split("|"))))
        elif key in CONFIG_FIELDS:
            values[key] = _parse_value(key, value)
        else:
            raise ConfigError(key, "unknown field")
    base = ScenarioConfig(**values)
    spec = SweepSpec(base, tuple(vary), repetitions, base.seed)
    if not vary:
        base.validate()
    return spec


def load_config(path) -> SweepSpec:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())
