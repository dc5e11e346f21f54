import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from manetmon.simulator import (
    ConfigError, Constant, Explicit, Grid, Motion, RandomWaypoint, ScenarioConfig, SweepSpec,
    Teleport, UniformRandom, adjacency, format_config, parse_config, place_grid, place_random,
    routed_path, rwp_step, run, simulate,
)

STATIC = dataclasses.replace(ScenarioConfig(), hop_latency=(2.0, 2.0))


# -- placement and radio ------------------------------------------------------

def test_grid_25():
    pos = place_grid(25, 100.0, (500.0, 500.0))
    assert pos.shape == (25, 2)
    assert tuple(pos[0]) == (0.0, 0.0) and tuple(pos[-1]) == (400.0, 400.0)
    assert tuple(pos[5]) == (0.0, 100.0)


def test_grid_truncated_row_major():
    pos = place_grid(10, 100.0, (500.0, 500.0))
    expected = [(x * 100.0, y * 100.0) for y in range(4) for x in range(4)][:10]
    assert [tuple(p) for p in pos] == expected


def test_grid_edge_cases():
    assert [tuple(p) for p in place_grid(1, 100.0, (10.0, 10.0))] == [(0.0, 0.0)]
    with pytest.raises(ConfigError):
        place_grid(100, 100.0, (500.0, 500.0))


def test_random_placement():
    a = place_random(1000, (500.0, 500.0), np.random.default_rng(7))
    b = place_random(1000, (500.0, 500.0), np.random.default_rng(7))
    assert np.array_equal(a, b)
    mean = a.mean(axis=0)
    assert np.all(np.abs(mean - 250.0) <= 0.05 * 250.0)
    assert place_random(0, (500.0, 500.0), np.random.default_rng(0)).shape == (0, 2)


def test_grid_adjacency_is_four_neighbourhood():
    adj = adjacency(place_grid(25, 100.0, (500.0, 500.0)), 125.0)
    assert adj[0] == [1, 5]
    assert adj[12] == [7, 11, 13, 17]
    assert all(i not in row for i, row in enumerate(adj))
    assert all(i in adj[j] for i, row in enumerate(adj) for j in row)


def test_adjacency_boundary():
    pos = np.array([[0.0, 0.0], [126.0, 0.0], [125.0, 0.0]])
    adj = adjacency(pos, 125.0)
    assert 1 not in adj[0] and 2 in adj[0]


def test_routed_path():
    line = [[1], [0, 2], [1]]
    assert routed_path(line, 0, 2) == [0, 1, 2]
    assert routed_path([[1], [0], []], 0, 2) is None
    grid = adjacency(place_grid(25, 100.0, (500.0, 500.0)), 125.0)
    path = routed_path(grid, 0, 24)
    assert len(path) - 1 == 8
    assert path == [0, 1, 2, 3, 4, 9, 14, 19, 24]  # lowest-index tie break


# -- mobility -------------------------------------------------------------------

def test_rwp_displacement():
    m = Motion(0.0, 0.0, 100.0, 0.0)
    out = rwp_step(m, 0.1, 2.0, (500.0, 500.0), np.random.default_rng(0))
    assert math.isclose(out.x, 0.2) and out.y == 0.0


def test_rwp_two_segment_step():
    rng = np.random.default_rng(3)
    m = Motion(0.0, 0.0, 0.1, 0.0)
    nxt = np.random.default_rng(3).uniform(0.0, 500.0, size=2)
    out = rwp_step(m, 0.1, 2.0, (500.0, 500.0), rng)
    # 0.1 m to the waypoint, then 0.1 m toward the next one
    d = np.array([nxt[0] - 0.1, nxt[1]])
    want = np.array([0.1, 0.0]) + d / np.linalg.norm(d) * 0.1
    assert np.allclose([out.x, out.y], want)
    assert (out.wx, out.wy) == tuple(nxt)


def test_rwp_pause():
    m = Motion(0.0, 0.0, 0.1, 0.0)
    out = rwp_step(m, 0.1, 2.0, (500.0, 500.0), np.random.default_rng(1), pause_s=1.0)
    assert (out.x, out.y) == (0.1, 0.0) and math.isclose(out.pause_left, 0.95)


def test_rwp_rejects_zero_speed():
    with pytest.raises(ValueError):
        rwp_step(Motion(0, 0, 1, 1), 0.1, 0.0, (10, 10), np.random.default_rng(0))
    with pytest.raises(ConfigError):
        ScenarioConfig(mobility=RandomWaypoint(0.0)).validate()


@settings(max_examples=50, deadline=None)
@given(st.floats(0.1, 20.0), st.floats(0.01, 2.0), st.integers(0, 10**6))
def test_rwp_stays_in_area_and_moves_at_speed(speed, dt, seed):
    rng = np.random.default_rng(seed)
    m = Motion(10.0, 10.0, 300.0, 200.0)
    out = rwp_step(m, dt, speed, (500.0, 500.0), rng)
    assert 0 <= out.x <= 500 and 0 <= out.y <= 500
    assert math.hypot(out.x - m.x, out.y - m.y) <= speed * dt + 1e-9


# -- engine -----------------------------------------------------------------------

def test_static_grid_two_n_messages_and_all_initial():
    m, _ = run(STATIC)
    assert m.converged and m.nodes_reached == 25
    assert m.messages_total == 50
    assert m.messages_by_type["Query"] == 25 and m.messages_by_type["Aggregate"] == 25
    assert m.final_states["Initial"] == 25
    assert m.observations == 25


def test_verdict_matches_oracle():
    res = simulate(STATIC)
    value, obs = res.metrics.verdict
    assert math.isclose(value, sum(res.observations) / 25, rel_tol=1e-9)
    assert math.isclose(value, res.metrics.oracle_value, rel_tol=1e-9)


def test_isolated_root():
    cfg = dataclasses.replace(STATIC, radio_range=10.0)
    res = simulate(cfg)
    assert res.metrics.verdict == (res.observations[0], 1)
    assert abs(res.metrics.convergence_ms - cfg.timeout_ms) < 1e-9


def test_determinism():
    cfg = dataclasses.replace(STATIC, placement=UniformRandom(), mobility=RandomWaypoint(5.0),
                              root=None, seed=11)
    a, ta = run(cfg)
    b, tb = run(cfg)
    assert ta == tb and a == b


def test_trace_causality():
    import json
    _, lines = run(dataclasses.replace(STATIC, seed=3, root=None))
    recs = [json.loads(x) for x in lines]
    ts = [r["t"] for r in recs]
    assert ts == sorted(ts)
    sent = set()
    for r in recs:
        if r["kind"] == "send":
            sent.add(r["info"]["id"])
        elif r["kind"] in ("deliver", "drop"):
            assert r["info"]["id"] in sent
    assert sum(1 for r in recs if r["kind"] == "vht") == 1


def test_loss_is_recorded_and_seeded():
    cfg = dataclasses.replace(STATIC, loss_prob=0.3, seed=5)
    a, ta = run(cfg)
    assert any('"drop"' in x for x in ta)
    assert run(cfg)[1] == ta


def test_root_drawn_from_seed():
    roots = {simulate(dataclasses.replace(STATIC, root=None, seed=s), trace=False).root
             for s in range(20)}
    assert len(roots) > 3


def test_teleport_script_moves_node():
    cfg = ScenarioConfig(node_count=2, placement=Explicit(((0, 0), (100, 0))),
                         script=(Teleport(0.5, 1, 5000.0, 0.0),), area=(6000.0, 500.0))
    res = simulate(cfg)
    assert any('"teleport"' in x for x in res.trace)
    # the query (2 ms) never reaches node 1, which left at 0.5 ms
    assert res.metrics.verdict[1] == 1


def test_converged_within_duration():
    cfg = dataclasses.replace(STATIC, duration_ms=100.0)
    m, _ = run(cfg)
    assert not m.converged and m.convergence_ms is None


def test_constant_observations():
    cfg = dataclasses.replace(STATIC, observation_source=Constant(7.0))
    assert simulate(cfg, trace=False).metrics.verdict == (7.0, 25)


# -- config -------------------------------------------------------------------------

def test_config_round_trip():
    cfg = dataclasses.replace(STATIC, placement=Explicit(((0, 0), (1.5, 2))), node_count=2,
                              script=(Teleport(100.0, 1, 5.0, 6.0),), root=None,
                              mobility=RandomWaypoint(2.0, 1.0, 50.0))
    spec = parse_config(format_config(cfg))
    assert spec.base == cfg


def test_config_errors_name_field():
    with pytest.raises(ConfigError) as e:
        parse_config("node_count = zero\n")
    assert e.value.field == "node_count"
    with pytest.raises(ConfigError) as e:
        parse_config("colour = red\n")
    assert e.value.field == "colour"
    with pytest.raises(ConfigError) as e:
        parse_config("loss_prob = 1.5\n")
    assert e.value.field == "loss_prob"


def test_sweep_variants_and_seeds():
    spec = parse_config("seed = 10\nvary.node_count = 4 | 9\nvary.area = 500x500 | 800x800\n"
                        "repetitions = 3\n")
    vs = spec.variants()
    assert [(v.node_count, v.area) for v in vs] == [
        (4, (500.0, 500.0)), (4, (800.0, 800.0)), (9, (500.0, 500.0)), (9, (800.0, 800.0))]
    seeds = {spec.seed_for(v, k) for v in range(4) for k in range(3)}
    assert len(seeds) == 12 and spec.seed_for(0, 0) == 10
    assert isinstance(spec, SweepSpec)
