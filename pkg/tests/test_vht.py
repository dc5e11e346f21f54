import pytest

from manetmon import protocol as P
from manetmon.simulator import Grid, ScenarioConfig, simulate
from manetmon.vht import VhtSnapshot, advertise_relay_set, depths, extract_vht, is_spanning, \
    validate_tree


def ctx(addr, parent=None, relays=(), root=False):
    return P.NodeCtx(addr, is_root=root, parent=parent, own_relay_set=tuple(relays))


def test_advertise_examples():
    assert advertise_relay_set(ctx("n", "p", ("g", "gg"))) == ("p", "g", "gg")
    assert advertise_relay_set(ctx("r", root=True)) == ()
    assert advertise_relay_set(ctx("n", "p")) == ("p",)
    assert advertise_relay_set(ctx("n", "p", ("g", "gg", "ggg"))) == ("p", "g", "gg")
    # never lists the node itself and never repeats an entry
    assert advertise_relay_set(ctx("n", "p", ("n", "p", "g"))) == ("p", "g")


def test_extract_single_node():
    s = extract_vht([ctx("r", root=True)])
    assert s.edges == frozenset() and s.unreached == frozenset()
    assert validate_tree(s) == []
    assert is_spanning(s, ["r"])


def test_extract_requires_root():
    with pytest.raises(ValueError):
        extract_vht([ctx("a")])


def test_two_cycle_one_violation():
    s = VhtSnapshot("r", frozenset({("a", "b"), ("b", "a"), ("c", "r")}))
    v = validate_tree(s)
    assert len(v) == 1 and "cycle" in v[0]


def test_node_hanging_off_cycle_reported():
    s = VhtSnapshot("r", frozenset({("a", "b"), ("b", "a"), ("c", "a")}))
    v = validate_tree(s)
    assert any("cycle" in x for x in v) and any("c hangs off" in x for x in v)


def test_radio_edge_violation():
    s = VhtSnapshot("r", frozenset({("a", "r")}))
    assert len(validate_tree(s, {"a": set()})) == 1
    assert validate_tree(s, {"a": {"r"}}) == []


def test_other_structural_violations():
    assert validate_tree(VhtSnapshot("r", frozenset({("r", "a")})))
    assert validate_tree(VhtSnapshot("r", frozenset({("a", "a")})))
    assert validate_tree(VhtSnapshot("r", frozenset({("a", "r"), ("a", "b")})))
    assert validate_tree(VhtSnapshot("r", frozenset({("a", "x")})))
    late = VhtSnapshot("r", frozenset({("a", "r"), ("b", "a")}), adopted_at={"a": 4, "b": 2})
    assert validate_tree(late)


def test_depths():
    s = VhtSnapshot("r", frozenset({("a", "r"), ("b", "a"), ("c", "b")}))
    assert depths(s) == {"r": 0, "a": 1, "b": 2, "c": 3}


def test_json_round_trip():
    s = VhtSnapshot("r", frozenset({("a", "r")}), frozenset({"z"}), {"a": 2.0})
    assert VhtSnapshot.from_json_obj(s.to_json_obj()) == s


def test_ten_node_grid_spans():
    res = simulate(ScenarioConfig(node_count=10, placement=Grid(100.0)), trace=False)
    s = res.vht
    assert s.unreached == frozenset()
    assert is_spanning(s, res.addrs)
    assert validate_tree(s, res.adjacency_at_adoption) == []


def test_partition_reports_unreached():
    # two 2x1 clusters 1 km apart; root in the first
    from manetmon.simulator import Explicit
    cfg = ScenarioConfig(node_count=4, area=(2000.0, 500.0),
                         placement=Explicit(((0, 0), (100, 0), (1000, 0), (1100, 0))))
    res = simulate(cfg, trace=False)
    assert res.vht.unreached == {res.addrs[2], res.addrs[3]}
    assert validate_tree(res.vht) == []
