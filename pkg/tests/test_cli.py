import csv
import io
import json

from manetmon.cli import main, plan_runs, run_scenario
from manetmon.simulator.config import parse_config

SMALL = """\
placement = grid(100)
root = random
vary.node_count = 4 | 9 | 49
vary.area = 500x500 | 800x800
repetitions = 3
seed = 5
"""


def write(tmp_path, text=SMALL, name="s.cfg"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_run_writes_outputs(tmp_path, capsys):
    cfg = write(tmp_path)
    out = tmp_path / "out"
    assert main([str(cfg), "--out", str(out), "--trace"]) == 0
    printed = capsys.readouterr()
    assert printed.out.count("variant") == 5  # 49 nodes do not fit 500x500
    assert "skipping variant 4" in printed.err
    rows = list(csv.DictReader(open(out / "runs.csv")))
    assert len(rows) == 15 and {r["node_count"] for r in rows} == {"4", "9", "49"}
    summ = json.loads((out / "summary.json").read_text())
    assert [s["runs"] for s in summ] == [3] * 5
    assert len(list((out / "traces").glob("*.jsonl"))) == 15
    assert main(["--replay", str(out / "traces" / "v000_r0000.jsonl")]) == 0


def test_same_seed_identical_outputs(tmp_path):
    cfg = write(tmp_path)
    a, b = tmp_path / "a", tmp_path / "b"
    assert main([str(cfg), "--out", str(a), "--seed", "42", "--trace"]) == 0
    assert main([str(cfg), "--out", str(b), "--seed", "42", "--trace", "--jobs", "2"]) == 0
    for name in ("runs.csv", "summary.csv", "summary.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    for t in sorted((a / "traces").iterdir()):
        assert t.read_bytes() == (b / "traces" / t.name).read_bytes()
    c = tmp_path / "c"
    main([str(cfg), "--out", str(c), "--seed", "43"])
    assert (a / "runs.csv").read_bytes() != (c / "runs.csv").read_bytes()


def test_config_error_names_field(tmp_path):
    err = io.StringIO()
    cfg = write(tmp_path, "radio_range = -3\n")
    assert run_scenario(cfg, tmp_path / "o", err=err, out=io.StringIO()) == 2
    assert "radio_range" in err.getvalue()
    err = io.StringIO()
    assert run_scenario(tmp_path / "missing.cfg", tmp_path / "o", err=err) == 2
    assert "not found" in err.getvalue()


def test_all_variants_invalid_is_error(tmp_path):
    err = io.StringIO()
    cfg = write(tmp_path, "vary.node_count = 100 | 200\narea = 500x500\n")
    assert run_scenario(cfg, tmp_path / "o", err=err, out=io.StringIO()) == 2
    assert "placement" in err.getvalue()


def test_replay_flags_corruption(tmp_path, capsys):
    bad = tmp_path / "t.jsonl"
    bad.write_text('{"t":0,"node":null,"kind":"config","payload":null}\nnot json\n')
    assert main(["--replay", str(bad)]) == 1
    assert "line 2" in capsys.readouterr().err
    assert main(["--replay", str(tmp_path / "nope.jsonl")]) == 2


def test_plan_seeds(scenarios):
    spec = parse_config((scenarios / "scenario2.cfg").read_text())
    plan = plan_runs(spec)
    assert len(plan) == 80
    assert len({c.seed for _, _, c in plan}) == 80


def test_presets_parse(scenarios):
    s1 = parse_config((scenarios / "scenario1.cfg").read_text())
    assert dict(s1.vary)["node_count"] == (10, 20, 25, 40, 50, 60, 75, 80, 100)
    assert s1.repetitions == 200
    assert len(dict(s1.vary)["area"]) == 3
    s2 = parse_config((scenarios / "scenario2.cfg").read_text())
    assert [m.speed for m in dict(s2.vary)["mobility"]] == [2.0, 5.0]
    assert s2.repetitions == 40


def test_requires_config(capsys):
    import pytest
    with pytest.raises(SystemExit):
        main([])
