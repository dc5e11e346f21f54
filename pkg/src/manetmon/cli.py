"""Command-line driver: run scenario sweeps or re-check a recorded trace.

Outputs written to ``--out``:

``runs.csv``       one row per run (see :data:`manetmon.metrics.RUN_COLUMNS`)
``summary.csv``    one row per variant
``summary.json``   the same summaries as JSON
``traces/``        ``v<variant>_r<repetition>.jsonl`` when ``--trace`` is given
"""

from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace

from . import __version__
from .metrics import RunRow, export_csv, export_summary_csv, summarize, summary_json
from .replay import replay_file
from .simulator.config import ConfigError, ScenarioConfig, SweepSpec, format_value, load_config
from .simulator.engine import simulate

__all__ = ["main", "build_parser", "plan_runs", "run_scenario"]


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="manetmon",
        description="Simulate epidemic query / convergecast monitoring rounds on a MANET.")
    p.add_argument("config", nargs="?", help="scenario file (key = value lines)")
    p.add_argument("--out", default="out", help="output directory (default: %(default)s)")
    p.add_argument("--seed", type=int, default=None,
                   help="base seed for the sweep, overriding the file's seed")
    p.add_argument("--trace", action="store_true", help="write a JSONL trace per run")
    p.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    p.add_argument("--replay", metavar="TRACE", help="re-validate a recorded trace and exit")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    return p


def plan_runs(spec: SweepSpec, err=None) -> list[tuple[int, int, ScenarioConfig]]:
    """Expand a sweep into (variant, repetition, config) triples.

    Variants whose settings are inconsistent (say, a grid that does not fit
    the area) are reported on ``err`` and left out; an error is raised only
    when no variant survives.
    """
    plan = []
    first_error = None
    for v, cfg in enumerate(spec.variants()):
        try:
            cfg.validate()
        except ConfigError as exc:
            first_error = first_error or exc
            if err is not None:
                print(f"skipping variant {v}: {exc}", file=err)
            continue
        for k in range(spec.repetitions):
            plan.append((v, k, replace(cfg, seed=spec.seed_for(v, k))))
    if not plan:
        raise first_error
    return plan


def _run_one(cfg: ScenarioConfig, trace: bool):
    res = simulate(cfg, trace=trace)
    return res.root, res.metrics, res.trace


def _summary_line(v: int, cfg: ScenarioConfig, rows: list[RunRow]) -> str:
    s = summarize(r.metrics for r in rows)
    conv = f"{s.mean_convergence_ms:.1f}" if s.mean_convergence_ms is not None else "-"
    obs = f"{s.mean_observations:.2f}" if s.mean_observations is not None else "-"
    bpm = f"{s.mean_bytes_per_message:.1f}" if s.mean_bytes_per_message is not None else "-"
    return (f"variant {v}: nodes={cfg.node_count} area={format_value('area', cfg.area)} "
            f"mobility={format_value('mobility', cfg.mobility)} runs={s.runs} "
            f"success={s.success_rate:.3f} convergence_ms={conv} observations={obs} "
            f"messages={s.mean_messages:.1f} bytes_per_message={bpm}")


def run_scenario(config_path, out_dir, seed=None, trace=False, jobs=1,
                 out=None, err=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    try:
        spec = load_config(config_path)
        if seed is not None:
            if not 0 <= seed < 2**64:
                raise ConfigError("seed", "must be an unsigned 64-bit integer")
            spec = replace(spec, seed_base=seed)
        plan = plan_runs(spec, err)
    except FileNotFoundError:
        print(f"error: config file not found: {config_path}", file=err)
        return 2
    except ConfigError as exc:
        print(f"config error in field {exc.field!r}: {exc}", file=err)
        return 2

    cfgs = [c for _, _, c in plan]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_one, cfgs, [trace] * len(cfgs), chunksize=4))
    else:
        results = [_run_one(c, trace) for c in cfgs]

    os.makedirs(out_dir, exist_ok=True)
    rows = [RunRow(v, k, c, m, root) for (v, k, c), (root, m, _) in zip(plan, results)]
    export_csv(rows, os.path.join(out_dir, "runs.csv"))
    export_summary_csv(rows, os.path.join(out_dir, "summary.csv"))
    with open(os.path.join(out_dir, "summary.json"), "w", encoding="utf-8") as fh:
        fh.write(summary_json(rows))
    if trace:
        tdir = os.path.join(out_dir, "traces")
        os.makedirs(tdir, exist_ok=True)
        for (v, k, _), (_, _, lines) in zip(plan, results):
            with open(os.path.join(tdir, f"v{v:03d}_r{k:04d}.jsonl"), "w",
                      encoding="utf-8", newline="\n") as fh:
                fh.writelines(line + "\n" for line in lines)

    by_variant: dict[int, list[RunRow]] = {}
    for r in rows:
        by_variant.setdefault(r.variant, []).append(r)
    for v in sorted(by_variant):
        print(_summary_line(v, by_variant[v][0].config, by_variant[v]), file=out)
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.replay:
        try:
            report = replay_file(args.replay)
        except OSError as exc:
            print(f"error: cannot read trace: {exc}", file=sys.stderr)
            return 2
        print(report, file=sys.stdout if report.ok else sys.stderr)
        return 0 if report.ok else 1
    if not args.config:
        parser.error("a config file is required unless --replay is given")
    if args.jobs < 1:
        parser.error("--jobs must be at least 1")
    return run_scenario(args.config, args.out, args.seed, args.trace, args.jobs)


if __name__ == "__main__":
    sys.exit(main())
