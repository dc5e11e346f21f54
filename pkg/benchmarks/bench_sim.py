"""Wall-clock timing of single runs and of the exhaustive check."""

import argparse
import dataclasses
import time

from manetmon.explore import check_all
from manetmon.simulator import Grid, ScenarioConfig, simulate


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--nodes", type=int, nargs="+", default=[25, 100, 400])
    ap.add_argument("--runs", type=int, default=10)
    ap.add_argument("--explore", type=int, default=0, metavar="N",
                    help="also time the exhaustive check up to N nodes")
    args = ap.parse_args()
    for n in args.nodes:
        side = 100.0 * (int(n ** 0.5) + 1)
        cfg = ScenarioConfig(node_count=n, area=(side, side), placement=Grid(100.0), root=None)
        t0 = time.perf_counter()
        for s in range(args.runs):
            simulate(dataclasses.replace(cfg, seed=s), trace=False)
        dt = (time.perf_counter() - t0) / args.runs
        print(f"grid n={n:4d}: {dt * 1000:8.2f} ms/run")
    if args.explore:
        t0 = time.perf_counter()
        res = check_all(args.explore)
        print(f"explore <= {args.explore} nodes: {len(res)} cases, "
              f"{sum(r.states for r in res)} states, {time.perf_counter() - t0:.1f}s")


if __name__ == "__main__":
    main()
