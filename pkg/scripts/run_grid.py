#!/usr/bin/env python3
"""Full objective-test grid (linear or nonlinear) with JSON results and plot CSV.

    python3 scripts/run_grid.py --scenario linear --songs 30 --out results/linear
    python3 scripts/run_grid.py --scenario nonlinear --songs 30 --out results/nonlinear

Writes ``<out>.json`` (one object per cell) and ``<out>.csv`` (scenario, task,
method, r, s, median_e) and prints a compact median table.
"""

import argparse
import csv
import json
import logging
import time
import warnings
from pathlib import Path

from singalign.benchmark import LINEAR_RATES, METHODS, SHIFTS, TASKS, ExperimentConfig, results_to_plot_rows, run_experiment


def table(results):
    cols = sorted({(c.r, c.s) for c in results}, key=lambda k: (k[0] or 0, k[1]))
    head = " ".join(f"{('r=%.1f ' % r if r else '')}s={s:+d}".rjust(14) for r, s in cols)
    lines = [f"{'task/method':28s}{head}"]
    for task in TASKS:
        for m in METHODS:
            row = {(c.r, c.s): c.median_e for c in results if c.task == task and c.method == m}
            if row:
                vals = " ".join(("%.2f" % row[k] if row.get(k) is not None else "fail").rjust(14) for k in cols)
                lines.append(f"{task + '/' + m:28s}{vals}")
    return "\n".join(lines)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--scenario", choices=("linear", "nonlinear"), default="linear")
    ap.add_argument("--songs", type=int, default=30)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--duration", type=float, default=30.0)
    ap.add_argument("--rates", type=float, nargs="+", default=list(LINEAR_RATES))
    ap.add_argument("--shifts", type=int, nargs="+", default=list(SHIFTS))
    ap.add_argument("--workers", type=int, default=0)
    ap.add_argument("--out", default="results/grid")
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")

    cfg = ExperimentConfig(scenario=args.scenario, rates=tuple(args.rates), shifts=tuple(args.shifts),
                           n_songs=args.songs, seed=args.seed, duration_s=args.duration)
    t0 = time.time()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        results = run_experiment(cfg, workers=args.workers or None)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.with_suffix(".json").write_text(json.dumps([c.to_dict() for c in results], indent=2, sort_keys=True) + "\n")
    with open(out.with_suffix(".csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["scenario", "task", "method", "r", "s", "median_e"])
        w.writerows(results_to_plot_rows(results))
    print(table(results))
    print(f"{len(results)} cells in {time.time() - t0:.0f} s -> {out.with_suffix('.json')}")


if __name__ == "__main__":
    main()
