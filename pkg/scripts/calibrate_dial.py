"""Score candidate dial layouts against the convergence benchmark.

Each candidate runs the full robots x runs matrix for several seed bases and
reports convergence, own-robot evaluation, zero-shot transfer and the
cross-robot overlap verdict. Used to pick the shipped env defaults.

    python3 scripts/calibrate_dial.py --seeds 3 --pivot-y -9 -12 --target 130 170
"""

from __future__ import annotations

import argparse
import dataclasses
import itertools
import time

from deltaz.bench.config import default_config
from deltaz.bench.runner import CONVERGED, converged_means, run_benchmark, zero_shot_transfer


def score(cfg, seeds):
    conv = runs = evals_ok = transfer_ok = transfer_n = overlaps = passes = 0
    updates = []
    for s in range(seeds):
        c = dataclasses.replace(cfg, seed_base=s)
        summary, results = run_benchmark(c, out=None)
        runs += len(results)
        seed_conv = seed_eval = 0
        for r in results:
            if r.curve.status == CONVERGED:
                seed_conv += 1
                updates.append(r.curve.updates)
                seed_eval += r.eval_successes >= 0.95 * r.eval_episodes
        entries = zero_shot_transfer(c, converged_means(results))
        seed_transfer = sum(e.success for e in entries)
        conv += seed_conv
        evals_ok += seed_eval
        transfer_ok += seed_transfer
        transfer_n += len(entries)
        overlaps += summary.all_overlap
        # every acceptance check on the benchmark for this seed base
        passes += (seed_conv >= 20 and seed_eval == seed_conv and seed_transfer == len(entries)
                   and summary.all_overlap)
    return dict(passes=f"{passes}/{seeds}", conv=conv, runs=runs, eval_ok=evals_ok,
                transfer=f"{transfer_ok}/{transfer_n}",
                overlap=f"{overlaps}/{seeds}", mean_updates=round(sum(updates) / max(1, len(updates)), 1),
                max_updates=max(updates, default=0))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, default=1, help="number of seed bases per candidate")
    ap.add_argument("--pivot-y", type=float, nargs="+", default=[-18.0])
    ap.add_argument("--target", type=float, nargs="+", default=[170.0])
    ap.add_argument("--lever", type=float, nargs="+", default=[12.0])
    ap.add_argument("--radius", type=float, nargs="+", default=[4.0], help="effector contact radius")
    ap.add_argument("--width", type=float, nargs="+", default=[2.0], help="lever width")
    ap.add_argument("--start", type=float, nargs="+", default=[45.0])
    ap.add_argument("--epsilon", type=float, nargs="+", default=[1.0])
    ap.add_argument("--cov-floor", type=float, nargs="+", default=[1e-6])
    args = ap.parse_args(argv)

    base = default_config()
    rows = []
    grid = itertools.product(args.pivot_y, args.target, args.lever, args.width, args.radius, args.start,
                             args.epsilon, args.cov_floor)
    for py, tgt, lever, width, radius, start, eps, floor in grid:
        env = dataclasses.replace(base.env, pivot=(base.env.pivot[0], py), target_angle=tgt, lever_length=lever,
                                  lever_width=width, effector_radius_contact=radius, start_angle=start)
        cfg = dataclasses.replace(base, env=env, reps=dataclasses.replace(base.reps, epsilon=eps, cov_floor=floor))
        t0 = time.perf_counter()
        res = score(cfg, args.seeds)
        res.update(pivot_y=py, target=tgt, lever=lever, width=width, radius=radius, start=start, epsilon=eps,
                   cov_floor=floor, secs=round(time.perf_counter() - t0, 1))
        print(res, flush=True)
        rows.append(res)
    print("\nbest first:")
    for r in sorted(rows, key=lambda r: (-int(r["passes"].split("/")[0]), -r["conv"], -r["eval_ok"], r["mean_updates"])):
        print(r)


if __name__ == "__main__":
    main()
