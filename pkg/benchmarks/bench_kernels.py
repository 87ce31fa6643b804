#!/usr/bin/env python3
"""Compiled vs numpy rollout-cost kernel, plus end-to-end solve timings.

    python benchmarks/bench_kernels.py [--repeat 20] [--json out.json]
"""

from __future__ import annotations

import argparse
import json
import statistics
import time
from pathlib import Path

import numpy as np

from scpmppi import config, kernels, solver, world

SOLVER_YAML = Path(__file__).resolve().parents[1] / "configs" / "solver.yaml"


def _time(fn, repeat: int) -> float:
    fn()  # warm up
    samples = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        samples.append(time.perf_counter() - t0)
    return statistics.median(samples)


def kernel_rows(repeat: int):
    rng = np.random.default_rng(0)
    Q = np.diag([1.0, 1.0, 100.0])
    R = np.zeros((3, 3))
    compiled = kernels.compiled_rollout_costs()
    rows = []
    for n_rollouts in (50, 1250):
        for n_obs in (0, 8, 24):
            U = rng.normal(scale=0.3, size=(n_rollouts, 150, 3))
            obs = np.column_stack([rng.uniform(0, 20, n_obs), rng.uniform(0, 15, n_obs),
                                   np.full(n_obs, 0.75)])
            args = (np.array([1.0, 7.5, 1.0]), U, np.array([19.0, 7.5, 1.0]), Q, R, 2.0, 1000.0,
                    1.0, 0.1, obs, 0.25, 0.01, 100.0, 1e6)
            py = _time(lambda: kernels.python_rollout_costs(*args), repeat)
            row = {"rollouts": n_rollouts, "obstacles": n_obs, "python_ms": 1e3 * py}
            if compiled is not None:
                cy = _time(lambda: compiled(*args), repeat)
                c_ref, _ = kernels.python_rollout_costs(*args)
                c_cy, _ = compiled(*args)
                row.update(cython_ms=1e3 * cy, speedup=py / cy,
                           max_rel_diff=float(np.max(np.abs(c_cy - c_ref) / np.abs(c_ref))))
            rows.append(row)
    return rows


def solve_rows(repeat: int):
    env = world.generate_forest(world.density_for("high"), seed=3)
    sensed = world.integrate_scan(world.SensedObstacles(),
                                  world.lidar_scan(env.start_array, env), env)
    base = config.load_config(SOLVER_YAML)
    rows = []
    for variant, L in (("MPPI", 0), ("SCP_NO_SVGD", 0), ("SCP_SVGD", 1), ("SCP_SVGD", 3)):
        values = {"variant": variant, "L": L}
        if variant == "MPPI":
            values["M"] = base.T
        cfg = config.config_from_mapping(values, base)
        warm = solver.cold_start(cfg)
        seeds = iter(range(10 ** 6))
        t = _time(lambda: solver.solve(env.start_array, env.goal_array, sensed, warm, cfg,
                                       next(seeds)), repeat)
        rows.append({"variant": variant, "L": cfg.effective_L, "solve_ms": 1e3 * t,
                     "rate_hz": 1.0 / t})
    return rows


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=20)
    parser.add_argument("--json")
    args = parser.parse_args()

    print(f"active backend: {kernels.BACKEND}")
    krows = kernel_rows(args.repeat)
    print(f"{'rollouts':>8} {'obst':>5} {'python ms':>10} {'cython ms':>10} {'speedup':>8} {'max rel diff':>13}")
    for r in krows:
        print(f"{r['rollouts']:>8} {r['obstacles']:>5} {r['python_ms']:>10.2f} "
              f"{r.get('cython_ms', float('nan')):>10.3f} {r.get('speedup', float('nan')):>8.1f} "
              f"{r.get('max_rel_diff', float('nan')):>13.2e}")
    srows = solve_rows(args.repeat)
    print(f"\n{'variant':>12} {'L':>2} {'solve ms':>9} {'rate Hz':>8}")
    for r in srows:
        print(f"{r['variant']:>12} {r['L']:>2} {r['solve_ms']:>9.2f} {r['rate_hz']:>8.1f}")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump({"backend": kernels.BACKEND, "kernel": krows, "solve": srows}, fh, indent=2)


if __name__ == "__main__":
    main()
