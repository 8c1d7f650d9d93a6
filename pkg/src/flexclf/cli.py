"""Command-line interface: run / map / bench with bit-stable file emission.

Exit codes: 0 success, 1 tool or config error, 2 classical-run abort
(the decrease condition became infeasible), so scripts sweeping many runs
can detect conservativeness without parsing output.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
import time
from pathlib import Path

import numpy as np

from . import __version__
from .config import Config, build_grid, build_scenario, parse_config
from .controller import FlexibleController
from .errors import FlexclfError
from .sim import (
    FeasibilityMap,
    Scenario,
    TrajectoryLog,
    feasibility_map,
    nearest_rank,
    run_closed_loop,
)


def _atomic_write(path: Path, text: str) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _fmt(value: float) -> str:
    return repr(float(value))


def trajectory_csv(log: TrajectoryLog, n: int, m: int) -> str:
    header = (
        ["k", "t"]
        + [f"x_{i}" for i in range(n)]
        + [f"u_{i}" for i in range(m)]
        + ["lambda", "V", "lambda_bar", "cert_bound", "status",
           "solve_time_us"]
    )
    lines = [",".join(header)]
    for r in log.records:
        cells = [str(r.k), _fmt(r.t)]
        cells += [_fmt(v) for v in r.x]
        cells += [_fmt(v) for v in r.u]
        cells += [
            _fmt(r.lam),
            _fmt(r.v),
            _fmt(r.lam_bar),
            _fmt(r.cert_bound),
            r.status.value,
            _fmt(r.solve_time_us),
        ]
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def feasibility_csv(fmap: FeasibilityMap) -> str:
    dims = fmap.grid.lo.shape[0]
    header = (
        [f"idx_{i}" for i in range(dims)]
        + [f"x0_{i}" for i in range(dims)]
        + ["class"]
    )
    lines = [",".join(header)]
    indices = fmap.grid.indices()
    for row, x0, label in zip(indices, fmap.x0s, fmap.classes):
        cells = [str(int(i)) for i in row]
        cells += [_fmt(v) for v in x0]
        cells.append(label)
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def _write_json(path: Path, payload: dict) -> None:
    _atomic_write(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _summary_payload(summary) -> dict:
    return {
        "converged": summary.converged,
        "steps_to_tol": summary.steps_to_tol,
        "peak_state": [float(v) for v in summary.peak_state],
        "total_slack": summary.total_slack,
        "infeasible_steps": summary.infeasible_steps,
        "first_infeasible_step": summary.first_infeasible_step,
        "certificate_valid": summary.certificate_valid,
        "aborted": summary.aborted,
        "solve_time_us": {
            "median": summary.solve_time_median_us,
            "p95": summary.solve_time_p95_us,
            "p99": summary.solve_time_p99_us,
            "max": summary.solve_time_max_us,
        },
    }


def cmd_run(config: Config, out_dir: Path) -> int:
    scenario, resolved = build_scenario(config)
    log, summary = run_closed_loop(scenario)
    _atomic_write(
        out_dir / "trajectory.csv",
        trajectory_csv(log, scenario.model.n, scenario.model.m),
    )
    _write_json(
        out_dir / "summary.json",
        {"command": "run", "config": resolved,
         "summary": _summary_payload(summary)},
    )
    return 2 if summary.aborted else 0


def cmd_map(config: Config, out_dir: Path, jobs: int = 1) -> int:
    scenario, resolved = build_scenario(config)
    grid = build_grid(config)
    base = Scenario(
        model=scenario.model,
        controller=scenario.controller,
        x0=scenario.x0,
        steps=config.map["steps"],
        ts=scenario.ts,
        convergence_tol=scenario.convergence_tol,
        seed=scenario.seed,
    )
    fmap = feasibility_map(base, grid, jobs=jobs)
    _atomic_write(out_dir / "feasibility_map.csv", feasibility_csv(fmap))
    _write_json(
        out_dir / "summary.json",
        {
            "command": "map",
            "config": resolved,
            "summary": {
                "cells": len(fmap.classes),
                "classical": fmap.count("classical"),
                "flexible_only": fmap.count("flexible_only"),
                "neither": fmap.count("neither"),
            },
        },
    )
    return 0


def cmd_bench(config: Config, out_dir: Path) -> int:
    """Time controller calls on seeded random states; write latency.json."""
    scenario, _ = build_scenario(config)
    model = scenario.model
    controller = scenario.controller
    flexible = isinstance(controller, FlexibleController)
    reps = config.bench["repetitions"]
    scale = np.asarray(config.bench["state_scale"], dtype=float)
    rng = np.random.default_rng(scenario.seed)
    states = rng.uniform(-1.0, 1.0, size=(reps, model.n)) * scale

    warmup = min(100, reps)
    for i in range(warmup):
        if flexible:
            controller.step(model, states[i], 0)
        else:
            controller.step(model, states[i])

    times = np.empty(reps)
    for i in range(reps):
        x = states[i]
        t0 = time.perf_counter_ns()
        if flexible:
            controller.step(model, x, 0)
        else:
            controller.step(model, x)
        times[i] = (time.perf_counter_ns() - t0) / 1000.0

    budget_us = scenario.ts * 1e6
    p99 = nearest_rank(times, 99)
    _write_json(
        out_dir / "latency.json",
        {
            "median_us": nearest_rank(times, 50),
            "p95_us": nearest_rank(times, 95),
            "p99_us": p99,
            "max_us": float(times.max()),
            "budget_us": budget_us,
            "budget_ok": bool(p99 < budget_us),
        },
    )
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="flexclf",
        description="Classical and flexible CLF controllers: closed-loop "
        "runs, feasibility maps and latency benchmarks.",
    )
    parser.add_argument(
        "--version", action="version", version=f"flexclf {__version__}"
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("run", "simulate one closed-loop scenario"),
        ("map", "classify grid initial states by stabilizing controller"),
        ("bench", "measure per-step controller latency"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="config file (TOML/JSON)")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=int, default=None,
                       help="override run.seed")
        if name == "map":
            p.add_argument("--jobs", type=int, default=1,
                           help="worker threads for grid cells")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        config = parse_config(args.config)
        if args.seed is not None:
            config.run["seed"] = args.seed
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        if args.command == "run":
            return cmd_run(config, out_dir)
        if args.command == "map":
            return cmd_map(config, out_dir, jobs=max(1, args.jobs))
        return cmd_bench(config, out_dir)
    except FlexclfError as exc:
        print(f"flexclf: error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"flexclf: i/o error: {exc}", file=sys.stderr)
        return 1


def main_entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    main_entry()
