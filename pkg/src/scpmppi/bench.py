"""Closed-loop navigation trials, suite aggregation and result export."""

from __future__ import annotations

import csv
import logging
import math
import time
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import yaml

from . import world
from .config import SolverConfig, Variant, config_from_mapping, validate_config
from .solver import Controller

log = logging.getLogger(__name__)

OUTCOMES = ("reached", "collided", "stuck", "timeout")
OUTCOME_FLAGS = {"running": 0, "reached": 1, "collided": 2, "stuck": 3, "timeout": 4, "error": 5}
TRAJECTORY_HEADER = ["t", "x", "y", "z", "ux", "uy", "uz", "outcome_flag"]


class TooShort(ValueError):
    pass


@dataclass(frozen=True)
class TrialLimits:
    goal_tol: float = 0.5
    max_time: float = 120.0
    stuck_window: float = 10.0
    stuck_radius: float = 0.3
    beams: int = 360
    max_range: float = 8.0


@dataclass(eq=False)
class TrialResult:
    outcome: str
    flight_time: float
    avg_speed: float
    path: np.ndarray
    controls: np.ndarray
    smoothness: float
    solve_rate: float
    dt: float
    anomalous: bool = False
    candidates: Optional[list] = field(default=None, repr=False)
    error: str = ""

    @property
    def steps(self) -> int:
        return len(self.controls)

    @property
    def path_length(self) -> float:
        return float(np.sum(np.linalg.norm(np.diff(self.path, axis=0), axis=1)))


def compute_smoothness(controls) -> float:
    """Mean squared norm of the second difference of executed controls."""
    u = np.asarray(controls, dtype=float)
    if len(u) < 3:
        raise TooShort(f"need at least 3 controls, got {len(u)}")
    second = u[2:] - 2.0 * u[1:-1] + u[:-2]
    return float(np.mean(np.sum(second * second, axis=1)))


def run_trial(env: world.Environment, cfg: SolverConfig, limits: TrialLimits = TrialLimits(),
              seed: int = 0, capture_candidates: bool = False) -> TrialResult:
    """Scan, map, solve and apply the first command until a termination criterion fires."""
    validate_config(cfg)
    goal = env.goal_array
    x = env.start_array
    path = [x.copy()]
    controls: list[np.ndarray] = []
    candidates = [] if capture_candidates else None
    sensed = world.SensedObstacles()
    controller = Controller(cfg)
    window = max(1, int(round(limits.stuck_window / cfg.dt)))
    max_steps = int(math.floor(limits.max_time / cfg.dt + 1e-9))
    solve_time = 0.0
    outcome = "reached" if np.linalg.norm(x - goal) <= limits.goal_tol else None
    step = 0
    while outcome is None:
        if step >= max_steps:
            outcome = "timeout"
            break
        scan = world.lidar_scan(x, env, limits.beams, limits.max_range)
        sensed = world.integrate_scan(sensed, scan, env)
        t0 = time.perf_counter()
        out = controller.act(x, goal, sensed, rng_seed=[seed, step],
                             capture_candidates=capture_candidates)
        solve_time += time.perf_counter() - t0
        if candidates is not None:
            candidates.append(out.diagnostics.candidates)
        u = np.array(out.first_command)
        x = x + u * cfg.dt
        controls.append(u)
        path.append(x.copy())
        step += 1
        if world.collision(x, env, cfg.robot_radius):
            outcome = "collided"
        elif np.linalg.norm(x - goal) <= limits.goal_tol:
            outcome = "reached"
        elif step >= window and np.linalg.norm(x - path[step - window]) < limits.stuck_radius:
            outcome = "stuck"

    path_arr = np.array(path)
    ctrl_arr = np.array(controls).reshape(-1, cfg.control_dim)
    flight_time = step * cfg.dt
    length = float(np.sum(np.linalg.norm(np.diff(path_arr, axis=0), axis=1)))
    speeds = np.linalg.norm(ctrl_arr, axis=1) if len(ctrl_arr) else np.zeros(0)
    return TrialResult(
        outcome=outcome,
        flight_time=flight_time,
        avg_speed=length / flight_time if flight_time > 0 else 0.0,
        path=path_arr,
        controls=ctrl_arr,
        smoothness=compute_smoothness(ctrl_arr) if len(ctrl_arr) >= 3 else float("nan"),
        solve_rate=step / solve_time if solve_time > 0 else float("nan"),
        dt=cfg.dt,
        anomalous=bool(np.any(speeds > 1.5 * np.linalg.norm(cfg.u_max))),
        candidates=candidates,
    )


# -- trajectory CSV -----------------------------------------------------------

def export_trajectory(result: TrialResult, path) -> Path:
    """One row per visited state; the control column is the command applied from it.

    The final row carries no command (``nan``) and the outcome flag
    (see ``OUTCOME_FLAGS``); earlier rows have flag 0.
    """
    path = Path(path)
    n = len(result.path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRAJECTORY_HEADER)
        for k in range(n):
            u = result.controls[k] if k < len(result.controls) else (float("nan"),) * 3
            flag = OUTCOME_FLAGS[result.outcome] if k == n - 1 else 0
            p = result.path[k]
            writer.writerow([repr(k * result.dt), repr(float(p[0])), repr(float(p[1])),
                             repr(float(p[2])), *(repr(float(v)) for v in u), flag])
    return path


def load_trajectory(path):
    """Inverse of :func:`export_trajectory`: ``(times, positions, controls, outcome)``."""
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))
    if rows[0] != TRAJECTORY_HEADER:
        raise ValueError(f"unexpected trajectory header {rows[0]}")
    data = np.array([[float(v) for v in r] for r in rows[1:]]).reshape(-1, 8)
    flags = {v: k for k, v in OUTCOME_FLAGS.items()}
    outcome = flags[int(data[-1, 7])] if len(data) else "running"
    return data[:, 0], data[:, 1:4], data[:-1, 4:7], outcome


# -- suites -------------------------------------------------------------------

@dataclass(frozen=True)
class VariantSpec:
    name: str
    config: SolverConfig


@dataclass(frozen=True)
class EnvironmentSpec:
    name: str
    density: Optional[float] = None
    file: Optional[str] = None
    env_seed: int = 0
    per_trial: bool = True

    def build(self, trial: int) -> world.Environment:
        if self.file is not None:
            return world.load_environment(self.file)
        seed = self.env_seed + trial if self.per_trial else self.env_seed
        return world.generate_forest(self.density, seed=seed)


@dataclass(frozen=True)
class SuiteConfig:
    variants: tuple = ()
    environments: tuple = ()
    trials: int = 10
    seed: int = 0
    limits: TrialLimits = TrialLimits()
    jobs: int = 1


@dataclass
class TrialRecord:
    variant: str
    environment: str
    trial: int
    seed: int
    outcome: str
    flight_time: float
    avg_speed: float
    smoothness: float
    solve_rate: float
    steps: int
    anomalous: bool
    error: str = ""


@dataclass
class CellSummary:
    variant: str
    environment: str
    trials: int
    success_rate: float
    mean_flight_time: float
    mean_avg_speed: float
    mean_smoothness: float
    mean_solve_rate: float
    outcomes: dict
    anomalies: int


@dataclass
class SuiteReport:
    cells: list = field(default_factory=list)
    records: list = field(default_factory=list)

    def cell(self, variant: str, environment: str) -> CellSummary:
        for c in self.cells:
            if c.variant == variant and c.environment == environment:
                return c
        raise KeyError((variant, environment))


def _mean(values) -> float:
    values = [v for v in values if v is not None and not math.isnan(v)]
    return float(np.mean(values)) if values else float("nan")


def aggregate(records: Sequence[TrialRecord]) -> SuiteReport:
    order: list[tuple] = []
    groups: dict[tuple, list[TrialRecord]] = {}
    for r in records:
        key = (r.variant, r.environment)
        if key not in groups:
            order.append(key)
            groups[key] = []
        groups[key].append(r)
    cells = []
    for key in order:
        rows = groups[key]
        ok = [r for r in rows if r.outcome == "reached"]
        counts = {o: sum(r.outcome == o for r in rows) for o in OUTCOMES + ("error",)}
        cells.append(CellSummary(
            variant=key[0],
            environment=key[1],
            trials=len(rows),
            success_rate=100.0 * len(ok) / len(rows),
            mean_flight_time=_mean([r.flight_time for r in ok]),
            mean_avg_speed=_mean([r.avg_speed for r in ok]),
            mean_smoothness=_mean([r.smoothness for r in rows]),
            mean_solve_rate=_mean([r.solve_rate for r in rows]),
            outcomes={k: v for k, v in counts.items() if v},
            anomalies=sum(r.anomalous for r in rows),
        ))
    return SuiteReport(cells, list(records))


def _trial_job(args) -> TrialRecord:
    variant, env_spec, trial, seed, limits, out_dir, export_plots, capture = args
    try:
        env = env_spec.build(trial)
        result = run_trial(env, variant.config, limits, seed, capture_candidates=capture)
    except Exception as exc:  # a crashing trial counts as a failure; the suite goes on
        log.warning("trial %s/%s/%d failed: %s", variant.name, env_spec.name, trial, exc)
        return TrialRecord(variant.name, env_spec.name, trial, seed, "error", float("nan"),
                           float("nan"), float("nan"), float("nan"), 0, False,
                           traceback.format_exception_only(type(exc), exc)[-1].strip())
    if out_dir is not None:
        stem = f"{_slug(variant.name)}__{_slug(env_spec.name)}__{trial:03d}"
        traj_dir = Path(out_dir) / "trajectories"
        traj_dir.mkdir(parents=True, exist_ok=True)
        export_trajectory(result, traj_dir / f"{stem}.csv")
        if export_plots:
            from .plot import export_plot

            plot_dir = Path(out_dir) / "plots"
            plot_dir.mkdir(parents=True, exist_ok=True)
            export_plot(env, result, plot_dir / f"{stem}.svg")
    return TrialRecord(variant.name, env_spec.name, trial, seed, result.outcome,
                       result.flight_time, result.avg_speed, result.smoothness,
                       result.solve_rate, result.steps, result.anomalous)


def _slug(name: str) -> str:
    return "".join(ch if ch.isalnum() else "-" for ch in name).strip("-").lower()


def run_suite_config(suite: SuiteConfig, out_dir=None, export_plots: bool = False,
                     capture_candidates: bool = False) -> SuiteReport:
    jobs = []
    for variant in suite.variants:
        for env_spec in suite.environments:
            for trial in range(suite.trials):
                jobs.append((variant, env_spec, trial, suite.seed + trial, suite.limits,
                             out_dir, export_plots, capture_candidates))
    if suite.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(suite.jobs) as pool:
            records = list(pool.map(_trial_job, jobs))
    else:
        records = []
        for job in jobs:
            records.append(_trial_job(job))
            r = records[-1]
            log.info("%s / %s / trial %d: %s", r.variant, r.environment, r.trial, r.outcome)
    report = aggregate(records)
    if out_dir is not None:
        write_report(report, out_dir)
    return report


def run_suite(suite_config_path, out_dir=None, **kwargs) -> SuiteReport:
    return run_suite_config(load_suite(suite_config_path), out_dir, **kwargs)


# -- suite file ---------------------------------------------------------------

def parse_suite(data: dict, base_dir: Path = Path("."), overrides: Optional[dict] = None) -> SuiteConfig:
    """Build a suite from a mapping with ``solver``, ``variants``, ``environments``, ... keys."""
    data = dict(data or {})
    overrides = dict(overrides or {})
    base_values = dict(data.get("solver") or {})
    base_values.update({k: v for k, v in overrides.items() if v is not None})
    base = config_from_mapping(base_values)
    variants = []
    for item in data.get("variants") or []:
        item = dict(item)
        name = item.pop("name", None)
        variant = Variant.parse(item.get("variant", base.variant))
        values = dict(item)
        values["variant"] = variant.value
        values.update({k: v for k, v in overrides.items() if v is not None and k != "variant"})
        if variant is Variant.MPPI:
            # a knot at every step
            values["M"] = values.get("T", base.T)
        cfg = validate_config(config_from_mapping(values, base))
        variants.append(VariantSpec(name or f"{variant.cli_name} (K={cfg.K})", cfg))
    envs = []
    for item in data.get("environments") or []:
        item = dict(item)
        file = item.get("file")
        if file is not None:
            file = str((base_dir / file).resolve()) if not Path(file).is_absolute() else file
        density = item.get("density")
        envs.append(EnvironmentSpec(
            name=str(item.get("name", item.get("density", file))),
            density=None if density is None else world.density_for(density),
            file=file,
            env_seed=int(item.get("env_seed", 0)),
            per_trial=bool(item.get("per_trial", True)),
        ))
    limits = TrialLimits(**(data.get("limits") or {}))
    return SuiteConfig(tuple(variants), tuple(envs), int(data.get("trials", 10)),
                       int(data.get("seed", 0)), limits, int(data.get("jobs", 1)))


def load_suite(path, overrides: Optional[dict] = None) -> SuiteConfig:
    path = Path(path)
    data = yaml.safe_load(path.read_text()) or {}
    return parse_suite(data, path.parent, overrides)


# -- report files -------------------------------------------------------------

TRIALS_CSV = "trials.csv"
SUMMARY_CSV = "summary.csv"


def write_report(report: SuiteReport, out_dir) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    fields = list(TrialRecord.__dataclass_fields__)
    with (out / TRIALS_CSV).open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields)
        writer.writeheader()
        for r in report.records:
            writer.writerow(asdict(r))
    write_summary_csv(report, out / SUMMARY_CSV)


def write_summary_csv(report: SuiteReport, path) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["environment", "variant", "trials", "SR_percent", "FT_s", "AS_mps",
                         "smoothness", "solve_rate_hz", "outcomes", "anomalies"])
        for c in report.cells:
            writer.writerow([c.environment, c.variant, c.trials, f"{c.success_rate:.1f}",
                             _fmt(c.mean_flight_time, 2), _fmt(c.mean_avg_speed, 3),
                             _fmt(c.mean_smoothness, 5), _fmt(c.mean_solve_rate, 1),
                             " ".join(f"{k}={v}" for k, v in c.outcomes.items()), c.anomalies])


def read_trials(in_dir) -> list[TrialRecord]:
    rows = []
    with (Path(in_dir) / TRIALS_CSV).open(newline="") as fh:
        for r in csv.DictReader(fh):
            rows.append(TrialRecord(
                variant=r["variant"], environment=r["environment"], trial=int(r["trial"]),
                seed=int(r["seed"]), outcome=r["outcome"], flight_time=float(r["flight_time"]),
                avg_speed=float(r["avg_speed"]), smoothness=float(r["smoothness"]),
                solve_rate=float(r["solve_rate"]), steps=int(r["steps"]),
                anomalous=r["anomalous"] == "True", error=r.get("error", ""),
            ))
    return rows


def _fmt(value: float, digits: int) -> str:
    return "-" if value is None or math.isnan(value) else f"{value:.{digits}f}"


def format_table(report: SuiteReport) -> str:
    """Per-environment blocks with SR / FT / AS columns plus smoothness and solve rate."""
    lines = []
    envs = []
    for c in report.cells:
        if c.environment not in envs:
            envs.append(c.environment)
    for env in envs:
        cells = [c for c in report.cells if c.environment == env]
        width = max([len(f"Environment {env}")] + [len(c.variant) for c in cells])
        head = (f"{'Environment ' + env:<{width}} | {'SR [%]':>6} | {'FT [s]':>6} | {'AS [m/s]':>8}"
                f" | {'smooth':>8} | {'rate [Hz]':>9}")
        lines += [head, "-" * len(head)]
        for c in cells:
            lines.append(
                f"{c.variant:<{width}} | {c.success_rate:>6.0f} | {_fmt(c.mean_flight_time, 1):>6} | "
                f"{_fmt(c.mean_avg_speed, 3):>8} | {_fmt(c.mean_smoothness, 4):>8} | "
                f"{_fmt(c.mean_solve_rate, 1):>9}"
            )
        lines.append("")
    return "\n".join(lines)
