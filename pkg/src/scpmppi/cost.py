"""Point-mass dynamics, the navigation stage cost and the SVGD optimality likelihood.

Obstacle distances are to the *surface* of each cylinder inflated by the robot
radius and are clamped to ``[d_min, d_max]`` (``d_max`` when nothing is sensed)
so the ``w_d / d`` term stays finite. A rollout that touches a sensed obstacle
has ``collision_penalty`` added once to its sequence cost.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import kernels
from .config import CostWeights, SolverConfig
from .model import CostBreakdown, RolloutResult, State


class EmptyBatch(ValueError):
    pass


def obstacle_array(sensed) -> np.ndarray:
    """``(n, 3)`` rows of ``(x, y, radius)`` from sensed obstacles or an array."""
    if sensed is None:
        return np.zeros((0, 3))
    if hasattr(sensed, "as_array"):
        return sensed.as_array()
    return np.asarray(sensed, dtype=float).reshape(-1, 3)


def step(x: State, u, dt: float) -> State:
    return State(x.position + np.asarray(u, dtype=float) * dt, x.time_index + 1)


def constraint_penalty(u, u_max, w_v: float) -> float:
    speed = float(np.linalg.norm(u))
    limit = float(np.linalg.norm(u_max))
    if speed > limit:
        return 1.0 + w_v * (speed - limit)
    return 0.0


def surface_distance(p, obstacles: np.ndarray, robot_radius: float) -> float:
    """Unclamped distance from ``p`` to the nearest inflated cylinder surface (inf if none)."""
    if len(obstacles) == 0:
        return float("inf")
    diff = obstacles[:, :2] - np.asarray(p, dtype=float)[:2]
    return float(np.min(np.hypot(diff[:, 0], diff[:, 1]) - obstacles[:, 2] - robot_radius))


def clamp_distance(d: float, d_min: float, d_max: float) -> float:
    return float(min(max(d, d_min), d_max))


def stage_cost_breakdown(x, u, goal, d: float, w: CostWeights, u_max) -> CostBreakdown:
    pos = x.position if isinstance(x, State) else np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    err = pos - np.asarray(goal, dtype=float)
    return CostBreakdown(
        tracking=float(err @ w.Q @ err),
        effort=float(0.5 * u @ w.R @ u),
        obstacle=float(w.w_d / d),
        constraint=constraint_penalty(u, u_max, w.w_v),
    )


def stage_cost(x, u, goal, d: float, w: CostWeights, u_max) -> float:
    return stage_cost_breakdown(x, u, goal, d, w, u_max).total


def terminal_cost(x) -> float:
    # the navigation cost has no separate terminal term
    return 0.0


def rollout(x0: State, seq, sensed, goal, cfg: SolverConfig) -> RolloutResult:
    """Simulate one control sequence and accumulate its cost term by term.

    Reference path used by tests and plots; the solver scores batches through
    :func:`batch_costs`, which computes the same quantity.
    """
    seq = np.asarray(seq, dtype=float)
    if seq.shape[0] != cfg.T:
        raise ValueError(f"sequence length {seq.shape[0]} != T = {cfg.T}")
    obstacles = obstacle_array(sensed)
    w = cfg.cost_weights
    states = [x0]
    terms = np.zeros(4)
    collided = False
    x = x0
    for t in range(cfg.T):
        raw = surface_distance(x.position, obstacles, cfg.robot_radius)
        d = clamp_distance(raw, cfg.d_min, cfg.d_max)
        b = stage_cost_breakdown(x, seq[t], goal, d, w, cfg.u_max)
        terms += (b.tracking, b.effort, b.obstacle, b.constraint)
        x = step(x, seq[t], cfg.dt)
        states.append(x)
        if surface_distance(x.position, obstacles, cfg.robot_radius) <= 0.0:
            collided = True
    breakdown = CostBreakdown(
        *terms.tolist(),
        collision=cfg.collision_penalty if collided else 0.0,
    )
    total = breakdown.total + terminal_cost(x)
    traj = np.array([s.position for s in states])
    return RolloutResult(traj, total, collided, breakdown)


def trajectories(x0, U, dt: float) -> np.ndarray:
    """Positions ``(N, T + 1, n)`` for a batch of dense sequences ``(N, T, m)``."""
    U = np.asarray(U, dtype=float)
    X = np.empty((U.shape[0], U.shape[1] + 1, U.shape[2]))
    X[:, 0] = np.asarray(x0, dtype=float)
    X[:, 1:] = U * dt
    return np.cumsum(X, axis=1)


def batch_costs(x0, U, obstacles, goal, cfg: SolverConfig, backend=None):
    """Sequence costs and sensed-collision flags for ``(N, T, m)`` dense sequences.

    With ``cfg.workers > 1`` the batch is split into contiguous chunks scored
    on a thread pool (the compiled kernel releases the GIL); results land in
    sample order so the output does not depend on the worker count.
    """
    fn = backend or kernels.rollout_costs
    pos = x0.position if isinstance(x0, State) else np.asarray(x0, dtype=float)
    w = cfg.cost_weights
    args = (np.asarray(goal, dtype=float), w.Q, w.R, float(w.w_d), float(w.w_v),
            float(np.linalg.norm(cfg.u_max)), float(cfg.dt), obstacles,
            float(cfg.robot_radius), float(cfg.d_min), float(cfg.d_max),
            float(cfg.collision_penalty))
    U = np.asarray(U, dtype=float)
    if cfg.workers <= 1 or U.shape[0] < 2 * cfg.workers:
        return fn(pos, U, *args)
    bounds = np.linspace(0, U.shape[0], cfg.workers + 1).astype(int)
    with ThreadPoolExecutor(cfg.workers) as pool:
        parts = list(pool.map(lambda lo_hi: fn(pos, U[lo_hi[0]:lo_hi[1]], *args),
                              zip(bounds[:-1], bounds[1:])))
    return (np.concatenate([p[0] for p in parts]),
            np.concatenate([p[1] for p in parts]))


def optimality_likelihood(costs, offset: float = 1000.0) -> np.ndarray:
    """``1 / ((S_k - min S) + offset)`` for each cost in the batch."""
    costs = np.asarray(costs, dtype=float)
    if costs.size == 0:
        raise EmptyBatch("optimality likelihood of an empty batch")
    return 1.0 / ((costs - costs.min()) + offset)
