"""Sampling, weighting and knot update for MPPI and its sparse-control-point variants.

One :func:`solve` call runs a single optimisation round:

1. perturb the warm-start knots with Gaussian noise (knots only),
2. expand every sample with the natural cubic spline and score its rollout,
3. for ``SCP_SVGD``, transport the noise particles ``L`` times and re-score,
4. average the noise with exponentiated-cost weights and add it to the knots.

Vanilla MPPI is the same loop with a knot at every time step, where the
spline reduces to the identity. The correction term that couples the nominal
and previous-optimum sequences vanishes because the warm start *is* the
nominal sequence, so weights depend on the sequence costs alone.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import svgd
from .config import SolverConfig, Variant, validate_config
from .cost import batch_costs, obstacle_array, trajectories
from .model import SparseControlPoints, State
from .spline import interpolate, interpolate_batch, uniform_knots


class WeightMismatch(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class SolveDiagnostics:
    best_cost: float
    weights_entropy: float
    effective_sample_size: float
    per_phase_costs: dict
    elapsed: float
    collided_fraction: float = 0.0
    # (K, T + 1, n) predicted positions of the final samples, when captured
    candidates: Optional[np.ndarray] = field(default=None, repr=False)


@dataclass(frozen=True, eq=False)
class SolveOutput:
    dense_sequence: np.ndarray
    sparse_points: SparseControlPoints
    first_command: np.ndarray
    diagnostics: SolveDiagnostics

    def __eq__(self, other):
        if not isinstance(other, SolveOutput):
            return NotImplemented
        return (np.array_equal(self.dense_sequence, other.dense_sequence)
                and self.sparse_points == other.sparse_points
                and np.array_equal(self.first_command, other.first_command))


def sample_noise(K: int, M: int, sigma, rng_seed) -> np.ndarray:
    """``(K, M, m)`` zero-mean Gaussian knot perturbations with diagonal covariance ``sigma``."""
    sigma = np.asarray(sigma, dtype=float)
    var = np.diag(sigma) if sigma.ndim == 2 else sigma
    rng = np.random.default_rng(rng_seed)
    return rng.standard_normal((K, M, var.shape[0])) * np.sqrt(var)


def compute_weights(costs, lam: float) -> np.ndarray:
    costs = np.asarray(costs, dtype=float)
    e = np.exp(-(costs - costs.min()) / lam)
    return e / e.sum()


def effective_sample_size(weights) -> float:
    w = np.asarray(weights, dtype=float)
    return float(w.sum() ** 2 / np.sum(w * w))


def weights_entropy(weights) -> float:
    w = np.asarray(weights, dtype=float)
    nz = w[w > 0]
    return float(-np.sum(nz * np.log(nz)))


def weighted_update(base: SparseControlPoints, noises, weights) -> SparseControlPoints:
    noises = np.asarray(noises, dtype=float)
    weights = np.asarray(weights, dtype=float)
    if noises.shape[0] != weights.shape[0]:
        raise WeightMismatch(f"{noises.shape[0]} noise matrices but {weights.shape[0]} weights")
    return base.with_points(base.points + np.tensordot(weights, noises, axes=1))


def cold_start(cfg: SolverConfig) -> SparseControlPoints:
    """Zero velocity on the uniform knot grid."""
    return SparseControlPoints(np.zeros((cfg.M, cfg.control_dim)), uniform_knots(cfg.M, cfg.T))


def warm_start_from(previous: Optional["SolveOutput"], cfg: Optional[SolverConfig] = None) -> SparseControlPoints:
    """Next round's nominal knots: the previous optimum, unshifted.

    ``cfg.shift_warm_start`` (off by default) instead re-reads the optimal
    spline one time step later at every knot, holding the final value.
    """
    if previous is None:
        if cfg is None:
            raise ValueError("a config is needed for a cold start")
        return cold_start(cfg)
    sparse = previous.sparse_points
    if cfg is not None and cfg.shift_warm_start:
        dense = previous.dense_sequence
        idx = np.minimum(sparse.knot_indices + 1, dense.shape[0] - 1)
        return sparse.with_points(dense[idx])
    return sparse


class _Scorer:
    """Maps noise particles to sequence costs around fixed nominal knots."""

    def __init__(self, x0, goal, obstacles, nominal: SparseControlPoints, cfg: SolverConfig, spline: bool):
        self.x0 = x0
        self.goal = goal
        self.obstacles = obstacles
        self.nominal = nominal
        self.cfg = cfg
        self.spline = spline
        self.calls = 0

    def dense(self, noise: np.ndarray) -> np.ndarray:
        knots = self.nominal.points + noise.reshape(noise.shape[0], *self.nominal.points.shape)
        if not self.spline:
            return knots
        return interpolate_batch(knots, self.nominal.knot_indices, self.cfg.T)

    def scores(self, noise: np.ndarray):
        self.calls += noise.shape[0]
        return batch_costs(self.x0, self.dense(noise), self.obstacles, self.goal, self.cfg)

    def __call__(self, flat: np.ndarray) -> np.ndarray:
        return self.scores(flat)[0]


def solve(x0, goal, sensed, warm: SparseControlPoints, cfg: SolverConfig, rng_seed,
          capture_candidates: bool = False) -> SolveOutput:
    start = time.perf_counter()
    validate_config(cfg)
    if warm.M != cfg.M or warm.horizon != cfg.T or warm.points.shape[1] != cfg.control_dim:
        raise ValueError(f"warm start has {warm.M} knots ending at {warm.horizon - 1}; "
                         f"config wants M={cfg.M}, T={cfg.T}")
    pos = x0.position if isinstance(x0, State) else np.asarray(x0, dtype=float)
    goal = np.asarray(goal, dtype=float)
    scorer = _Scorer(pos, goal, obstacle_array(sensed), warm, cfg,
                     spline=cfg.variant is not Variant.MPPI)

    noise = sample_noise(cfg.K, cfg.M, cfg.sigma, rng_seed)
    costs, collided = scorer.scores(noise)
    phases = {"initial": costs}

    if cfg.effective_L > 0:
        batch = svgd.ParticleBatch(noise.reshape(cfg.K, -1), costs)
        moved = svgd.transport(batch, scorer, cfg.L, cfg.epsilon, cfg.fd_step,
                               offset=cfg.likelihood_offset, bandwidth_mode=cfg.bandwidth_mode)
        noise = moved.particles.reshape(noise.shape)
        costs, collided = scorer.scores(noise)
        phases["svgd"] = costs

    weights = compute_weights(costs, cfg.lam)
    sparse = weighted_update(warm, noise, weights)
    if cfg.variant is Variant.MPPI:
        dense = np.array(sparse.points)
    else:
        dense = interpolate(sparse, cfg.T)
    candidates = trajectories(pos, scorer.dense(noise), cfg.dt) if capture_candidates else None
    diag = SolveDiagnostics(
        best_cost=float(costs.min()),
        weights_entropy=weights_entropy(weights),
        effective_sample_size=effective_sample_size(weights),
        per_phase_costs=phases,
        elapsed=time.perf_counter() - start,
        collided_fraction=float(np.mean(collided)),
        candidates=candidates,
    )
    dense.setflags(write=False)
    return SolveOutput(dense, sparse, dense[0], diag)


class Controller:
    """Receding-horizon wrapper: solve, keep the optimum as the next warm start."""

    def __init__(self, cfg: SolverConfig):
        self.cfg = validate_config(cfg)
        self.last: Optional[SolveOutput] = None

    def reset(self):
        self.last = None

    def act(self, x0, goal, sensed, rng_seed, capture_candidates: bool = False) -> SolveOutput:
        warm = warm_start_from(self.last, self.cfg)
        self.last = solve(x0, goal, sensed, warm, self.cfg, rng_seed, capture_candidates)
        return self.last
