"""Stein variational transport of noise particles.

Particles are flat vectors (an ``(M, m)`` noise matrix flattened to ``M*m``).
A *scorer* maps a ``(N, D)`` batch of particles to ``N`` sequence costs; the
log-likelihood driving the transport is ``-log((S - beta) + offset)`` with
``beta`` the lowest cost in the current batch, frozen while a gradient is
taken. Gradients are central finite differences of that log-likelihood.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

Scorer = Callable[[np.ndarray], np.ndarray]

BANDWIDTH_FLOOR = 1e-8


class DegenerateBatch(ValueError):
    pass


class NonFiniteScore(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class ParticleBatch:
    particles: np.ndarray
    scores: Optional[np.ndarray] = None

    def __post_init__(self):
        p = np.array(self.particles, dtype=float)
        if p.ndim == 1:
            p = p[None, :]
        object.__setattr__(self, "particles", p.reshape(p.shape[0], -1))
        if self.scores is not None:
            s = np.asarray(self.scores, dtype=float)
            if s.shape != (p.shape[0],):
                raise ValueError("need one score per particle")
            object.__setattr__(self, "scores", s)

    @property
    def K(self) -> int:
        return self.particles.shape[0]


def rbf_kernel(a, b, sigma_k: float):
    """``exp(-|a - b|^2 / sigma_k)`` and its gradient with respect to ``a``."""
    diff = np.asarray(a, dtype=float) - np.asarray(b, dtype=float)
    value = float(np.exp(-(diff @ diff) / sigma_k))
    return value, (-2.0 / sigma_k) * diff * value


def median_bandwidth(particles, mode: str = "norms", floor: float = BANDWIDTH_FLOOR) -> float:
    """Kernel width from the median squared particle norm over ``log K``.

    ``mode="pairwise"`` uses the median squared pairwise distance instead
    (the usual SVGD heuristic).
    """
    x = np.asarray(particles, dtype=float)
    x = x.reshape(x.shape[0], -1)
    K = x.shape[0]
    if K < 2:
        raise DegenerateBatch("median bandwidth needs at least two particles")
    if mode == "norms":
        values = np.einsum("kd,kd->k", x, x)
    elif mode == "pairwise":
        sq = _pairwise_sq(x)
        values = sq[np.triu_indices(K, k=1)]
    else:
        raise ValueError(f"unknown bandwidth mode {mode!r}")
    # np.median averages the two middle values for even counts
    return max(float(np.median(values)) / np.log(K), floor)


def _pairwise_sq(x: np.ndarray) -> np.ndarray:
    diff = x[:, None, :] - x[None, :, :]
    return np.einsum("ijd,ijd->ij", diff, diff)


def log_likelihood(costs, beta: float, offset: float) -> np.ndarray:
    arg = np.asarray(costs, dtype=float) - beta + offset
    # a perturbation may undercut beta by more than the offset
    return -np.log(np.maximum(arg, offset * 1e-9))


def _check_scores(scores: np.ndarray) -> np.ndarray:
    if not np.all(np.isfinite(scores)):
        raise NonFiniteScore("scorer returned non-finite costs")
    return scores


def central_gradients(f: Callable[[np.ndarray], np.ndarray], x: np.ndarray, h: float) -> np.ndarray:
    """Central differences of a batched scalar function ``f: (N, D) -> (N,)`` at each row of ``x``.

    All ``2 * K * D`` perturbed points are evaluated in a single call.
    """
    x = np.asarray(x, dtype=float)
    K, D = x.shape
    eye = np.eye(D) * h
    plus = (x[:, None, :] + eye).reshape(K * D, D)
    minus = (x[:, None, :] - eye).reshape(K * D, D)
    vals = np.asarray(f(np.concatenate([plus, minus])), dtype=float)
    fp = vals[: K * D].reshape(K, D)
    fm = vals[K * D:].reshape(K, D)
    return (fp - fm) / (2.0 * h)


def grad_log_p_batch(particles, scores, scorer: Scorer, h: float, offset: float = 1000.0) -> np.ndarray:
    """Finite-difference gradient of the log optimality likelihood for every particle."""
    x = np.asarray(particles, dtype=float)
    beta = float(np.min(_check_scores(np.asarray(scores, dtype=float))))

    def logp(batch):
        return log_likelihood(_check_scores(np.asarray(scorer(batch), dtype=float)), beta, offset)

    return central_gradients(logp, x, h)


def numerical_grad_log_p(particle_index: int, batch: ParticleBatch, scorer: Scorer, h: float,
                         offset: float = 1000.0) -> np.ndarray:
    if h <= 0:
        raise ValueError("finite-difference step must be positive")
    scores = batch.scores
    if scores is None:
        scores = _check_scores(np.asarray(scorer(batch.particles), dtype=float))
    x = batch.particles[particle_index: particle_index + 1]
    return grad_log_p_batch(x, scores, scorer, h, offset)[0]


def stein_direction(particles, grads, bandwidth: float) -> np.ndarray:
    """Kernel-smoothed gradient plus repulsion, averaged over the batch."""
    x = np.asarray(particles, dtype=float)
    g = np.asarray(grads, dtype=float)
    K = x.shape[0]
    k = np.exp(-_pairwise_sq(x) / bandwidth)
    attraction = k @ g
    # sum_j grad_{x_j} k(x_j, x_i) = -(2/h) sum_j k_ij (x_j - x_i)
    repulsion = (-2.0 / bandwidth) * (k @ x - k.sum(axis=1)[:, None] * x)
    return (attraction + repulsion) / K


def svgd_step(batch, grads, epsilon: float, bandwidth_mode: str = "norms"):
    """One synchronous update ``x <- x + epsilon * phi(x)`` for every particle."""
    is_batch = isinstance(batch, ParticleBatch)
    x = batch.particles if is_batch else np.asarray(batch, dtype=float)
    if x.shape[0] == 1:
        bandwidth = 1.0  # k(x, x) = 1 for any width
    else:
        bandwidth = median_bandwidth(x, bandwidth_mode)
    new = x + epsilon * stein_direction(x, grads, bandwidth)
    return ParticleBatch(new) if is_batch else new


def transport(batch: ParticleBatch, scorer: Scorer, L: int, epsilon: float, h: float,
              offset: float = 1000.0, bandwidth_mode: str = "norms",
              history: Optional[list] = None) -> ParticleBatch:
    """``L`` SVGD iterations on the cost likelihood; returned scores are ``None``.

    Each iteration re-scores the current particles (to refresh ``beta``)
    alongside the ``2 * D`` perturbations per particle, in one scorer call.
    """
    x = batch.particles.copy()
    scores = batch.scores
    for it in range(L):
        if scores is None:
            scores = _check_scores(np.asarray(scorer(x), dtype=float))
        grads = grad_log_p_batch(x, scores, scorer, h, offset)
        x = svgd_step(x, grads, epsilon, bandwidth_mode)
        scores = None
        if history is not None:
            history.append(x.copy())
    return ParticleBatch(x)


def transport_with_gradient(particles, grad_fn: Callable[[np.ndarray], np.ndarray], L: int,
                            epsilon: float, bandwidth_mode: str = "norms") -> np.ndarray:
    """Plain SVGD on an arbitrary target given ``grad_fn: (K, D) -> (K, D)`` of its log-density."""
    x = np.array(particles, dtype=float)
    for _ in range(L):
        x = svgd_step(x, grad_fn(x), epsilon, bandwidth_mode)
    return x
