"""Pure numpy implementation of the batched rollout-cost kernel.

Used when the compiled ``_ckernels`` extension is unavailable or
``SCPMPPI_PURE_PYTHON=1`` is set. Must stay numerically interchangeable with
the Cython version (same summation order per sample up to rounding).
"""

import numpy as np

# bound on the (chunk, T, n_obstacles) temporaries
_CHUNK_ELEMS = 2_000_000


def rollout_costs(x0, U, goal, Q, R, w_d, w_v, umax_norm, dt, obstacles,
                  robot_radius, d_min, d_max, collision_penalty):
    U = np.asarray(U, dtype=float)
    N, T, m = U.shape
    costs = np.empty(N)
    collided = np.zeros(N, dtype=bool)
    if N == 0:
        return costs, collided
    obstacles = np.asarray(obstacles, dtype=float).reshape(-1, 3)
    chunk = max(1, _CHUNK_ELEMS // max(1, T * max(1, len(obstacles))))
    for lo in range(0, N, chunk):
        hi = min(N, lo + chunk)
        c, k = _chunk(x0, U[lo:hi], goal, Q, R, w_d, w_v, umax_norm, dt, obstacles,
                      robot_radius, d_min, d_max, collision_penalty)
        costs[lo:hi] = c
        collided[lo:hi] = k
    return costs, collided


def _chunk(x0, U, goal, Q, R, w_d, w_v, umax_norm, dt, obstacles,
           robot_radius, d_min, d_max, collision_penalty):
    n, T, m = U.shape
    # states x_0 .. x_T
    X = np.empty((n, T + 1, m))
    X[:, 0] = x0
    X[:, 1:] = U * dt
    np.cumsum(X, axis=1, out=X)
    err = X[:, :T] - goal
    tracking = np.einsum("nti,ij,ntj->nt", err, Q, err)
    effort = 0.5 * np.einsum("nti,ij,ntj->nt", U, R, U)
    speed = np.sqrt(np.einsum("nti,nti->nt", U, U))
    over = speed > umax_norm
    constraint = np.where(over, 1.0 + w_v * (speed - umax_norm), 0.0)
    if len(obstacles):
        diff_x = X[:, :, 0, None] - obstacles[:, 0]
        diff_y = X[:, :, 1, None] - obstacles[:, 1]
        surf = np.sqrt(diff_x * diff_x + diff_y * diff_y) - obstacles[:, 2] - robot_radius
        nearest = surf.min(axis=2)
        d = np.minimum(np.maximum(nearest[:, :T], d_min), d_max)
        hit = np.any(nearest[:, 1:] <= 0.0, axis=1)
    else:
        d = np.full((n, T), d_max)
        hit = np.zeros(n, dtype=bool)
    stage = tracking + effort + w_d / d + constraint
    total = stage.sum(axis=1) + np.where(hit, collision_penalty, 0.0)
    return total, hit
