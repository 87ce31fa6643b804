# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled rollout-cost kernel (same contract as ``_pykernels.rollout_costs``)."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt

cnp.import_array()


cdef inline double _nearest_sq(const double* ox, const double* oy, Py_ssize_t n,
                               double px, double py) noexcept nogil:
    cdef Py_ssize_t o
    cdef double dx, dy, s, best = 1e300
    for o in range(n):
        dx = px - ox[o]
        dy = py - oy[o]
        s = dx * dx + dy * dy
        best = s if s < best else best
    return best


cdef void _one(const double[::1] x0, const double[:, :] U, const double[::1] goal,
               const double[:, ::1] Q, const double[:, ::1] R, bint diag_q, int r_mode,
               double w_d, double w_v, double umax_norm, double dt,
               const double* ox, const double* oy, const double* orad, Py_ssize_t n_obs,
               double robot_radius, double d_min, double d_max, bint same_radius,
               double* pos, double* err, double* cost_out, unsigned char* hit_out) noexcept nogil:
    # r_mode: 0 zero matrix, 1 diagonal, 2 dense
    cdef Py_ssize_t T = U.shape[0], m = U.shape[1]
    cdef Py_ssize_t t, i, j, o
    cdef double total = 0.0, quad, eff, speed2, speed, d, dx, dy, surf, nearest, u
    cdef unsigned char hit = 0
    for i in range(m):
        pos[i] = x0[i]
    for t in range(T + 1):
        # nearest obstacle surface from the current position
        nearest = d_max
        if n_obs > 0:
            if same_radius:
                # one sqrt per step when every cylinder has the same radius
                nearest = sqrt(_nearest_sq(ox, oy, n_obs, pos[0], pos[1])) - orad[0]
            else:
                nearest = 1e300
                for o in range(n_obs):
                    dx = pos[0] - ox[o]
                    dy = pos[1] - oy[o]
                    surf = sqrt(dx * dx + dy * dy) - orad[o]
                    nearest = surf if surf < nearest else nearest
            nearest -= robot_radius
            if t > 0 and nearest <= 0.0:
                hit = 1
        if t == T:
            break
        quad = 0.0
        eff = 0.0
        speed2 = 0.0
        for i in range(m):
            err[i] = pos[i] - goal[i]
        if diag_q:
            for i in range(m):
                quad += Q[i, i] * err[i] * err[i]
        else:
            for i in range(m):
                for j in range(m):
                    quad += err[i] * Q[i, j] * err[j]
        for i in range(m):
            u = U[t, i]
            speed2 += u * u
            if r_mode == 1:
                eff += R[i, i] * u * u
            elif r_mode == 2:
                for j in range(m):
                    eff += u * R[i, j] * U[t, j]
        d = nearest
        if d < d_min:
            d = d_min
        if d > d_max:
            d = d_max
        total += quad + 0.5 * eff + w_d / d
        speed = sqrt(speed2)
        if speed > umax_norm:
            total += 1.0 + w_v * (speed - umax_norm)
        for i in range(m):
            pos[i] += U[t, i] * dt
    cost_out[0] = total
    hit_out[0] = hit


cdef void _one3(const double[:, :] U, double x, double y, double z,
                double gx, double gy, double gz, double q0, double q1, double q2,
                double r0, double r1, double r2,
                double w_d, double w_v, double umax_norm, double dt,
                const double* ox, const double* oy, double rad, Py_ssize_t n_obs,
                double robot_radius, double d_min, double d_max,
                double* cost_out, unsigned char* hit_out) noexcept nogil:
    # 3-axis, diagonal Q and R, equal radii: state stays in registers
    cdef Py_ssize_t T = U.shape[0], t
    cdef double total = 0.0, d, ex, ey, ez, ux, uy, uz, speed
    cdef double nearest = d_max
    cdef double gate = umax_norm * umax_norm * (1.0 - 1e-9)
    cdef unsigned char hit = 0
    for t in range(T + 1):
        if n_obs > 0:
            nearest = sqrt(_nearest_sq(ox, oy, n_obs, x, y)) - rad - robot_radius
            if t > 0 and nearest <= 0.0:
                hit = 1
        if t == T:
            break
        ux = U[t, 0]
        uy = U[t, 1]
        uz = U[t, 2]
        ex = x - gx
        ey = y - gy
        ez = z - gz
        d = nearest
        if d < d_min:
            d = d_min
        if d > d_max:
            d = d_max
        total += (q0 * ex * ex + q1 * ey * ey + q2 * ez * ez
                  + 0.5 * (r0 * ux * ux + r1 * uy * uy + r2 * uz * uz) + w_d / d)
        speed = ux * ux + uy * uy + uz * uz
        # skip the sqrt well below the limit; the exact test runs near it
        if speed > gate:
            speed = sqrt(speed)
            if speed > umax_norm:
                total += 1.0 + w_v * (speed - umax_norm)
        x += ux * dt
        y += uy * dt
        z += uz * dt
    cost_out[0] = total
    hit_out[0] = hit


def _matrix_mode(A):
    off = A - np.diag(np.diag(A))
    if np.any(off != 0):
        return 2
    return 1 if np.any(np.diag(A) != 0) else 0


def rollout_costs(x0, U, goal, Q, R, double w_d, double w_v, double umax_norm, double dt,
                  obstacles, double robot_radius, double d_min, double d_max,
                  double collision_penalty):
    U = np.asarray(U, dtype=np.float64)
    cdef const double[:, :, :] Uv = U
    cdef const double[::1] x0v = np.ascontiguousarray(x0, dtype=np.float64)
    cdef const double[::1] gv = np.ascontiguousarray(goal, dtype=np.float64)
    Qa = np.ascontiguousarray(Q, dtype=np.float64)
    Ra = np.ascontiguousarray(R, dtype=np.float64)
    cdef const double[:, ::1] Qv = Qa
    cdef const double[:, ::1] Rv = Ra
    cdef bint diag_q = _matrix_mode(Qa) < 2
    cdef int r_mode = _matrix_mode(Ra)
    obs = np.asarray(obstacles, dtype=np.float64).reshape(-1, 3)
    # struct-of-arrays so the nearest-obstacle loop reads contiguous memory
    cols = np.ascontiguousarray(obs.T) if len(obs) else np.zeros((3, 1))
    cdef const double[:, ::1] Cv = cols
    cdef Py_ssize_t n_obs = obs.shape[0]
    cdef Py_ssize_t N = Uv.shape[0], m = Uv.shape[2], k
    cdef bint same_radius = n_obs > 0 and bool(np.all(obs[:, 2] == obs[0, 2]))
    costs = np.empty(N, dtype=np.float64)
    hits = np.zeros(N, dtype=np.uint8)
    cdef double[::1] cv = costs
    cdef unsigned char[::1] hv = hits
    scratch = np.empty(2 * max(m, 1), dtype=np.float64)
    cdef double[::1] sv = scratch
    cdef bint fast = m == 3 and diag_q and r_mode < 2 and (n_obs == 0 or same_radius)
    cdef double rad = Cv[2, 0]
    if fast:
        with nogil:
            for k in range(N):
                _one3(Uv[k], x0v[0], x0v[1], x0v[2], gv[0], gv[1], gv[2],
                      Qv[0, 0], Qv[1, 1], Qv[2, 2], Rv[0, 0], Rv[1, 1], Rv[2, 2],
                      w_d, w_v, umax_norm, dt, &Cv[0, 0], &Cv[1, 0], rad, n_obs,
                      robot_radius, d_min, d_max, &cv[k], &hv[k])
                if hv[k]:
                    cv[k] += collision_penalty
        return costs, hits.astype(bool)
    with nogil:
        for k in range(N):
            _one(x0v, Uv[k], gv, Qv, Rv, diag_q, r_mode, w_d, w_v, umax_norm, dt,
                 &Cv[0, 0], &Cv[1, 0], &Cv[2, 0], n_obs, robot_radius,
                 d_min, d_max, same_radius, &sv[0], &sv[m], &cv[k], &hv[k])
            if hv[k]:
                cv[k] += collision_penalty
    return costs, hits.astype(bool)
