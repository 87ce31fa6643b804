"""Natural cubic spline expansion of sparse control knots into a dense sequence.

Each axis is interpolated independently over integer time indices. On segment
``i`` (``t_i <= t <= t_{i+1}``, ``s = t - t_i``) the value is
``a + b*s + c*s**2 + d*s**3``. Second derivatives vanish at both end knots.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .model import SparseControlPoints


class InvalidArgs(ValueError):
    pass


class DegenerateKnots(ValueError):
    pass


def uniform_knots(M: int, T: int) -> np.ndarray:
    """``M`` knot indices spread as evenly as possible over ``[0, T - 1]``."""
    if M < 2 or M > T:
        raise InvalidArgs(f"need 2 <= M <= T, got M={M}, T={T}")
    # i*(T-1)/(M-1) rounded half-up in exact integer arithmetic
    i = np.arange(M, dtype=np.int64)
    return (2 * i * (T - 1) + (M - 1)) // (2 * (M - 1))


@dataclass(frozen=True, eq=False)
class SplineCoefficients:
    """Per-segment, per-axis coefficients; each array is ``(M - 1, m)``."""

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    d: np.ndarray
    knot_indices: np.ndarray
    # knot values, kept so evaluation at the knots is exact
    values: np.ndarray

    def evaluate(self, t) -> np.ndarray:
        """Evaluate at (possibly fractional) times ``t``; returns ``(len(t), m)``."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        knots = self.knot_indices
        seg = np.clip(np.searchsorted(knots, t, side="right") - 1, 0, len(knots) - 2)
        s = (t - knots[seg])[:, None]
        out = self.a[seg] + s * (self.b[seg] + s * (self.c[seg] + s * self.d[seg]))
        hit = np.searchsorted(knots, t)
        exact = (hit < len(knots)) & (knots[np.minimum(hit, len(knots) - 1)] == t)
        out[exact] = self.values[hit[exact]]
        return out

    def derivatives(self, t, order: int) -> np.ndarray:
        """Analytic derivative of the given order (1 or 2) at ``t``; one-sided from the right
        except at the last knot."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        knots = self.knot_indices
        seg = np.clip(np.searchsorted(knots, t, side="right") - 1, 0, len(knots) - 2)
        s = (t - knots[seg])[:, None]
        if order == 1:
            return self.b[seg] + s * (2 * self.c[seg] + 3 * s * self.d[seg])
        if order == 2:
            return 2 * self.c[seg] + 6 * s * self.d[seg]
        raise ValueError("order must be 1 or 2")


def _solve_tridiagonal(lower, diag, upper, rhs):
    """Thomas algorithm; ``rhs`` may carry extra trailing columns."""
    n = diag.shape[0]
    cp = np.empty(n)
    dp = np.empty_like(rhs, dtype=float)
    cp[0] = upper[0] / diag[0] if n > 1 else 0.0
    dp[0] = rhs[0] / diag[0]
    for i in range(1, n):
        denom = diag[i] - lower[i] * cp[i - 1]
        cp[i] = upper[i] / denom if i < n - 1 else 0.0
        dp[i] = (rhs[i] - lower[i] * dp[i - 1]) / denom
    x = np.empty_like(dp)
    x[-1] = dp[-1]
    for i in range(n - 2, -1, -1):
        x[i] = dp[i] - cp[i] * x[i + 1]
    return x


def _fit(knots: np.ndarray, y: np.ndarray) -> SplineCoefficients:
    h = np.diff(knots).astype(float)
    if np.any(h <= 0):
        raise DegenerateKnots("knot indices must be strictly increasing")
    n = len(knots)
    slopes = np.diff(y, axis=0) / h[:, None]
    # second derivatives at the knots, zero at both ends
    m2 = np.zeros_like(y, dtype=float)
    if n > 2:
        diag = 2.0 * (h[:-1] + h[1:])
        lower = np.concatenate(([0.0], h[1:-1]))
        upper = np.concatenate((h[1:-1], [0.0]))
        rhs = 6.0 * (slopes[1:] - slopes[:-1])
        m2[1:-1] = _solve_tridiagonal(lower, diag, upper, rhs)
    hh = h[:, None]
    a = y[:-1].copy()
    b = slopes - hh * (2.0 * m2[:-1] + m2[1:]) / 6.0
    c = m2[:-1] / 2.0
    d = (m2[1:] - m2[:-1]) / (6.0 * hh)
    return SplineCoefficients(a, b, c, d, knots.copy(), y.copy())


def fit_natural_cubic(points: SparseControlPoints) -> SplineCoefficients:
    knots = np.asarray(points.knot_indices)
    if np.any(np.diff(knots) <= 0):
        raise DegenerateKnots("knot indices must be strictly increasing")
    return _fit(knots, np.asarray(points.points, dtype=float))


def interpolate(points: SparseControlPoints, T: int) -> np.ndarray:
    """Dense ``(T, m)`` control sequence through the knots of ``points``."""
    if points.horizon != T:
        raise InvalidArgs(f"last knot {points.horizon - 1} does not match T - 1 = {T - 1}")
    return fit_natural_cubic(points).evaluate(np.arange(T))


@lru_cache(maxsize=32)
def _basis_cached(knots: tuple, T: int) -> np.ndarray:
    k = np.asarray(knots, dtype=np.int64)
    eye = np.eye(len(k))
    B = _fit(k, eye).evaluate(np.arange(T))
    # rows at the knots are exact unit vectors, so B @ P reproduces knot values bit-exactly
    B.setflags(write=False)
    return B


def basis_matrix(knot_indices, T: int) -> np.ndarray:
    """``(T, M)`` matrix ``B`` with ``interpolate(P) == B @ P``.

    The natural spline is linear in its knot values, so a whole batch of
    ``(K, M, m)`` knot sets expands with one matrix product.
    """
    knots = tuple(int(k) for k in knot_indices)
    if len(knots) < 2 or knots[0] != 0 or knots[-1] != T - 1:
        raise InvalidArgs("knots must start at 0 and end at T - 1")
    if any(b <= a for a, b in zip(knots, knots[1:])):
        raise DegenerateKnots("knot indices must be strictly increasing")
    return _basis_cached(knots, T)


def interpolate_batch(points: np.ndarray, knot_indices, T: int) -> np.ndarray:
    """Expand ``(N, M, m)`` knot values into ``(N, T, m)`` dense sequences."""
    B = basis_matrix(knot_indices, T)
    if B.shape[0] == B.shape[1]:
        return np.array(points, dtype=float, copy=True)
    P = np.asarray(points, dtype=float)
    N, M, m = P.shape
    # one GEMM over all samples and axes; each sample's (m, T) block stays
    # contiguous so per-rollout reads are cache friendly
    dense = P.transpose(0, 2, 1).reshape(N * m, M) @ B.T
    return dense.reshape(N, m, -1).transpose(0, 2, 1)
