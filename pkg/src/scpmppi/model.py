"""Domain types shared by the solver, the simulator and the benchmark harness.

Vectors (control inputs, positions, noise) are plain ``numpy`` arrays:

* a control input is a length-``m`` array (``m = 3``: vx, vy, vz in m/s),
* a dense control sequence is a ``(T, m)`` array,
* a noise matrix is an ``(M, m)`` array of knot perturbations.

The containers below wrap those arrays where extra structure (knot indices,
time index, costs) has to travel with them. Arrays stored on the frozen
dataclasses are made read-only so instances can be shared between workers.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

CONTROL_DIM = 3


def _frozen(a, dtype=float) -> np.ndarray:
    arr = np.array(a, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


def is_finite(a) -> bool:
    return bool(np.all(np.isfinite(a)))


@dataclass(frozen=True, eq=False)
class State:
    """Point-mass state: position in meters and the discrete time index."""

    position: np.ndarray
    time_index: int = 0

    def __post_init__(self):
        object.__setattr__(self, "position", _frozen(self.position))
        if self.time_index < 0:
            raise ValueError("time_index must be nonnegative")
        if not is_finite(self.position):
            raise ValueError("state position must be finite")

    def __eq__(self, other):
        if not isinstance(other, State):
            return NotImplemented
        return self.time_index == other.time_index and np.array_equal(
            self.position, other.position
        )


@dataclass(frozen=True, eq=False)
class SparseControlPoints:
    """``M`` velocity knots and the time indices they sit on."""

    points: np.ndarray
    knot_indices: np.ndarray

    def __post_init__(self):
        pts = _frozen(self.points)
        knots = _frozen(self.knot_indices, dtype=np.int64)
        if pts.ndim != 2:
            raise ValueError("points must be an (M, m) array")
        if knots.ndim != 1 or knots.shape[0] != pts.shape[0]:
            raise ValueError("need exactly one knot index per control point")
        if pts.shape[0] < 2:
            raise ValueError("at least two control points are required")
        if knots[0] != 0:
            raise ValueError("first knot index must be 0")
        if not is_finite(pts):
            raise ValueError("control points must be finite")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "knot_indices", knots)

    @property
    def M(self) -> int:
        return self.points.shape[0]

    @property
    def horizon(self) -> int:
        """Dense length ``T`` implied by the last knot (``T - 1``)."""
        return int(self.knot_indices[-1]) + 1

    def with_points(self, points) -> "SparseControlPoints":
        return SparseControlPoints(points, self.knot_indices)

    def __eq__(self, other):
        if not isinstance(other, SparseControlPoints):
            return NotImplemented
        return np.array_equal(self.points, other.points) and np.array_equal(
            self.knot_indices, other.knot_indices
        )


@dataclass(frozen=True, eq=False)
class CostBreakdown:
    tracking: float
    effort: float
    obstacle: float
    constraint: float
    collision: float = 0.0

    @property
    def total(self) -> float:
        return self.tracking + self.effort + self.obstacle + self.constraint + self.collision


@dataclass(frozen=True, eq=False)
class RolloutResult:
    """Predicted trajectory ``(T + 1, n)`` and its sequence cost."""

    trajectory: np.ndarray
    cost: float
    collided: bool
    breakdown: Optional[CostBreakdown] = field(default=None)

    def __post_init__(self):
        object.__setattr__(self, "trajectory", _frozen(self.trajectory))

    def states(self) -> list[State]:
        return [State(p, t) for t, p in enumerate(self.trajectory)]
