"""Cylinder forests, a planar LiDAR and the obstacle map built from its returns.

Obstacles are infinite vertical cylinders, so every geometric query works on
the ``(x, y)`` part of a position. The planner only sees the obstacles the
LiDAR has returned so far; collision checks against the full environment are
the trial harness's job.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

CYLINDER_RADIUS = 0.75
DEFAULT_BOUNDS = (0.0, 20.0, 0.0, 15.0)
DEFAULT_START = (1.0, 7.5, 1.0)
DEFAULT_GOAL = (19.0, 7.5, 1.0)
DENSITY_TIERS = {"low": 0.02, "mid": 0.05, "high": 0.08}

ENV_FILE_HEADER = "# scpmppi environment v1"


class Unsatisfiable(RuntimeError):
    pass


@dataclass(frozen=True)
class Cylinder:
    x: float
    y: float
    radius: float = CYLINDER_RADIUS

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("cylinder radius must be positive")

    @property
    def center(self) -> np.ndarray:
        return np.array([self.x, self.y])


def _as_array(cylinders: Sequence[Cylinder]) -> np.ndarray:
    if not cylinders:
        return np.zeros((0, 3))
    return np.array([(c.x, c.y, c.radius) for c in cylinders], dtype=float)


@dataclass(frozen=True, eq=False)
class Environment:
    obstacles: tuple
    bounds: tuple = DEFAULT_BOUNDS
    start: tuple = DEFAULT_START
    goal: tuple = DEFAULT_GOAL
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "obstacles", tuple(self.obstacles))
        object.__setattr__(self, "bounds", tuple(float(b) for b in self.bounds))
        object.__setattr__(self, "start", tuple(float(v) for v in self.start))
        object.__setattr__(self, "goal", tuple(float(v) for v in self.goal))

    @cached_property
    def obstacle_array(self) -> np.ndarray:
        return _as_array(self.obstacles)

    @property
    def start_array(self) -> np.ndarray:
        return np.array(self.start)

    @property
    def goal_array(self) -> np.ndarray:
        return np.array(self.goal)

    def in_bounds(self, p) -> bool:
        xmin, xmax, ymin, ymax = self.bounds
        return bool(xmin <= p[0] <= xmax and ymin <= p[1] <= ymax)

    def __eq__(self, other):
        if not isinstance(other, Environment):
            return NotImplemented
        return (self.obstacles == other.obstacles and self.bounds == other.bounds
                and self.start == other.start and self.goal == other.goal
                and self.seed == other.seed)


@dataclass(frozen=True, eq=False)
class SensedObstacles:
    """Obstacles discovered so far, in discovery order (the order is deterministic)."""

    cylinders: tuple = ()

    @property
    def known(self) -> frozenset:
        return frozenset(self.cylinders)

    def __len__(self):
        return len(self.cylinders)

    @cached_property
    def _array(self) -> np.ndarray:
        arr = _as_array(self.cylinders)
        arr.setflags(write=False)
        return arr

    def as_array(self) -> np.ndarray:
        return self._array

    def with_added(self, new: Iterable[Cylinder]) -> "SensedObstacles":
        have = set(self.cylinders)
        added = []
        for c in new:
            if c not in have:
                have.add(c)
                added.append(c)
        if not added:
            return self
        return SensedObstacles(self.cylinders + tuple(added))


@dataclass(frozen=True, eq=False)
class LidarScan:
    ranges: np.ndarray
    angles: np.ndarray
    max_range: float
    origin: np.ndarray
    # index into Environment.obstacles of the first hit per beam, -1 for none
    hit_index: np.ndarray = field(default=None)


def lidar_scan(x, env: Environment, beams: int = 360, max_range: float = 8.0) -> LidarScan:
    if beams < 1:
        raise ValueError("need at least one beam")
    pos = np.asarray(getattr(x, "position", x), dtype=float)
    origin = pos[:2].copy()
    angles = 2.0 * np.pi * np.arange(beams) / beams
    ranges = np.full(beams, float(max_range))
    hits = np.full(beams, -1, dtype=np.int64)
    obs = env.obstacle_array
    if len(obs):
        dirs = np.column_stack([np.cos(angles), np.sin(angles)])
        f = origin - obs[:, :2]                      # (n, 2)
        b = dirs @ f.T                               # (beams, n)
        c = np.einsum("nd,nd->n", f, f) - obs[:, 2] ** 2
        disc = b * b - c
        with np.errstate(invalid="ignore"):
            root = np.sqrt(disc)
        inside = c < 0
        t = np.where(inside, -b + root, -b - root)
        t = np.where((disc >= 0) & (t >= 0), t, np.inf)
        best = np.argmin(t, axis=1)
        tbest = t[np.arange(beams), best]
        seen = tbest < max_range
        ranges[seen] = tbest[seen]
        hits[seen] = best[seen]
    return LidarScan(ranges, angles, float(max_range), origin, hits)


def integrate_scan(known: SensedObstacles, scan: LidarScan, env: Environment) -> SensedObstacles:
    """Add every obstacle that produced a return shorter than the maximum range."""
    idx = scan.hit_index[(scan.hit_index >= 0) & (scan.ranges < scan.max_range)]
    if idx.size == 0:
        return known
    _, first = np.unique(idx, return_index=True)
    ordered = idx[np.sort(first)]
    return known.with_added(env.obstacles[i] for i in ordered)


def nearest_surface_distance(p, known, robot_radius: float = 0.25,
                             d_min: float = 0.01, d_max: float = 100.0) -> float:
    obs = known.as_array() if hasattr(known, "as_array") else np.asarray(known, dtype=float).reshape(-1, 3)
    if len(obs) == 0:
        return float(d_max)
    p = np.asarray(p, dtype=float)
    d = np.hypot(p[0] - obs[:, 0], p[1] - obs[:, 1]) - obs[:, 2] - robot_radius
    return float(min(max(d.min(), d_min), d_max))


def collision(p, env: Environment, robot_radius: float = 0.25) -> bool:
    """Ground-truth check: inflated cylinder contact (closed) or leaving the bounds."""
    p = np.asarray(p, dtype=float)
    if not env.in_bounds(p):
        return True
    obs = env.obstacle_array
    if len(obs) == 0:
        return False
    dist = np.hypot(p[0] - obs[:, 0], p[1] - obs[:, 1])
    return bool(np.any(dist <= obs[:, 2] + robot_radius))


# -- generation --------------------------------------------------------------

def free_space_connected(env: Environment, robot_radius: float = 0.25, resolution: float = 0.25) -> bool:
    """Coarse grid flood fill from start to goal through cells clear of inflated obstacles."""
    xmin, xmax, ymin, ymax = env.bounds
    xs = np.arange(xmin + resolution / 2, xmax, resolution)
    ys = np.arange(ymin + resolution / 2, ymax, resolution)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    free = np.ones(gx.shape, dtype=bool)
    for cx, cy, r in env.obstacle_array:
        free &= np.hypot(gx - cx, gy - cy) > r + robot_radius

    def cell(p):
        i = int(np.clip((p[0] - xmin) // resolution, 0, len(xs) - 1))
        j = int(np.clip((p[1] - ymin) // resolution, 0, len(ys) - 1))
        return i, j

    s, g = cell(env.start), cell(env.goal)
    if not (free[s] and free[g]):
        return False
    seen = np.zeros_like(free)
    seen[s] = True
    queue = deque([s])
    while queue:
        i, j = queue.popleft()
        if (i, j) == g:
            return True
        for ni, nj in ((i + 1, j), (i - 1, j), (i, j + 1), (i, j - 1)):
            if 0 <= ni < free.shape[0] and 0 <= nj < free.shape[1] and free[ni, nj] and not seen[ni, nj]:
                seen[ni, nj] = True
                queue.append((ni, nj))
    return False


def _place(rng, density, bounds, start, goal, clearance, radius):
    xmin, xmax, ymin, ymax = bounds
    area = (xmax - xmin) * (ymax - ymin)
    n = int(rng.poisson(density * area))
    anchors = np.array([start[:2], goal[:2]])
    placed = []
    tries = 0
    while len(placed) < n and tries < 100 * (n + 1):
        tries += 1
        c = rng.uniform([xmin + radius, ymin + radius], [xmax - radius, ymax - radius])
        if np.min(np.hypot(*(anchors - c).T)) - radius < clearance:
            continue
        placed.append(Cylinder(float(c[0]), float(c[1]), radius))
    return placed


def generate_forest(density: float, bounds=DEFAULT_BOUNDS, corridor_clearance: float = 1.5,
                    seed: int = 0, start=DEFAULT_START, goal=DEFAULT_GOAL,
                    radius: float = CYLINDER_RADIUS, robot_radius: float = 0.25,
                    max_attempts: int = 100) -> Environment:
    """Poisson forest of equal cylinders, regenerated until start and goal are connected."""
    if density < 0:
        raise ValueError("density must be nonnegative")
    for attempt in range(max_attempts):
        rng = np.random.default_rng([int(seed), attempt])
        cyl = _place(rng, density, bounds, start, goal, corridor_clearance, radius)
        env = Environment(tuple(cyl), bounds, start, goal, seed)
        if free_space_connected(env, robot_radius):
            return env
    raise Unsatisfiable(f"no connected forest after {max_attempts} attempts (density={density}, seed={seed})")


def density_for(tier) -> float:
    if isinstance(tier, str):
        if tier not in DENSITY_TIERS:
            raise ValueError(f"unknown density tier {tier!r}; expected one of {sorted(DENSITY_TIERS)}")
        return DENSITY_TIERS[tier]
    return float(tier)


# -- environment file ---------------------------------------------------------

def format_environment(env: Environment) -> str:
    lines = [
        ENV_FILE_HEADER,
        "bounds " + " ".join(repr(v) for v in env.bounds),
        "start " + " ".join(repr(v) for v in env.start),
        "goal " + " ".join(repr(v) for v in env.goal),
        f"seed {env.seed}",
        f"cylinders {len(env.obstacles)}",
    ]
    lines += [f"{c.x!r} {c.y!r} {c.radius!r}" for c in env.obstacles]
    return "\n".join(lines) + "\n"


def parse_environment(text: str) -> Environment:
    rows = [ln.split("#", 1)[0].split() for ln in text.splitlines()]
    rows = [r for r in rows if r]
    header = {}
    body: list[list[str]] = []
    count: Optional[int] = None
    for r in rows:
        if count is None:
            key = r[0]
            if key == "cylinders":
                count = int(r[1])
            elif key in ("bounds", "start", "goal", "seed"):
                header[key] = r[1:]
            else:
                raise ValueError(f"unexpected line {' '.join(r)!r} in environment header")
        else:
            body.append(r)
    missing = {"bounds", "start", "goal"} - set(header)
    if missing:
        raise ValueError(f"environment file missing {sorted(missing)}")
    if count is not None and len(body) != count:
        raise ValueError(f"expected {count} cylinder records, found {len(body)}")
    cylinders = tuple(Cylinder(float(x), float(y), float(r)) for x, y, r in body)
    return Environment(
        cylinders,
        tuple(float(v) for v in header["bounds"]),
        tuple(float(v) for v in header["start"]),
        tuple(float(v) for v in header["goal"]),
        int(header.get("seed", ["0"])[0]),
    )


def save_environment(env: Environment, path) -> None:
    Path(path).write_text(format_environment(env))


def load_environment(path) -> Environment:
    return parse_environment(Path(path).read_text())
