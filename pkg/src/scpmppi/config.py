"""Solver configuration, validation and the flat key-value config file."""

from __future__ import annotations

import dataclasses
import enum
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import numpy as np
import yaml


class Variant(str, enum.Enum):
    MPPI = "MPPI"
    SCP_NO_SVGD = "SCP_NO_SVGD"
    SCP_SVGD = "SCP_SVGD"

    @classmethod
    def parse(cls, value) -> "Variant":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("-", "_")
        aliases = {
            "mppi": cls.MPPI,
            "scp": cls.SCP_NO_SVGD,
            "scp_no_svgd": cls.SCP_NO_SVGD,
            "scp_svgd": cls.SCP_SVGD,
        }
        if key not in aliases:
            raise ValueError(f"unknown variant {value!r}")
        return aliases[key]

    @property
    def cli_name(self) -> str:
        return {"MPPI": "mppi", "SCP_NO_SVGD": "scp", "SCP_SVGD": "scp-svgd"}[self.value]


class InvalidConfig(ValueError):
    def __init__(self, violations: list[str]):
        self.violations = list(violations)
        super().__init__("invalid solver config: " + "; ".join(self.violations))


def _diag(values) -> np.ndarray:
    return np.diag(np.asarray(values, dtype=float))


@dataclass(frozen=True, eq=False)
class CostWeights:
    """Weights of the stage cost: position error, effort, obstacle proximity, speed limit."""

    Q: np.ndarray = field(default_factory=lambda: _diag([1.0, 1.0, 1.0]))
    R: np.ndarray = field(default_factory=lambda: _diag([0.0, 0.0, 0.0]))
    w_d: float = 1.0
    w_v: float = 10.0

    def __post_init__(self):
        for name in ("Q", "R"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)


@dataclass(frozen=True, eq=False)
class SolverConfig:
    K: int = 50
    T: int = 150
    M: int = 4
    L: int = 3
    lam: float = 1.0
    epsilon: float = 0.05
    sigma: np.ndarray = field(default_factory=lambda: _diag([0.25, 0.25, 0.25]))
    dt: float = 0.1
    u_max: np.ndarray = field(default_factory=lambda: np.array([1.0, 0.0, 0.0]))
    fd_step: float = 0.05
    cost_weights: CostWeights = field(default_factory=CostWeights)
    variant: Variant = Variant.SCP_SVGD
    # modelling choices with no single canonical value; see README
    likelihood_offset: float = 1000.0
    collision_penalty: float = 1e6
    d_min: float = 0.01
    d_max: float = 100.0
    robot_radius: float = 0.25
    bandwidth_mode: str = "norms"
    shift_warm_start: bool = False
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "variant", Variant.parse(self.variant))
        for name in ("sigma", "u_max"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def control_dim(self) -> int:
        return self.u_max.shape[0]

    @property
    def sigma_diag(self) -> np.ndarray:
        return np.diag(self.sigma).copy()

    @property
    def effective_L(self) -> int:
        return self.L if self.variant is Variant.SCP_SVGD else 0

    def replace(self, **changes) -> "SolverConfig":
        return dataclasses.replace(self, **changes)


def _is_psd(a: np.ndarray, tol: float = 1e-12) -> bool:
    if a.ndim != 2 or a.shape[0] != a.shape[1] or not np.all(np.isfinite(a)):
        return False
    if not np.allclose(a, a.T, atol=tol):
        return False
    return bool(np.min(np.linalg.eigvalsh(a)) >= -tol)


def config_violations(cfg: SolverConfig) -> list[str]:
    v = []
    if cfg.K < 1:
        v.append(f"K must be >= 1 (got {cfg.K})")
    if cfg.T < 2:
        v.append(f"T must be >= 2 (got {cfg.T})")
    if not 2 <= cfg.M <= cfg.T:
        v.append(f"M must satisfy 2 <= M <= T (got M={cfg.M}, T={cfg.T})")
    if cfg.L < 0:
        v.append(f"L must be >= 0 (got {cfg.L})")
    for name in ("lam", "epsilon", "dt", "fd_step"):
        value = getattr(cfg, name)
        if not (np.isfinite(value) and value > 0):
            v.append(f"{name} must be positive (got {value})")
    m = cfg.u_max.shape[0] if cfg.u_max.ndim == 1 else -1
    if m < 1 or not np.all(np.isfinite(cfg.u_max)):
        v.append("u_max must be a finite vector")
    sig = cfg.sigma
    if sig.shape != (m, m):
        v.append(f"sigma must be {m}x{m}")
    elif not np.all(np.isfinite(sig)) or np.any(sig != np.diag(np.diag(sig))):
        v.append("sigma must be a finite diagonal matrix")
    elif np.any(np.diag(sig) <= 0):
        v.append("sigma must be positive definite")
    w = cfg.cost_weights
    for name in ("Q", "R"):
        mat = getattr(w, name)
        if mat.shape != (m, m) or not _is_psd(mat):
            v.append(f"{name} must be a symmetric PSD {m}x{m} matrix")
    if not (w.w_d >= 0 and w.w_v >= 0):
        v.append("w_d and w_v must be >= 0")
    if cfg.variant is Variant.MPPI and cfg.M != cfg.T:
        v.append(f"variant MPPI requires M == T (got M={cfg.M}, T={cfg.T})")
    if not cfg.likelihood_offset > 0:
        v.append("likelihood_offset must be positive")
    if not (0 < cfg.d_min <= cfg.d_max):
        v.append("need 0 < d_min <= d_max")
    if cfg.collision_penalty < 0 or cfg.robot_radius < 0:
        v.append("collision_penalty and robot_radius must be >= 0")
    if cfg.bandwidth_mode not in ("norms", "pairwise"):
        v.append(f"bandwidth_mode must be 'norms' or 'pairwise' (got {cfg.bandwidth_mode!r})")
    if cfg.workers < 1:
        v.append("workers must be >= 1")
    return v


def validate_config(cfg: SolverConfig) -> SolverConfig:
    """Return ``cfg`` itself if every invariant holds, else raise :class:`InvalidConfig`."""
    violations = config_violations(cfg)
    if violations:
        raise InvalidConfig(violations)
    return cfg


# -- flat key-value file ---------------------------------------------------

_SCALAR_KEYS = {
    "K": int,
    "T": int,
    "M": int,
    "L": int,
    "lambda": float,
    "epsilon": float,
    "dt": float,
    "fd_step": float,
    "likelihood_offset": float,
    "collision_penalty": float,
    "d_min": float,
    "d_max": float,
    "robot_radius": float,
    "bandwidth_mode": str,
    "shift_warm_start": bool,
    "workers": int,
    "variant": str,
    "w_d": float,
    "w_v": float,
}
_VECTOR_KEYS = ("sigma_diag", "u_max", "q_diag", "r_diag")
CONFIG_KEYS = tuple(_SCALAR_KEYS) + _VECTOR_KEYS


def _parse_vector(key, value) -> np.ndarray:
    if isinstance(value, str):
        value = [float(x) for x in value.replace(",", " ").split()]
    arr = np.asarray(value, dtype=float)
    if arr.ndim != 1:
        raise InvalidConfig([f"{key} must be a flat list of numbers"])
    return arr


def _parse_bool(value) -> bool:
    if isinstance(value, bool):
        return value
    return str(value).strip().lower() in ("1", "true", "yes", "on")


def config_from_mapping(values: Mapping[str, Any], base: SolverConfig | None = None) -> SolverConfig:
    """Build a config from flat keys (see ``CONFIG_KEYS``), starting from ``base``."""
    base = base or SolverConfig()
    unknown = sorted(set(values) - set(CONFIG_KEYS))
    if unknown:
        raise InvalidConfig([f"unknown config key {k!r}" for k in unknown])
    changes: dict[str, Any] = {}
    weights = {}
    for key, raw in values.items():
        if raw is None:
            continue
        if key in _VECTOR_KEYS:
            vec = _parse_vector(key, raw)
            if key == "sigma_diag":
                changes["sigma"] = np.diag(vec)
            elif key == "u_max":
                changes["u_max"] = vec
            else:
                weights["Q" if key == "q_diag" else "R"] = np.diag(vec)
            continue
        kind = _SCALAR_KEYS[key]
        try:
            value = _parse_bool(raw) if kind is bool else kind(raw)
        except (TypeError, ValueError) as exc:
            raise InvalidConfig([f"{key}: {exc}"]) from None
        if key in ("w_d", "w_v"):
            weights[key] = value
        elif key == "lambda":
            changes["lam"] = value
        else:
            changes[key] = value
    if weights:
        changes["cost_weights"] = dataclasses.replace(base.cost_weights, **weights)
    try:
        return dataclasses.replace(base, **changes)
    except ValueError as exc:
        raise InvalidConfig([str(exc)]) from None


def config_to_mapping(cfg: SolverConfig) -> dict[str, Any]:
    w = cfg.cost_weights
    return {
        "variant": cfg.variant.value,
        "K": cfg.K,
        "T": cfg.T,
        "M": cfg.M,
        "L": cfg.L,
        "lambda": cfg.lam,
        "epsilon": cfg.epsilon,
        "sigma_diag": np.diag(cfg.sigma).tolist(),
        "dt": cfg.dt,
        "u_max": cfg.u_max.tolist(),
        "fd_step": cfg.fd_step,
        "q_diag": np.diag(w.Q).tolist(),
        "r_diag": np.diag(w.R).tolist(),
        "w_d": w.w_d,
        "w_v": w.w_v,
        "likelihood_offset": cfg.likelihood_offset,
        "collision_penalty": cfg.collision_penalty,
        "d_min": cfg.d_min,
        "d_max": cfg.d_max,
        "robot_radius": cfg.robot_radius,
        "bandwidth_mode": cfg.bandwidth_mode,
        "shift_warm_start": cfg.shift_warm_start,
        "workers": cfg.workers,
    }


def read_config_file(path) -> dict[str, Any]:
    """Read the flat YAML mapping in ``path``; nested sections are rejected."""
    data = yaml.safe_load(Path(path).read_text()) or {}
    if not isinstance(data, dict):
        raise InvalidConfig([f"{path}: expected a mapping of flat keys"])
    return data


def load_config(path, overrides: Mapping[str, Any] | None = None) -> SolverConfig:
    values = read_config_file(path)
    if overrides:
        values.update({k: v for k, v in overrides.items() if v is not None})
    return validate_config(config_from_mapping(values))
