import os
import subprocess
import sys

import numpy as np
import pytest

from scpmppi import kernels

compiled = kernels.compiled_rollout_costs()
needs_ext = pytest.mark.skipif(compiled is None, reason="compiled extension not built")


def _args(rng, n, T, n_obs, same_radius=True, Q=None, R=None):
    U = rng.normal(scale=0.7, size=(n, T, 3))
    radius = np.full(n_obs, 0.75) if same_radius else rng.uniform(0.3, 1.0, n_obs)
    obs = np.column_stack([rng.uniform(-2, 6, n_obs), rng.uniform(-3, 3, n_obs), radius])
    Q = np.diag([1.0, 1.0, 100.0]) if Q is None else Q
    R = np.zeros((3, 3)) if R is None else R
    return (np.array([0.0, 0.0, 1.0]), U, np.array([5.0, 0.0, 1.0]), Q, R, 2.0, 50.0, 1.0, 0.1,
            obs, 0.25, 0.01, 100.0, 1e6)


@needs_ext
@pytest.mark.parametrize("n_obs", [0, 1, 8])
@pytest.mark.parametrize("same_radius", [True, False])
def test_compiled_matches_python(rng, n_obs, same_radius):
    args = _args(rng, 64, 40, n_obs, same_radius)
    c_py, h_py = kernels.python_rollout_costs(*args)
    c_cy, h_cy = compiled(*args)
    np.testing.assert_allclose(c_cy, c_py, rtol=1e-12)
    np.testing.assert_array_equal(h_cy, h_py)


@needs_ext
def test_compiled_dense_weights(rng):
    A = rng.normal(size=(3, 3))
    args = _args(rng, 32, 25, 5, Q=A @ A.T, R=np.eye(3) + 0.2 * np.ones((3, 3)))
    np.testing.assert_allclose(compiled(*args)[0], kernels.python_rollout_costs(*args)[0],
                               rtol=1e-12)


@needs_ext
def test_compiled_strided_input(rng):
    args = list(_args(rng, 16, 30, 3))
    args[1] = np.asfortranarray(args[1])[:, ::1, :]
    np.testing.assert_allclose(compiled(*args)[0], kernels.python_rollout_costs(*args)[0],
                               rtol=1e-12)


def _backend_in_subprocess(env_value):
    env = dict(os.environ)
    if env_value is None:
        env.pop("SCPMPPI_PURE_PYTHON", None)
    else:
        env["SCPMPPI_PURE_PYTHON"] = env_value
    out = subprocess.run([sys.executable, "-c", "import scpmppi; print(scpmppi.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    return out.stdout.strip()


def test_env_var_forces_fallback():
    assert _backend_in_subprocess("1") == "python"


@needs_ext
def test_compiled_is_default():
    assert _backend_in_subprocess(None) == "cython"
    assert _backend_in_subprocess("0") == "cython"
