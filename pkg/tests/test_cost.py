import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from oracles import scalar_rollout_cost
from scpmppi import cost
from scpmppi.config import CostWeights, SolverConfig
from scpmppi.model import State
from scpmppi.world import Cylinder, SensedObstacles

finite = st.floats(-50, 50, allow_nan=False)
vec3 = arrays(np.float64, 3, elements=finite)


def test_step_examples():
    x = State([0.0, 0.0, 0.0])
    assert np.array_equal(cost.step(x, [1.0, 0.0, 0.0], 0.1).position, [0.1, 0.0, 0.0])
    y = cost.step(x, [0.0, 0.0, 0.0], 0.1)
    assert np.array_equal(y.position, x.position) and y.time_index == 1


def test_repeated_steps_telescope():
    x = State([1.0, -2.0, 0.5])
    u = np.array([0.5, 0.25, -0.125])
    for _ in range(40):
        x = cost.step(x, u, 0.1)
    np.testing.assert_allclose(x.position, [1.0, -2.0, 0.5] + 40 * 0.1 * u, atol=1e-12)
    assert x.time_index == 40


@settings(max_examples=200)
@given(p=vec3, u=vec3, dt=st.floats(1e-3, 1.0))
def test_step_is_linear(p, u, dt):
    x = State(p)
    assert np.array_equal(cost.step(x, u, dt).position - p, (p + u * dt) - p)


@pytest.mark.parametrize("u,expected", [([0.5, 0, 0], 0.0), ([0.6, 0.8, 0.0], 0.0),
                                        ([2.0, 0.0, 0.0], 11.0)])
def test_constraint_examples(u, expected):
    assert cost.constraint_penalty(u, [1.0, 0.0, 0.0], 10.0) == pytest.approx(expected, abs=1e-12)


@settings(max_examples=200)
@given(s1=st.floats(0, 10), s2=st.floats(0, 10), w_v=st.floats(0.1, 100))
def test_constraint_monotone_above_limit(s1, s2, w_v):
    lo, hi = sorted((s1, s2))
    p_lo = cost.constraint_penalty([lo, 0, 0], [1, 0, 0], w_v)
    p_hi = cost.constraint_penalty([hi, 0, 0], [1, 0, 0], w_v)
    if hi <= 1.0:
        assert p_lo == p_hi == 0.0
    elif lo < hi:
        assert p_hi > p_lo


def test_stage_cost_examples():
    goal = np.array([1.0, 2.0, 3.0])
    w = CostWeights(Q=np.eye(3), R=np.zeros((3, 3)), w_d=1.0, w_v=10.0)
    assert cost.stage_cost(goal, np.zeros(3), goal, 10.0, w, [1, 0, 0]) == pytest.approx(0.1)
    w0 = CostWeights(Q=np.eye(3), R=np.zeros((3, 3)), w_d=0.0, w_v=10.0)
    assert cost.stage_cost(goal + [1, 0, 0], [0.5, 0, 0], goal, 1.0, w0, [1, 0, 0]) == 1.0
    w2 = CostWeights(Q=np.eye(3), R=2 * np.eye(3), w_d=2.0, w_v=10.0)
    b = cost.stage_cost_breakdown(goal + [1, 1, 0], [1, 0, 0], goal, 4.0, w2, [1, 0, 0])
    assert (b.tracking, b.effort, b.obstacle, b.constraint) == (2.0, 1.0, 0.5, 0.0)
    assert b.total == pytest.approx(3.5, abs=1e-12)


@settings(max_examples=200)
@given(p=vec3, u=vec3, d=st.floats(1e-3, 100), q=arrays(np.float64, 3, elements=st.floats(0, 10)),
       r=arrays(np.float64, 3, elements=st.floats(0, 10)))
def test_breakdown_nonnegative_and_additive(p, u, d, q, r):
    w = CostWeights(Q=np.diag(q), R=np.diag(r), w_d=1.5, w_v=3.0)
    b = cost.stage_cost_breakdown(p, u, np.zeros(3), d, w, [1, 0, 0])
    assert min(b.tracking, b.effort, b.obstacle, b.constraint) >= 0
    parts = b.tracking + b.effort + b.obstacle + b.constraint
    assert abs(cost.stage_cost(p, u, np.zeros(3), d, w, [1, 0, 0]) - parts) <= 1e-9 * max(1, parts)


def test_rollout_empty_scene_stationary():
    cfg = SolverConfig(T=20)
    x0 = State([1.0, 2.0, 1.0])
    res = cost.rollout(x0, np.zeros((20, 3)), SensedObstacles(), x0.position, cfg)
    assert res.cost == pytest.approx(20 * cfg.cost_weights.w_d / cfg.d_max, rel=1e-12)
    assert np.all(res.trajectory == x0.position)
    assert res.trajectory.shape == (21, 3) and not res.collided
    assert res.states()[0] == x0


def test_rollout_through_cylinder_collides():
    cfg = SolverConfig(T=40)
    sensed = SensedObstacles((Cylinder(2.0, 0.0, 0.75),))
    seq = np.tile([1.0, 0.0, 0.0], (40, 1))
    res = cost.rollout(State([0.0, 0.0, 1.0]), seq, sensed, [4.0, 0.0, 1.0], cfg)
    assert res.collided
    assert res.breakdown.collision == cfg.collision_penalty


def test_three_step_rollout_matches_scalar_oracle():
    w = CostWeights(Q=np.diag([1.0, 2.0, 3.0]), R=np.diag([0.5, 0.25, 1.0]), w_d=2.0, w_v=7.0)
    cfg = SolverConfig(T=3, M=3, cost_weights=w, dt=0.5)
    obstacles = [(2.0, 1.0, 0.75), (0.0, 3.0, 0.5)]
    sensed = SensedObstacles(tuple(Cylinder(*o) for o in obstacles))
    seq = np.array([[0.8, 0.3, 0.0], [1.2, 0.1, 0.1], [0.2, -0.4, 0.0]])
    x0, goal = [0.0, 0.0, 1.0], [3.0, 2.0, 1.5]
    res = cost.rollout(State(x0), seq, sensed, goal, cfg)
    ref, hit = scalar_rollout_cost(x0, seq.tolist(), goal, w.Q.tolist(), w.R.tolist(), w.w_d, w.w_v,
                                   [1, 0, 0], 0.5, obstacles)
    assert res.cost == pytest.approx(ref, rel=1e-9, abs=1e-9)
    assert res.collided == hit
    b = res.breakdown
    assert abs(b.total - (b.tracking + b.effort + b.obstacle + b.constraint + b.collision)) <= 1e-9


def test_batch_costs_match_rollout(rng):
    cfg = SolverConfig(T=30, M=4)
    sensed = SensedObstacles((Cylinder(1.5, 0.3, 0.75), Cylinder(2.5, -1.0, 0.5)))
    U = rng.normal(scale=0.8, size=(12, 30, 3))
    x0, goal = np.array([0.0, 0.0, 1.0]), np.array([4.0, 0.0, 1.0])
    costs, hits = cost.batch_costs(x0, U, sensed.as_array(), goal, cfg)
    for k in range(12):
        res = cost.rollout(State(x0), U[k], sensed, goal, cfg)
        assert costs[k] == pytest.approx(res.cost, rel=1e-12)
        assert hits[k] == res.collided


def test_batch_costs_parallel_matches_sequential(rng):
    cfg = SolverConfig(T=30)
    obs = np.array([[1.5, 0.3, 0.75]])
    U = rng.normal(size=(40, 30, 3))
    seq = cost.batch_costs(np.zeros(3), U, obs, np.ones(3), cfg)
    par = cost.batch_costs(np.zeros(3), U, obs, np.ones(3), cfg.replace(workers=3))
    np.testing.assert_allclose(par[0], seq[0], rtol=1e-9)
    np.testing.assert_array_equal(par[1], seq[1])


def test_likelihood_examples():
    p = cost.optimality_likelihood([5.0, 7.0, 10.0])
    np.testing.assert_allclose(p, [1 / 1000, 1 / 1002, 1 / 1005], rtol=1e-15)
    assert cost.optimality_likelihood([3.0, 4.0])[1] == pytest.approx(1 / 1001)
    with pytest.raises(cost.EmptyBatch):
        cost.optimality_likelihood([])


costs_list = st.lists(st.floats(0, 1e5), min_size=1, max_size=30)


@settings(max_examples=200)
@given(c=costs_list)
def test_likelihood_monotone(c):
    p = cost.optimality_likelihood(c)
    assert p.max() == pytest.approx(1 / 1000)
    for i in range(len(c)):
        for j in range(len(c)):
            if c[i] < c[j]:
                assert p[i] >= p[j]
                # strict once the gap is resolvable next to the 1000 offset
                if c[j] - c[i] > 1e-9 * (1000 + c[j]):
                    assert p[i] > p[j]


@settings(max_examples=200)
@given(c=costs_list, shift=st.floats(-1e3, 1e3))
def test_likelihood_shift_invariant(c, shift):
    c = np.array(c)
    a = cost.optimality_likelihood(c)
    b = cost.optimality_likelihood(c + shift)
    assert np.max(np.abs(a - b)) <= 1e-12
