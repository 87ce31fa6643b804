import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.interpolate import CubicSpline

from oracles import eval_dense, natural_spline_dense
from scpmppi import spline
from scpmppi.model import SparseControlPoints


@pytest.mark.parametrize("M,T,expected", [(4, 150, [0, 50, 99, 149]), (2, 10, [0, 9]),
                                          (5, 5, [0, 1, 2, 3, 4])])
def test_uniform_knots_examples(M, T, expected):
    assert spline.uniform_knots(M, T).tolist() == expected


@pytest.mark.parametrize("M,T", [(1, 10), (11, 10), (0, 5)])
def test_uniform_knots_bad_args(M, T):
    with pytest.raises(spline.InvalidArgs):
        spline.uniform_knots(M, T)


@settings(max_examples=200, deadline=None)
@given(T=st.integers(2, 400), data=st.data())
def test_uniform_knots_are_rounded_even_grid(T, data):
    M = data.draw(st.integers(2, T))
    k = spline.uniform_knots(M, T)
    assert k[0] == 0 and k[-1] == T - 1 and np.all(np.diff(k) > 0)
    exact = np.arange(M) * (T - 1) / (M - 1)
    assert np.all(np.abs(k - exact) <= 0.5)


def test_constant_points_give_constant_sequence():
    sp = SparseControlPoints(np.ones((4, 3)), spline.uniform_knots(4, 150))
    coef = spline.fit_natural_cubic(sp)
    np.testing.assert_allclose(coef.b, 0.0, atol=1e-15)
    np.testing.assert_allclose(coef.c, 0.0, atol=1e-15)
    np.testing.assert_allclose(coef.d, 0.0, atol=1e-15)
    np.testing.assert_allclose(spline.interpolate(sp, 150), 1.0, rtol=0, atol=1e-15)


def test_affine_points_give_linear_interpolant():
    # uniform_knots(4, 148) is exactly even (spacing 49); at T=150 the rounded
    # grid [0, 50, 99, 149] is uneven, so equally spaced values are not affine in t
    knots = spline.uniform_knots(4, 148)
    assert np.all(np.diff(knots) == 49)
    pts = np.zeros((4, 3))
    pts[:, 0] = [0, 1, 2, 3]
    lin = spline.interpolate(SparseControlPoints(pts, knots), 148)
    np.testing.assert_allclose(lin[:, 0], np.arange(148) / 49, atol=1e-12)
    np.testing.assert_allclose(lin[:, 1:], 0.0, atol=1e-15)


def test_coefficients_match_dense_oracle():
    knots = [0, 50, 99, 149]
    pts = np.zeros((4, 3))
    pts[:, 0] = [0, 1, 0, 1]
    coef = spline.fit_natural_cubic(SparseControlPoints(pts, knots))
    a, b, c, d = natural_spline_dense(knots, pts[:, 0])
    np.testing.assert_allclose(coef.a[:, 0], a, atol=1e-12)
    np.testing.assert_allclose(coef.b[:, 0], b, atol=1e-12)
    np.testing.assert_allclose(coef.c[:, 0], c, atol=1e-12)
    np.testing.assert_allclose(coef.d[:, 0], d, atol=1e-12)

    dense = spline.interpolate(SparseControlPoints(pts, knots), 150)
    for t in (25, 75, 125):
        assert dense[t, 0] == pytest.approx(eval_dense(knots, (a, b, c, d), t), abs=1e-12)


def test_matches_scipy_natural_spline(rng):
    knots = np.array([0, 17, 40, 41, 90, 149])
    pts = rng.normal(size=(6, 3))
    ours = spline.interpolate(SparseControlPoints(pts, knots), 150)
    ref = CubicSpline(knots, pts, bc_type="natural")(np.arange(150))
    np.testing.assert_allclose(ours, ref, atol=1e-12)


def test_identity_when_every_step_is_a_knot(rng):
    pts = rng.normal(size=(7, 3))
    sp = SparseControlPoints(pts, np.arange(7))
    np.testing.assert_array_equal(spline.interpolate(sp, 7), pts)
    np.testing.assert_array_equal(spline.interpolate_batch(pts[None], np.arange(7), 7)[0], pts)


def test_degenerate_knots():
    sp = SparseControlPoints(np.zeros((3, 3)), [0, 4, 4])
    with pytest.raises(spline.DegenerateKnots):
        spline.fit_natural_cubic(sp)


def test_horizon_mismatch():
    sp = SparseControlPoints(np.zeros((2, 3)), [0, 9])
    with pytest.raises(spline.InvalidArgs):
        spline.interpolate(sp, 11)


def test_batch_matches_single(rng):
    knots = spline.uniform_knots(4, 150)
    P = rng.normal(size=(9, 4, 3))
    batch = spline.interpolate_batch(P, knots, 150)
    for k in range(9):
        single = spline.interpolate(SparseControlPoints(P[k], knots), 150)
        np.testing.assert_allclose(batch[k], single, atol=1e-12)
        # knot values are reproduced bit-exactly by the basis product
        np.testing.assert_array_equal(batch[k][knots], P[k])


# -- properties ---------------------------------------------------------------

@st.composite
def sparse_points(draw, T=150):
    M = draw(st.sampled_from([2, 3, 4, 8]))
    if draw(st.booleans()):
        knots = spline.uniform_knots(M, T)
    else:
        inner = draw(st.lists(st.integers(1, T - 2), min_size=M - 2, max_size=M - 2, unique=True))
        knots = np.array([0] + sorted(inner) + [T - 1])
    vals = draw(st.lists(st.floats(-5, 5), min_size=3 * M, max_size=3 * M))
    return SparseControlPoints(np.array(vals).reshape(M, 3), knots)


@settings(max_examples=150, deadline=None)
@given(sp=sparse_points())
def test_knots_interpolated(sp):
    dense = spline.interpolate(sp, 150)
    assert np.max(np.abs(dense[sp.knot_indices] - sp.points)) <= 1e-9


@settings(max_examples=150, deadline=None)
@given(sp=sparse_points())
def test_c2_continuity_at_interior_knots(sp):
    coef = spline.fit_natural_cubic(sp)
    h = np.diff(sp.knot_indices).astype(float)[:, None]
    for order in range(3):
        # left polynomial evaluated at its right end vs right polynomial at its left end
        if order == 0:
            left = coef.a + h * (coef.b + h * (coef.c + h * coef.d))
            right = coef.a
        elif order == 1:
            left = coef.b + h * (2 * coef.c + 3 * h * coef.d)
            right = coef.b
        else:
            left = 2 * coef.c + 6 * h * coef.d
            right = 2 * coef.c
        diff = np.abs(left[:-1] - right[1:])
        scale = np.maximum(1.0, np.abs(right[1:]))
        assert np.all(diff <= 1e-6 * scale)


@settings(max_examples=150, deadline=None)
@given(sp=sparse_points())
def test_natural_boundary(sp):
    coef = spline.fit_natural_cubic(sp)
    last_h = float(sp.knot_indices[-1] - sp.knot_indices[-2])
    assert np.all(np.abs(2 * coef.c[0]) <= 1e-9)
    assert np.all(np.abs(2 * coef.c[-1] + 6 * last_h * coef.d[-1]) <= 1e-9)


@settings(max_examples=150, deadline=None)
@given(sp=sparse_points(), a=st.floats(-3, 3), b=st.floats(-0.05, 0.05))
def test_affine_reproduction(sp, a, b):
    t = sp.knot_indices.astype(float)
    line = SparseControlPoints(np.column_stack([a + b * t, -a + 2 * b * t, np.full_like(t, a)]),
                               sp.knot_indices)
    dense = spline.interpolate(line, 150)
    ts = np.arange(150.0)
    expect = np.column_stack([a + b * ts, -a + 2 * b * ts, np.full_like(ts, a)])
    assert np.max(np.abs(dense - expect)) <= 1e-9


@settings(max_examples=100, deadline=None)
@given(sp=sparse_points())
def test_axes_are_independent(sp):
    joint = spline.interpolate(sp, 150)
    for axis in range(3):
        pts = np.zeros_like(sp.points)
        pts[:, axis] = sp.points[:, axis]
        alone = spline.interpolate(sp.with_points(pts), 150)
        np.testing.assert_array_equal(alone[:, axis], joint[:, axis])
