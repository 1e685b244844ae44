import math

import numpy as np
import pytest

from classedge.field import CallableField, LinearPlanesField, SoftmaxRbfField
from classedge.junction import (
    JunctionMethod,
    JunctionNotFoundError,
    JunctionProblem,
    SingularStepError,
    derivative_free_minimize,
    find_triple_junction,
    junction_objective,
    tangent_plane_step,
)
from classedge.oracle import junction_objective_argmin

UNIT = (-1.0, -1.0, 1.0, 1.0)


def linear_junction_field():
    return LinearPlanesField([(1, 0, 0), (0, 1, 0), (-1, -1, 0)], scale=0.1)


def rbf_triangle(seed):
    rng = np.random.default_rng(seed)
    centers = rng.uniform(0.15, 0.85, size=(3, 2))
    weights = rng.uniform(0.9, 1.1, size=3)
    return SoftmaxRbfField(
        centers=[[tuple(c)] for c in centers],
        weights=[[float(w)] for w in weights],
        biases=[0.0, 0.0, 0.0],
        sharpness=3.0,
        temperature=0.5,
    )


def test_objective_values():
    f = CallableField(3, lambda x, y: (0.5, 0.3, 0.2))
    prob = JunctionProblem(f, (0, 1, 2), UNIT)
    assert junction_objective(prob, (0.0, 0.0)) == pytest.approx(0.14)


def test_objective_zero_iff_equal():
    f = CallableField(3, lambda x, y: (1 / 3, 1 / 3, 1 / 3))
    prob = JunctionProblem(f, (0, 1, 2), UNIT)
    assert junction_objective(prob, (0.2, -0.4)) == 0.0


def test_objective_permutation_invariant():
    f = CallableField(3, lambda x, y: (0.5, 0.3, 0.2))
    vals = {
        junction_objective(JunctionProblem(f, perm, UNIT), (0, 0))
        for perm in [(0, 1, 2), (1, 2, 0), (2, 0, 1), (0, 2, 1)]
    }
    assert len(vals) == 1


def test_tangent_step_linear_one_shot():
    f = linear_junction_field()
    prob = JunctionProblem(f, (0, 1, 2), UNIT)
    for start in [(-0.9, 0.8), (0.5, 0.5), (0.0, -0.7)]:
        x, y = tangent_plane_step(prob, start)
        assert x == pytest.approx(0.0, abs=1e-14)
        assert y == pytest.approx(0.0, abs=1e-14)


def test_tangent_step_affine_known_intersection():
    qx, qy = 0.3, -0.2
    # three affine channels all equal at q
    coeffs = [(1.0, 0.5, -(1.0 * qx + 0.5 * qy)),
              (-0.5, 1.0, -(-0.5 * qx + 1.0 * qy)),
              (0.2, -1.1, -(0.2 * qx - 1.1 * qy))]
    f = LinearPlanesField(coeffs, scale=0.05)
    prob = JunctionProblem(f, (0, 1, 2), UNIT)
    x, y = tangent_plane_step(prob, (0.9, 0.9))
    assert (x, y) == pytest.approx((qx, qy), abs=1e-12)


def test_tangent_step_parallel_gradients_raises():
    # all channels share one gradient direction: no junction to aim at
    f = CallableField(
        3,
        lambda x, y: (0.2 + 0.05 * x, 0.3 + 0.05 * x, 0.5 - 0.1 * x),
        grad=lambda x, y, c: ((0.05, 0.0), (0.05, 0.0), (-0.1, 0.0))[c],
    )
    prob = JunctionProblem(f, (0, 1, 2), UNIT)
    with pytest.raises(SingularStepError):
        tangent_plane_step(prob, (0.0, 0.0))


def test_find_junction_linear_exact():
    f = linear_junction_field()
    prob = JunctionProblem(f, (0, 1, 2), UNIT, tolerance=1e-12)
    res = find_triple_junction(prob)
    assert res.method is JunctionMethod.TANGENT_PLANE
    assert res.point == pytest.approx((0.0, 0.0), abs=1e-12)
    assert res.residual < prob.g_tol


@pytest.mark.parametrize("seed", [1, 2, 3, 4, 5])
def test_find_junction_matches_grid_oracle(seed):
    f = rbf_triangle(seed)
    bounds = (0.0, 0.0, 1.0, 1.0)
    prob = JunctionProblem(f, (0, 1, 2), bounds, tolerance=1e-12)
    res = find_triple_junction(prob)
    ox, oy, _, cell = junction_objective_argmin(f, (0, 1, 2), bounds, 500)
    assert math.hypot(res.point[0] - ox, res.point[1] - oy) <= 2.0 * cell
    assert res.residual < prob.g_tol
    x_lo, y_lo, x_hi, y_hi = bounds
    assert x_lo <= res.point[0] <= x_hi and y_lo <= res.point[1] <= y_hi


def test_find_junction_prefers_tangent_plane():
    f = rbf_triangle(1)
    prob = JunctionProblem(f, (0, 1, 2), (0.0, 0.0, 1.0, 1.0))
    res = find_triple_junction(prob)
    assert res.method is JunctionMethod.TANGENT_PLANE


def test_find_junction_failure_raises():
    # constant offsets: channels never meet anywhere
    f = CallableField(3, lambda x, y: (0.6, 0.3, 0.1))
    prob = JunctionProblem(f, (0, 1, 2), UNIT, tolerance=1e-12)
    with pytest.raises(JunctionNotFoundError):
        find_triple_junction(prob)


# ---------------------------------------------------------------------------
# simplex search
# ---------------------------------------------------------------------------


def test_simplex_convex_quadratic():
    target = (0.3, -0.4)
    obj = lambda p: (p[0] - target[0]) ** 2 + (p[1] - target[1]) ** 2
    best = derivative_free_minimize(obj, UNIT, 1e-10, 500)
    assert best == pytest.approx(target, abs=1e-8)


def test_simplex_minimum_at_corner_is_clamped():
    obj = lambda p: -(p[0] + p[1])
    best = derivative_free_minimize(obj, UNIT, 1e-10, 500)
    assert best == pytest.approx((1.0, 1.0), abs=1e-9)


def test_simplex_constant_objective_returns_start():
    best = derivative_free_minimize(lambda p: 1.0, UNIT, 1e-10, 500)
    assert best == (0.0, 0.0)


def test_simplex_budget_exhaustion_returns_best():
    obj = lambda p: (p[0] - 0.5) ** 2 + (p[1] - 0.5) ** 2
    best = derivative_free_minimize(obj, UNIT, 1e-30, 20)
    assert obj(best) <= obj((0.0, 0.0))
