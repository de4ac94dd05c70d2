import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pushsum_penalty.penalty import (
    ConstraintFn,
    LocalProblem,
    PenalizedProblem,
    check_constraint_bounds,
    check_objective_gradient,
    penalized_gradient,
    penalty_g,
    penalty_g_array,
    penalty_g_prime,
    penalty_grad,
    penalty_value,
    penalty_value_batch,
)

# extended-precision references (mpmath, 40 digits)
LOGCOSH_1 = 0.4337808304830271870
G_1000 = 999.3068528194400547
TANH_1 = 0.7615941559557648881

finite = st.floats(-50, 50, allow_nan=False)


def linear_constraint(coef, offset, name="lin"):
    coef = np.asarray(coef, dtype=float)
    return ConstraintFn(
        value=lambda z: float(coef @ z + offset),
        grad=lambda z: coef,
        grad_bound=float(np.linalg.norm(coef)),
        lipschitz_bound=0.0,
        name=name,
    )


def problem_with(*cons, dim=2, objective=None):
    f = objective or (lambda z: float(z @ z))
    base = LocalProblem(f, lambda z: 2.0 * np.asarray(z, dtype=float), cons, dim)
    return PenalizedProblem(base)


# -- g and g' ------------------------------------------------------------------


@pytest.mark.parametrize("u, expected", [(0.0, 0.0), (-5.0, 0.0), (1.0, LOGCOSH_1), (1000.0, G_1000)])
def test_penalty_g_values(u, expected):
    assert penalty_g(u) == pytest.approx(expected, rel=1e-15, abs=0.0)


def test_penalty_g_no_overflow_far_out():
    assert penalty_g(1e6) == pytest.approx(1e6 - math.log(2.0), rel=1e-15)
    assert penalty_g(720.0) == pytest.approx(720.0 - math.log(2.0), rel=1e-15)


def test_penalty_g_branches_agree_at_switch():
    # the log-cosh and log1p forms coincide near the switching point
    for u in (19.999, 20.0, 20.001):
        direct = math.log(math.cosh(u))
        assert penalty_g(u) == pytest.approx(direct, rel=1e-14)


@pytest.mark.parametrize("bad", [math.inf, -math.inf, math.nan])
def test_penalty_g_rejects_non_finite(bad):
    with pytest.raises(ValueError):
        penalty_g(bad)
    with pytest.raises(ValueError):
        penalty_g_prime(bad)


def test_penalty_g_prime_values():
    assert penalty_g_prime(0.0) == 0.0
    assert penalty_g_prime(-3.0) == 0.0
    assert penalty_g_prime(1.0) == pytest.approx(TANH_1, rel=1e-15)


def test_penalty_g_prime_matches_central_difference():
    h = 1e-6
    fd = (penalty_g(0.5 + h) - penalty_g(0.5 - h)) / (2 * h)
    assert abs(fd - penalty_g_prime(0.5)) < 1e-6


def test_penalty_g_array_matches_scalar():
    u = np.array([-3.0, 0.0, 1e-8, 0.5, 1.0, 19.9, 20.0, 300.0, 1000.0])
    np.testing.assert_allclose(penalty_g_array(u), [penalty_g(x) for x in u], rtol=1e-15, atol=0)
    with pytest.raises(ValueError):
        penalty_g_array(np.array([0.0, np.nan]))


@settings(max_examples=300, deadline=None)
@given(finite, finite, st.floats(0, 1))
def test_g_convex_nondecreasing(u, v, lam):
    u, v = min(u, v), max(u, v)
    assert penalty_g_prime(u) <= penalty_g_prime(v)
    mid = penalty_g(lam * u + (1 - lam) * v)
    assert mid <= lam * penalty_g(u) + (1 - lam) * penalty_g(v) + 1e-12 * (1 + abs(u) + abs(v))


@settings(max_examples=300, deadline=None)
@given(finite, finite)
def test_g_prime_bounded_and_1_lipschitz(u, v):
    assert 0.0 <= penalty_g_prime(u) <= 1.0
    assert abs(penalty_g_prime(u) - penalty_g_prime(v)) <= abs(u - v) + 1e-15


# -- problem-level penalty -----------------------------------------------------


def test_penalty_value_examples():
    c = linear_constraint([1.0, 0.0], -1.0)  # z0 - 1 <= 0
    p = problem_with(c)
    assert penalty_value(p, np.array([0.0, 0.0])) == 0.0
    assert penalty_value(p, np.array([2.0, 0.0])) == pytest.approx(LOGCOSH_1, rel=1e-15)
    p2 = problem_with(c, linear_constraint([0.0, 1.0], -1.0))
    assert penalty_value(p2, np.array([2.0, 2.0])) == pytest.approx(2 * LOGCOSH_1, rel=1e-15)


def test_penalty_grad_chain_rule():
    # c(z) = 2 z0 - 1, evaluated where c = 1
    c = linear_constraint([2.0, 0.0], -1.0)
    p = problem_with(c)
    np.testing.assert_allclose(penalty_grad(p, np.array([1.0, 5.0])), [2 * TANH_1, 0.0], rtol=1e-15)
    np.testing.assert_array_equal(penalty_grad(p, np.array([0.0, 0.0])), [0.0, 0.0])


def test_dimension_mismatch_rejected():
    p = problem_with(linear_constraint([1.0, 0.0], 0.0))
    with pytest.raises(ValueError, match="dimension"):
        penalty_value(p, np.zeros(3))
    with pytest.raises(ValueError, match="dimension"):
        penalty_grad(p, np.zeros(1))


def test_penalty_grad_matches_finite_differences():
    cons = (
        ConstraintFn(lambda z: float(z @ z - 1.0), lambda z: 2.0 * z, 20.0, 2.0, "ball"),
        linear_constraint([1.0, -1.0], 0.3),
    )
    p = problem_with(*cons)
    r = np.random.default_rng(3)
    h = 1e-6
    for _ in range(100):
        z = r.uniform(-3, 3, size=2)
        fd = np.array(
            [(penalty_value(p, z + h * e) - penalty_value(p, z - h * e)) / (2 * h) for e in np.eye(2)]
        )
        g = penalty_grad(p, z)
        assert np.linalg.norm(g - fd) <= 1e-5 * max(1.0, np.linalg.norm(fd))


def test_penalty_zero_iff_feasible():
    cons = (linear_constraint([1.0, 0.0], -1.0), linear_constraint([0.0, -1.0], -2.0))
    p = problem_with(*cons)
    r = np.random.default_rng(5)
    for z in r.uniform(-4, 4, size=(500, 2)):
        worst = max(c.value(z) for c in cons)
        assert (penalty_value(p, z) == 0.0) == (worst <= 0.0)
        if worst < 0.0:
            assert not np.any(penalty_grad(p, z))


def test_penalty_grad_norm_bounded_by_declared():
    cons = (linear_constraint([3.0, 4.0], 0.0), linear_constraint([1.0, 0.0], 0.0))
    p = problem_with(*cons)
    assert p.grad_bound == pytest.approx(6.0)
    for z in np.random.default_rng(1).uniform(-100, 100, size=(200, 2)):
        assert np.linalg.norm(penalty_grad(p, z)) <= p.grad_bound


def test_penalized_gradient_affine_in_r():
    c = linear_constraint([1.0, 1.0], -1.0)
    p = problem_with(c)
    z = np.array([1.0, 2.0])
    g1 = penalized_gradient(p, z, 1.0)
    np.testing.assert_allclose(g1, 2 * z + penalty_grad(p, z))
    r = 3.5
    np.testing.assert_allclose(penalized_gradient(p, z, 2 * r) - penalized_gradient(p, z, r), r * penalty_grad(p, z))
    feasible = np.array([0.1, 0.1])
    np.testing.assert_array_equal(penalized_gradient(p, feasible, 50.0), 2 * feasible)


def test_penalized_gradient_rejects_small_r():
    p = problem_with(linear_constraint([1.0, 0.0], 0.0))
    with pytest.raises(ValueError, match="r >= 1"):
        penalized_gradient(p, np.zeros(2), 0.5)


def test_batch_penalty_matches_pointwise():
    cons = (linear_constraint([1.0, 0.0], -1.0), linear_constraint([0.0, 1.0], -1.0))
    p = problem_with(*cons)
    pts = np.random.default_rng(2).uniform(-3, 3, size=(7, 5, 2))
    batch = penalty_value_batch([p, p], pts)
    ref = np.array([[2 * penalty_value(p, z) for z in row] for row in pts])
    np.testing.assert_allclose(batch, ref, rtol=1e-12, atol=1e-15)


def test_declared_bounds_checkers():
    ball = ConstraintFn(lambda z: float(z @ z - 1.0), lambda z: 2.0 * z, 2 * math.sqrt(8) + 1e-9, 2.0, "ball")
    gmax, lmax = check_constraint_bounds(ball, [-2, -2], [2, 2])
    assert gmax <= ball.grad_bound and lmax <= 2.0 + 1e-9
    liar = ConstraintFn(ball.value, ball.grad, 1.0, 2.0, "liar")
    with pytest.raises(AssertionError):
        check_constraint_bounds(liar, [-2, -2], [2, 2])
    good = LocalProblem(lambda z: float(np.sum(np.sin(z))), lambda z: np.cos(z), (), 3)
    assert check_objective_gradient(good, -np.ones(3), np.ones(3)) < 1e-5
    bad = LocalProblem(lambda z: float(np.sum(np.sin(z))), lambda z: np.sin(z), (), 3)
    with pytest.raises(AssertionError):
        check_objective_gradient(bad, -np.ones(3), np.ones(3))


def test_constraint_declarations_validated():
    with pytest.raises(ValueError):
        ConstraintFn(lambda z: 0.0, lambda z: z, 0.0, 1.0)
    with pytest.raises(ValueError):
        ConstraintFn(lambda z: 0.0, lambda z: z, 1.0, -1.0)
    with pytest.raises(ValueError):
        LocalProblem(lambda z: 0.0, lambda z: z, (), 0)
