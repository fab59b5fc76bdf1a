import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import optimize

from aruba.core import (
    EUCLIDEAN,
    NEGATIVE_ENTROPY,
    BoundaryError,
    Domain,
    InvalidArgument,
    LinearLoss,
    LogisticLoss,
    QuadraticLoss,
    Task,
    UnsupportedError,
    bregman,
    hindsight_optimum,
    make_rng,
    project,
    project_matrix,
    unit_sphere,
)

finite = st.floats(-5, 5, allow_nan=False, allow_infinity=False)


def vec(d):
    return st.lists(finite, min_size=d, max_size=d).map(np.array)


def test_rng_is_reproducible_and_keyed():
    a = make_rng(3, 1, 2).normal(size=5)
    b = make_rng(3, 1, 2).normal(size=5)
    c = make_rng(3, 1, 3).normal(size=5)
    assert np.array_equal(a, b)
    assert not np.allclose(a, c)


def test_unit_sphere_norms():
    x = unit_sphere(make_rng(0), 7, 100)
    assert np.allclose(np.linalg.norm(x, axis=1), 1.0)


def test_bregman_euclidean_is_half_squared_distance():
    assert bregman(EUCLIDEAN, [1.0, 2.0], [0.0, 0.0]) == pytest.approx(2.5)


def test_bregman_entropy_is_kl_on_simplex():
    p, q = np.array([0.2, 0.3, 0.5]), np.array([0.4, 0.4, 0.2])
    assert bregman(NEGATIVE_ENTROPY, p, q) == pytest.approx(float(np.sum(p * np.log(p / q))))


def test_bregman_entropy_allows_zero_theta_but_not_zero_phi():
    assert bregman(NEGATIVE_ENTROPY, [1.0, 0.0], [0.5, 0.5]) == pytest.approx(np.log(2))
    with pytest.raises(BoundaryError):
        bregman(NEGATIVE_ENTROPY, [0.5, 0.5], [1.0, 0.0])


def test_bregman_rejects_mismatch_and_nan():
    with pytest.raises(InvalidArgument):
        bregman(EUCLIDEAN, [1.0], [1.0, 2.0])
    with pytest.raises(InvalidArgument):
        bregman(EUCLIDEAN, [np.nan], [1.0])


@settings(max_examples=60, deadline=None)
@given(vec(4), vec(4))
def test_bregman_nonnegative_and_zero_on_diagonal(x, y):
    assert bregman(EUCLIDEAN, x, y) >= 0
    assert bregman(EUCLIDEAN, x, x) == 0


def test_domain_diameters():
    assert Domain.ball(np.zeros(3), 1.0).diameter == 2.0
    assert Domain.cube(2, 1.0).diameter == pytest.approx(2 * np.sqrt(2))
    assert Domain.simplex(3).diameter == pytest.approx(np.sqrt(2))
    assert Domain.ball(np.zeros(2), 1.0).max_bregman() == pytest.approx(2.0)


def test_project_box_and_ball():
    assert np.allclose(project(Domain.cube(2, 1.0), [3.0, -0.5]), [1.0, -0.5])
    assert np.allclose(project(Domain.ball(np.zeros(2), 1.0), [3.0, 4.0]), [0.6, 0.8])


def test_project_simplex_matches_qp():
    rng = make_rng(1)
    dom = Domain.simplex(5)
    for _ in range(5):
        y = rng.normal(size=5)
        res = optimize.minimize(lambda x: 0.5 * np.sum((x - y) ** 2), np.full(5, 0.2),
                                constraints=[{"type": "eq", "fun": lambda x: x.sum() - 1}],
                                bounds=[(0, None)] * 5, method="SLSQP",
                                options={"ftol": 1e-14})
        assert np.allclose(project(dom, y), res.x, atol=1e-6)


def test_weighted_ball_projection_matches_qp():
    rng = make_rng(2)
    dom = Domain.ball(np.zeros(3), 1.0)
    y = np.array([2.0, -1.0, 0.5])
    w = rng.uniform(0.2, 3.0, 3)
    res = optimize.minimize(lambda x: np.sum(w * (x - y) ** 2), np.zeros(3),
                            constraints=[{"type": "ineq", "fun": lambda x: 1 - x @ x}],
                            method="SLSQP", options={"ftol": 1e-14})
    x = project(dom, y, weight=w)
    assert np.linalg.norm(x) == pytest.approx(1.0)
    assert np.allclose(x, res.x, atol=1e-5)


def test_weighted_simplex_projection_unsupported():
    with pytest.raises(UnsupportedError):
        project(Domain.simplex(3), [0.2, 0.3, 0.5], weight=[1.0, 2.0, 3.0])


def test_matrix_projection_matches_qp():
    rng = make_rng(3)
    dom = Domain.cube(3, 0.5)
    A = rng.normal(size=(3, 3))
    P = A @ A.T + 0.5 * np.eye(3)
    y = np.array([1.5, -0.2, 0.9])
    x = project_matrix(dom, y, P)
    res = optimize.minimize(lambda z: (z - y) @ P @ (z - y), np.zeros(3),
                            bounds=[(-0.5, 0.5)] * 3, method="L-BFGS-B",
                            options={"ftol": 1e-15, "gtol": 1e-12})
    assert dom.contains(x)
    assert (x - y) @ P @ (x - y) <= (res.x - y) @ P @ (res.x - y) + 1e-10


def test_matrix_projection_needs_box():
    with pytest.raises(UnsupportedError):
        project_matrix(Domain.ball(np.zeros(2), 1.0), [2.0, 0.0], np.eye(2))


@settings(max_examples=60, deadline=None)
@given(vec(3), vec(3))
def test_projection_is_nonexpansive_and_idempotent(x, y):
    for dom in (Domain.ball(np.zeros(3), 1.0), Domain.cube(3, 1.0), Domain.simplex(3)):
        px, py = project(dom, x), project(dom, y)
        assert dom.contains(px, 1e-9)
        assert np.allclose(project(dom, px), px, atol=1e-12)
        assert np.linalg.norm(px - py) <= np.linalg.norm(x - y) + 1e-9


@pytest.mark.parametrize("loss", [
    QuadraticLoss([0.3, -0.2], 1.7),
    LinearLoss([0.5, -1.0]),
    LogisticLoss([0.4, 0.9], -1.0),
])
def test_gradients_match_finite_differences(loss):
    x = np.array([0.1, -0.4])
    num = optimize.approx_fprime(x, loss.value, 1e-7)
    assert np.allclose(loss.grad(x), num, atol=1e-5)


def test_logistic_is_stable_for_large_margins():
    loss = LogisticLoss([1.0], 1.0)
    assert np.isfinite(loss.value(np.array([-800.0])))
    assert loss.value(np.array([800.0])) == pytest.approx(0.0, abs=1e-300)


def test_lipschitz_bounds_hold_on_random_probes():
    rng = make_rng(4)
    dom = Domain.ball(np.zeros(3), 1.0)
    losses = [QuadraticLoss(rng.normal(size=3) * 0.3), LinearLoss(rng.normal(size=3)),
              LogisticLoss(rng.normal(size=3), 1.0)]
    pts = dom.sample(rng, 500)
    for loss in losses:
        bound = loss.lipschitz(dom)
        assert max(np.linalg.norm(loss.grad(p)) for p in pts) <= bound + 1e-12


def test_task_rejects_bad_lipschitz():
    with pytest.raises(InvalidArgument):
        Task([LinearLoss([1.0])], 0.0)


def test_hindsight_quadratic_closed_form():
    rng = make_rng(5)
    a = rng.normal(size=(20, 4))
    w = rng.uniform(0.5, 2, 20)
    task = Task([QuadraticLoss(x, c) for x, c in zip(a, w)], 10.0)
    dom = Domain.ball(np.zeros(4), 10.0)
    assert np.allclose(hindsight_optimum(task, dom), w @ a / w.sum(), atol=1e-12)


def test_hindsight_linear_on_box_is_a_vertex():
    task = Task([LinearLoss([1.0, -2.0]), LinearLoss([0.5, 0.5])], 3.0)
    assert np.allclose(hindsight_optimum(task, Domain.cube(2, 1.0)), [-1.0, 1.0])


def test_hindsight_linear_unbounded_raises():
    with pytest.raises(InvalidArgument):
        hindsight_optimum(Task([LinearLoss([1.0])], 1.0), Domain.unconstrained(1))


def test_hindsight_logistic_satisfies_first_order_condition():
    rng = make_rng(6)
    x = rng.normal(size=(30, 3))
    y = np.where(rng.uniform(size=30) < 0.5, 1.0, -1.0)
    task = Task([LogisticLoss(a, b) for a, b in zip(x, y)], 10.0)
    dom = Domain.ball(np.zeros(3), 1.0)
    opt = hindsight_optimum(task, dom)
    g = task.total_grad(opt)
    # projected-gradient fixed point
    assert np.linalg.norm(opt - project(dom, opt - 0.1 * g)) < 1e-8


def test_hindsight_empty_task():
    with pytest.raises(InvalidArgument):
        hindsight_optimum(Task([], 1.0), Domain.cube(1, 1.0))
