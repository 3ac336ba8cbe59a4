import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from popt.auction import AuctionInstance, MechanismConfig, build_lip, perturb, unperturbed
from popt.errors import VerificationFailure
from popt.lottery import (construct_lottery, modified_supplies, nearest_point_in_hull,
                          perturbation_step, sample, verify_mlip_optimality)
from popt.lp import solve
from popt.rounding import is_integral

from _util import random_instance


def test_projection_onto_segment_closed_form():
    proj = nearest_point_in_hull([[0.0, 0.0], [2.0, 0.0]], [1.0, 1.0])
    np.testing.assert_allclose(proj.y_star, [1.0, 0.0], atol=1e-12)
    np.testing.assert_allclose(proj.lambdas, [0.5, 0.5], atol=1e-12)
    assert proj.distance == pytest.approx(1.0)


def test_projection_onto_vertex_and_interior():
    proj = nearest_point_in_hull([[0.0, 0.0], [1.0, 0.0]], [-1.0, -1.0])
    np.testing.assert_allclose(proj.y_star, [0.0, 0.0])
    assert proj.distance == pytest.approx(np.sqrt(2))
    tri = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]
    proj = nearest_point_in_hull(tri, [0.25, 0.25])
    assert proj.distance < 1e-12
    np.testing.assert_allclose(proj.lambdas @ np.array(tri), [0.25, 0.25], atol=1e-12)


def test_projection_with_duplicates_and_single_point():
    proj = nearest_point_in_hull([[1.0, 1.0], [1.0, 1.0], [3.0, 1.0]], [2.0, 0.0])
    np.testing.assert_allclose(proj.y_star, [2.0, 1.0], atol=1e-12)
    proj = nearest_point_in_hull([[1.0, 2.0]], [0.0, 0.0])
    assert proj.distance == pytest.approx(np.sqrt(5))
    with pytest.raises(ValueError):
        nearest_point_in_hull(np.zeros((0, 2)), [0.0, 0.0])


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 10**6), st.integers(1, 8), st.integers(1, 6))
def test_projection_first_order_optimality(seed, npts, dim):
    rng = np.random.default_rng(seed)
    P = rng.integers(0, 2, size=(npts, dim)).astype(float)
    x = rng.random(dim)
    proj = nearest_point_in_hull(P, x)
    assert np.all(proj.lambdas >= 0) and proj.lambdas.sum() == pytest.approx(1.0)
    np.testing.assert_allclose(proj.lambdas @ P, proj.y_star, atol=1e-12)
    # y is the projection iff (x - y).(p - y) <= 0 for every p
    assert np.max((P - proj.y_star) @ (x - proj.y_star)) <= 1e-9


def test_integral_optimum_short_circuits():
    inst = AuctionInstance(1, 1, np.array([2]), 1, np.array([[5.0]]))
    ctx = perturb(inst, MechanismConfig(), np.random.default_rng(0))
    sol = solve(build_lip(ctx))
    lot = construct_lottery(sol.primal, ctx, MechanismConfig())
    assert len(lot) == 1 and lot.weights[0] == 1.0
    np.testing.assert_array_equal(lot.points[0], [1.0])


def test_perturbation_step_is_symmetric_in_goods():
    inst = AuctionInstance(3, 3, np.array([1, 1, 1]), 2, np.ones((3, 9)))
    ctx = unperturbed(inst)
    steps = [perturbation_step(ctx, 1e-3, j) for j in range(3)]
    assert steps[0] == pytest.approx(steps[1]) == pytest.approx(steps[2])
    # column of good 0 over (1,0,0),(0,1,0),(0,0,1),(2,0,0),(1,1,0),(1,0,1),...: squares sum to 1+4+1+1 = 7
    assert steps[0] == pytest.approx(1e-3 / np.sqrt(3 * 7))


def _lottery(seed):
    rng = np.random.default_rng(seed)
    inst = random_instance(rng)
    cfg = MechanismConfig()
    ctx = perturb(inst, cfg, rng)
    sol = solve(build_lip(ctx))
    return inst, ctx, sol, construct_lottery(sol.primal, ctx, cfg), cfg


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6))
def test_lottery_reproduces_lp_optimum(seed):
    inst, ctx, sol, lot, cfg = _lottery(seed)
    assert np.all(lot.weights > 0) and lot.weights.sum() == pytest.approx(1.0)
    assert np.linalg.norm(lot.mean() - sol.primal) <= cfg.eps
    for p in lot.points:
        assert is_integral(p)
        assert np.all(inst.demand(p) <= 1)
        assert np.all(inst.consumption(p) <= inst.supplies + inst.k - 1)
        assert np.all(p[sol.primal <= 1e-7] == 0)
        rep = verify_mlip_optimality(p, ctx, sol)
        assert rep.cs_residual <= 1e-6 * (1 + abs(rep.point_objective))


def test_sampling_is_seeded_and_follows_weights():
    inst = AuctionInstance(2, 1, np.array([1]), 1, np.array([[2.0], [1.0]]))
    cfg = MechanismConfig(delta_eps=0.2)
    ctx = perturb(inst, cfg, np.random.default_rng(3))
    sol = solve(build_lip(ctx))
    lot = construct_lottery(sol.primal, ctx, cfg)
    assert len(lot) == 2
    a = [sample(lot, np.random.default_rng(11)) for _ in range(3)]
    b = [sample(lot, np.random.default_rng(11)) for _ in range(3)]
    assert all(np.array_equal(u, v) for u, v in zip(a, b))
    rng = np.random.default_rng(5)
    n = 4000
    first = lot.points[0]
    hits = sum(np.array_equal(sample(lot, rng), first) for _ in range(n))
    p = lot.weights[0]
    assert abs(hits - n * p) <= 3 * np.sqrt(n * p * (1 - p)) + 1


def test_mlip_rejects_a_wrong_point():
    inst = AuctionInstance(2, 1, np.array([1]), 1, np.array([[2.0], [1.0]]))
    ctx = perturb(inst, MechanismConfig(), np.random.default_rng(0))
    sol = solve(build_lip(ctx))
    verify_mlip_optimality(np.array([1.0, 0.0]), ctx, sol)
    with pytest.raises(VerificationFailure) as e:
        verify_mlip_optimality(np.array([0.0, 1.0]), ctx, sol)
    assert e.value.condition == "mlip-optimality"
    with pytest.raises(VerificationFailure) as e:
        verify_mlip_optimality(np.array([0.5, 0.0]), ctx, sol)
    assert e.value.condition == "integrality"


def test_modified_supplies_rule():
    inst = AuctionInstance(2, 2, np.array([1, 1]), 1, np.array([[2.0, 1.0], [1.0, 0.0]]))
    ctx = unperturbed(inst, [0.1, 0.1])
    x_star = np.array([0.9, 0.0, 0.0, 0.0])  # good 0 tight, good 1 slack
    point = np.array([1.0, 0.0, 0.0, 0.0])
    np.testing.assert_allclose(modified_supplies(point, x_star, ctx), [1.0, 0.9])
