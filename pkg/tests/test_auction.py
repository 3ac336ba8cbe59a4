from math import comb

import numpy as np
import pytest
from hypothesis import given, strategies as st

from popt.auction import (AuctionInstance, MechanismConfig, build_lip, bundle_count, enumerate_k_bundles,
                          lip_matrix, perturb, unperturbed)
from popt.errors import BundleSpaceTooLarge, InvalidConfig


def test_bundle_order_two_goods():
    assert enumerate_k_bundles(2, 2) == [(1, 0), (0, 1), (2, 0), (1, 1), (0, 2)]


def test_bundle_counts_for_grids():
    assert bundle_count(9, 4) == 714
    assert bundle_count(16, 4) == 4844
    assert len(enumerate_k_bundles(1, 3)) == 3


@given(st.integers(1, 8), st.integers(1, 4))
def test_bundles_are_distinct_and_sized(g, k):
    bs = enumerate_k_bundles(g, k)
    assert len(set(bs)) == len(bs) == sum(comb(g + m - 1, m) for m in range(1, k + 1))
    sizes = [sum(b) for b in bs]
    assert sizes == sorted(sizes) and min(sizes) == 1 and max(sizes) == k


def test_bundle_cap():
    with pytest.raises(BundleSpaceTooLarge):
        enumerate_k_bundles(30, 6, cap=1000)
    with pytest.raises(ValueError):
        enumerate_k_bundles(0, 2)


def test_instance_validation():
    with pytest.raises(ValueError):
        AuctionInstance(1, 1, np.array([0]), 1, np.ones((1, 1)))
    with pytest.raises(ValueError):
        AuctionInstance(1, 1, np.array([1]), 1, -np.ones((1, 1)))
    with pytest.raises(ValueError):
        AuctionInstance(1, 2, np.array([1, 1]), 1, np.ones((1, 3)))


def test_consumption_and_demand():
    inst = AuctionInstance(2, 2, np.array([1, 1]), 2, np.ones((2, 5)))
    x = np.zeros(10)
    x[3] = 1.0  # agent 0 gets (1,1)
    x[5 + 2] = 0.5  # agent 1 gets half of (2,0)
    np.testing.assert_allclose(inst.consumption(x), [2.0, 1.0])
    np.testing.assert_allclose(inst.demand(x), [1.0, 0.5])


def test_config_validation_and_eps_u():
    with pytest.raises(InvalidConfig):
        MechanismConfig(delta_w=1.0)
    with pytest.raises(InvalidConfig):
        MechanismConfig(delta_eps=0.0)
    inst = AuctionInstance(1, 1, np.array([1]), 1, np.array([[4.0]]))
    assert MechanismConfig(delta_w=1e-5).utility_error(inst) == pytest.approx(8e-5)
    assert MechanismConfig(eps_u=0.5).utility_error(inst) == 0.5
    with pytest.raises(InvalidConfig):
        MechanismConfig(delta_eps=0.5).check_against(inst)


def test_perturbation_ranges():
    rng = np.random.default_rng(0)
    inst = AuctionInstance(3, 2, np.array([2, 3]), 2, rng.random((3, 5)))
    cfg = MechanismConfig(delta_w=0.1, delta_eps=0.01)
    p = perturb(inst, cfg, rng)
    assert np.all((p.weights >= 0.9) & (p.weights <= 1.1))
    assert np.all((p.supply_offsets >= 0.01) & (p.supply_offsets <= 0.02))
    np.testing.assert_allclose(p.perturbed_supplies, inst.supplies - p.supply_offsets)


def test_type_shared_weights():
    rng = np.random.default_rng(1)
    inst = AuctionInstance(4, 1, np.array([2]), 1, np.ones((4, 1)))
    p = perturb(inst, MechanismConfig(), rng, agent_type=["b", "a", "b", "a"])
    assert p.weights[0, 0] == p.weights[2, 0] and p.weights[1, 0] == p.weights[3, 0]
    assert p.weights[0, 0] != p.weights[1, 0]


def test_lip_layout():
    inst = AuctionInstance(2, 2, np.array([1, 2]), 2, np.arange(10.0).reshape(2, 5))
    A = lip_matrix(2, inst.bundles).toarray()
    assert A.shape == (4, 10)
    np.testing.assert_array_equal(A[0], [1] * 5 + [0] * 5)
    np.testing.assert_array_equal(A[2], [1, 0, 2, 1, 0] * 2)
    lp = build_lip(unperturbed(inst))
    np.testing.assert_array_equal(lp.rhs, [1, 1, 1, 2])
    np.testing.assert_array_equal(lp.objective, np.arange(10.0))
