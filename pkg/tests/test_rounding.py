import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from popt.auction import AuctionInstance, MechanismConfig, perturb, unperturbed
from popt.errors import RoundingStall
from popt.rounding import RoundingState, drop_rule, is_integral, iterative_rounding, snap

from _util import random_feasible_point, random_instance


def test_integral_input_is_returned_unchanged():
    inst = AuctionInstance(2, 1, np.array([1]), 1, np.array([[2.0], [1.0]]))
    x = np.array([1.0, 0.0])
    np.testing.assert_array_equal(iterative_rounding(x, np.ones(2), unperturbed(inst), [1.0]), x)


def test_split_good_goes_to_higher_reward():
    inst = AuctionInstance(2, 1, np.array([1]), 1, np.array([[1.0], [1.0]]))
    out = iterative_rounding([0.5, 0.5], [1.0, 2.0], unperturbed(inst), [1.0])
    np.testing.assert_array_equal(out, [0.0, 1.0])


def test_drop_rule_allows_k_minus_one_overshoot():
    # one agent, one good, k=2: half of the 2-unit bundle uses the whole supply
    inst = AuctionInstance(1, 1, np.array([1]), 2, np.array([[0.0, 3.0]]))
    out, state = iterative_rounding([0.0, 0.5], [0.0, 3.0], unperturbed(inst), [1.0], return_state=True)
    np.testing.assert_array_equal(out, [0.0, 1.0])
    assert inst.consumption(out)[0] == 2.0
    assert not state.active_goods[0]


def test_drop_rule_stall():
    state = RoundingState(
        tau=3, active_goods=np.array([True]), fractional_support=np.array([True, True, True]),
        residual_supplies=np.array([0.5]), tight_agents=np.zeros(3, bool),
        current_point=np.full(3, 0.5), n_agents=3, bundles=np.array([[1]]), k=1)
    with pytest.raises(RoundingStall):
        drop_rule(state)


def test_rejects_infeasible_input():
    inst = AuctionInstance(1, 1, np.array([1]), 1, np.array([[1.0]]))
    ctx = unperturbed(inst)
    with pytest.raises(ValueError):
        iterative_rounding([1.5], [1.0], ctx, [2.0])
    with pytest.raises(ValueError):
        iterative_rounding([0.8], [1.0], ctx, [0.5])
    with pytest.raises(ValueError):
        iterative_rounding([0.5, 0.5], [1.0], ctx, [1.0])


def test_snap():
    np.testing.assert_array_equal(snap([1e-9, 1 - 1e-9, 0.5]), [0.0, 1.0, 0.5])
    assert is_integral([0.0, 1.0, 1e-8]) and not is_integral([0.3])


@settings(max_examples=120, deadline=None)
@given(st.integers(0, 10**6))
def test_rounding_guarantees(seed):
    rng = np.random.default_rng(seed)
    inst = random_instance(rng, max_goods=3, max_supply=3, max_agents=5, max_k=3)
    ctx = perturb(inst, MechanismConfig(), rng)
    s = ctx.perturbed_supplies
    z = random_feasible_point(rng, ctx, s)
    c = rng.normal(size=z.size)
    out, state = iterative_rounding(z, c, ctx, s, return_state=True)
    assert is_integral(out)
    assert c @ out >= c @ z - 1e-7
    assert np.all(inst.consumption(out) <= np.ceil(s - 1e-9) + inst.k - 1 + 1e-9)
    assert np.all(out[snap(z) == 0] == 0)
    assert np.all(inst.demand(out) <= 1 + 1e-9)
    tight = np.abs(inst.demand(z) - 1) <= 1e-7
    np.testing.assert_allclose(inst.demand(out)[tight], 1.0)
    # each round strictly shrinks the fractional support or the set of active goods
    h = state.history
    assert all(b[0] < a[0] or b[1] < a[1] for a, b in zip(h, h[1:]))
