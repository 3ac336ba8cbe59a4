import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from popt.auction import bundle_matrix
from popt.errors import InvalidConfig
from popt.spectrum import (AgentField, GridSpec, MultibandBundle, cell_class, classify_bundle_shape, generate,
                           generate_field, grid_edges, grid_utility, utility_matrix)


def field_1x2(u1, u2, c12, c21):
    return AgentField(np.array([[u1, u2]]), np.array([[c12, c21]]), grid_edges(1, 2), 1, 2)


def test_edge_counts():
    assert grid_edges(3, 3).shape == (24, 2)
    assert grid_edges(1, 1).shape == (0, 2)
    assert grid_edges(4, 4).shape == (48, 2)
    e = {tuple(p) for p in grid_edges(3, 3)}
    assert all((k, j) in e for j, k in e)
    assert (0, 1) in e and (0, 3) in e and (0, 4) not in e


def test_cell_classes():
    c = cell_class(3, 3)
    assert list(c[[0, 2, 6, 8]]) == ["corner"] * 4
    assert c[4] == "interior" and c[1] == "edge"


def test_utility_examples_on_1x2():
    f = field_1x2(5, 7, 2, 3)
    assert grid_utility(f, (1, 1)) == 12
    assert grid_utility(f, (1, 0)) == 5 - 2
    assert grid_utility(f, (0, 1)) == 7 - 3
    assert grid_utility(f, (2, 1)) == 10 + 7 - 2


def test_utility_is_clipped_at_zero():
    assert grid_utility(field_1x2(1, 0, 1, 0), (2, 0)) == 0.0


def test_square_on_2x2_arena_has_no_penalty():
    spec = GridSpec(m_g=2, n_g=2, n_agents=1, k_a=4, mu=5.0, lam=0.5)
    f = generate_field(spec, np.random.default_rng(0))
    assert grid_utility(f, (1, 1, 1, 1)) == f.cell_users[0].sum()


def test_translation_consistency():
    spec = GridSpec(m_g=1, n_g=2, n_agents=3, k_a=4, mu=5.0, lam=0.5)
    f = generate_field(spec, np.random.default_rng(1))
    for c in (1, 2):
        np.testing.assert_allclose(utility_matrix(f, np.array([[c, c]]))[:, 0], c * f.cell_users.sum(axis=1))


def test_single_cell_grid_has_no_boundary_term():
    spec = GridSpec(m_g=1, n_g=1, n_agents=2, k_a=2, mu=4.0, lam=0.9)
    inst, f = generate(spec, np.random.default_rng(2), return_field=True)
    np.testing.assert_allclose(inst.valuations, f.cell_users @ np.array([[1, 2]]))


def test_zero_intensity_gives_zero_utilities():
    inst = generate(GridSpec(mu=0.0, n_agents=3), np.random.default_rng(0))
    assert np.all(inst.valuations == 0)


def test_indicator_model():
    f = field_1x2(5, 7, 2, 3)
    B = np.array([[2, 0], [1, 1]])
    np.testing.assert_allclose(utility_matrix(f, B, "indicator")[0], [5 - 2 * 2, 12])


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6), st.integers(1, 3), st.integers(1, 3), st.integers(1, 3))
def test_utility_matrix_matches_direct_formula(seed, m, n, k):
    spec = GridSpec(m_g=m, n_g=n, n_agents=2, k_a=k, mu=3.0, lam=0.6)
    f = generate_field(spec, np.random.default_rng(seed))
    B = bundle_matrix(m * n, k)
    U = utility_matrix(f, B)
    for i in range(2):
        for b, bundle in enumerate(B):
            v = sum(f.cell_users[i, j] * bundle[j] for j in range(m * n))
            v -= sum(max(bundle[j] - bundle[kk], 0) * f.boundary_users[i, e]
                     for e, (j, kk) in enumerate(f.edges))
            assert U[i, b] == max(v, 0)


def test_user_counts_concentrate():
    spec = GridSpec(m_g=3, n_g=3, n_agents=5, mu=20.0, lam=0.4)
    runs = 60
    cells = np.array([generate_field(spec, np.random.default_rng(s)).cell_users for s in range(runs)])
    n = cells.size
    assert abs(cells.mean() - 20.0) <= 3 * np.sqrt(20.0 / n)
    # each strip holds a lam/4 share of its cell's users
    f = [generate_field(spec, np.random.default_rng(1000 + s)) for s in range(runs)]
    strip = np.concatenate([x.boundary_users.ravel() for x in f]).sum()
    total = np.concatenate([x.cell_users[:, x.edges[:, 0]].ravel() for x in f]).sum()
    p = 0.1
    assert abs(strip / total - p) <= 3 * np.sqrt(p * (1 - p) / total)


def test_field_invariants_checked():
    with pytest.raises(ValueError):
        field_1x2(1, 1, 2, 0)


def test_generated_instance_shape():
    spec = GridSpec()
    inst = generate(spec, np.random.default_rng(0))
    assert inst.n_bundles == 714 and inst.n_goods == 9
    assert np.all(inst.supplies == 10) and inst.supplies.sum() == 90


def test_grid_spec_validation():
    with pytest.raises(InvalidConfig):
        GridSpec(lam=1.0)
    with pytest.raises(InvalidConfig):
        GridSpec(m_g=0)
    with pytest.raises(InvalidConfig):
        GridSpec(utility_model="quadratic")


def test_shapes():
    sq = np.zeros(9, int)
    sq[[0, 1, 3, 4]] = 1
    assert classify_bundle_shape(sq, 3, 3) == (4, 4)
    line = np.zeros(16, int)
    line[[0, 1, 2, 3]] = 1
    assert classify_bundle_shape(line, 4, 4) == (4, 3)
    ell = np.zeros(16, int)
    ell[[0, 4, 8, 9]] = 1
    assert classify_bundle_shape(ell, 4, 4) == (4, 3)
    one = np.zeros(9, int)
    one[4] = 1
    assert classify_bundle_shape(one, 3, 3) == (1, 0)
    with pytest.raises(MultibandBundle):
        classify_bundle_shape(2 * one, 3, 3)


def test_only_the_square_has_four_internal_adjacencies():
    counts = {}
    for cells in itertools.combinations(range(16), 4):
        b = np.zeros(16, int)
        b[list(cells)] = 1
        s = classify_bundle_shape(b, 4, 4)[1]
        counts[s] = counts.get(s, 0) + 1
    assert counts[4] == 9  # 2x2 squares inside a 4x4 grid
    assert max(counts) == 4
