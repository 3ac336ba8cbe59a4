"""Shared helpers for the test suite."""

import itertools

import numpy as np

from popt.auction import AuctionInstance, bundle_matrix


def random_instance(rng, max_goods=3, max_supply=3, max_agents=4, max_k=2, max_value=5, integer=True):
    G = int(rng.integers(1, max_goods + 1))
    k = int(rng.integers(1, max_k + 1))
    N = int(rng.integers(1, max_agents + 1))
    B = bundle_matrix(G, k)
    s = rng.integers(1, max_supply + 1, size=G)
    if integer:
        u = rng.integers(0, max_value + 1, size=(N, len(B))).astype(float)
    else:
        u = rng.uniform(0, max_value, size=(N, len(B)))
    return AuctionInstance(N, G, s, k, u, B)


def vertex_enumeration(c, A, senses, b):
    """Best vertex of ``{x >= 0 : A x (senses) b}`` by trying every active set.

    Returns ``(value, x)`` or ``(None, None)`` when no vertex is feasible.
    Only meaningful for bounded problems.
    """
    A = np.asarray(A, dtype=float)
    m, n = A.shape
    rows = [(A[r], b[r]) for r in range(m)] + [(-np.eye(n)[j], 0.0) for j in range(n)]
    best, arg = None, None
    for act in itertools.combinations(range(len(rows)), n):
        M = np.array([rows[i][0] for i in act])
        if abs(np.linalg.det(M)) < 1e-12:
            continue
        x = np.linalg.solve(M, np.array([rows[i][1] for i in act]))
        if np.any(x < -1e-9):
            continue
        act_val = A @ x
        ok = all(act_val[r] <= b[r] + 1e-9 if senses[r] == "<=" else abs(act_val[r] - b[r]) <= 1e-9
                 for r in range(m))
        if ok and (best is None or c @ x > best + 1e-12):
            best, arg = float(c @ x), x
    return best, arg


def random_feasible_point(rng, ctx, supplies):
    """Random point satisfying demand and the given supplies, with some exact zeros and tight agents."""
    n, nb = ctx.n_agents, ctx.n_bundles
    X = rng.random((n, nb)) * (rng.random((n, nb)) < 0.6)
    totals = np.where(rng.random(n) < 0.5, 1.0, rng.random(n))
    rs = X.sum(axis=1, keepdims=True)
    X = np.where(rs > 0, X / np.where(rs > 0, rs, 1) * totals[:, None], 0.0)
    used = ctx.base.consumption(X.ravel())
    scale = np.min(np.where(used > 0, supplies / np.maximum(used, 1e-300), np.inf), initial=np.inf)
    return X.ravel() * min(1.0, scale)
