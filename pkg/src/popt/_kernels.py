"""Hot inner loops, compiled with numba when available.

Set ``POPT_DISABLE_NUMBA=1`` in the environment to force the pure-numpy
path (useful for debugging and for the kernel benchmark). Every kernel has
both implementations; ``BACKEND`` reports which one the module-level names
are bound to.
"""

import os

import numpy as np

_DISABLED = os.environ.get("POPT_DISABLE_NUMBA", "").strip().lower() in ("1", "true", "yes")

try:
    if _DISABLED:
        raise ImportError
    from numba import njit
    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]
        return lambda f: f

BACKEND = "numba" if HAVE_NUMBA else "numpy"


# ---------------------------------------------------------------------------
# simplex pricing: reduced cost d_j = c_j - y . A_j over a CSC matrix
# ---------------------------------------------------------------------------

def _price_numpy(indptr, indices, data, colids, cost, y, eligible, bland, tol):
    d = cost - np.bincount(colids, weights=data * y[indices], minlength=cost.shape[0])
    d = np.where(eligible, d, -np.inf)
    if bland:
        hits = np.flatnonzero(d > tol)
        if hits.size == 0:
            return -1, 0.0
        return int(hits[0]), float(d[hits[0]])
    q = int(np.argmax(d))
    if d[q] > tol:
        return q, float(d[q])
    return -1, 0.0


@njit(cache=True)
def _price_numba(indptr, indices, data, colids, cost, y, eligible, bland, tol):
    n = cost.shape[0]
    best = tol
    q = -1
    for j in range(n):
        if not eligible[j]:
            continue
        d = cost[j]
        for p in range(indptr[j], indptr[j + 1]):
            d -= data[p] * y[indices[p]]
        if d > best:
            if bland:
                return j, d
            best = d
            q = j
    if q < 0:
        return -1, 0.0
    return q, best


def _reduced_costs_numpy(indptr, indices, data, colids, cost, y):
    return cost - np.bincount(colids, weights=data * y[indices], minlength=cost.shape[0])


@njit(cache=True)
def _reduced_costs_numba(indptr, indices, data, colids, cost, y):
    n = cost.shape[0]
    out = np.empty(n)
    for j in range(n):
        d = cost[j]
        for p in range(indptr[j], indptr[j + 1]):
            d -= data[p] * y[indices[p]]
        out[j] = d
    return out


# ---------------------------------------------------------------------------
# ratio test and product-form update of the explicit basis inverse
# ---------------------------------------------------------------------------

def _ratio_test_py(xb, alpha, basis, pivot_tol, bland):
    r = -1
    best = np.inf
    for i in range(xb.shape[0]):
        a = alpha[i]
        if a <= pivot_tol:
            continue
        v = xb[i]
        if v < 0.0:
            v = 0.0
        t = v / a
        if t < best - 1e-12:
            best = t
            r = i
        elif t <= best + 1e-12 and r >= 0:
            # ties: Bland keeps the smallest basic index, otherwise the larger pivot
            if bland:
                if basis[i] < basis[r]:
                    r = i
            elif a > alpha[r]:
                r = i
    return r, best


def _pivot_py(binv, xb, alpha, r, theta):
    m = xb.shape[0]
    piv = alpha[r]
    for j in range(m):
        binv[r, j] /= piv
    for i in range(m):
        if i == r:
            continue
        f = alpha[i]
        if f != 0.0:
            for j in range(m):
                binv[i, j] -= f * binv[r, j]
            xb[i] -= theta * f
    xb[r] = theta


def _pivot_numpy(binv, xb, alpha, r, theta):
    binv[r] /= alpha[r]
    f = alpha.copy()
    f[r] = 0.0
    binv -= np.outer(f, binv[r])
    xb -= theta * f
    xb[r] = theta


_ratio_test_numba = njit(cache=True)(_ratio_test_py)
_pivot_numba = njit(cache=True)(_pivot_py)


# ---------------------------------------------------------------------------
# exhaustive integer search (validation oracle)
# ---------------------------------------------------------------------------

def _oracle_search_py(values, bundles, supplies, max_states):
    n, nb = values.shape
    ng = bundles.shape[1]
    suffix = np.zeros(n + 1)
    for a in range(n - 1, -1, -1):
        m = 0.0
        for b in range(nb):
            if values[a, b] > m:
                m = values[a, b]
        suffix[a] = suffix[a + 1] + m
    resid = supplies.astype(np.float64).copy()
    cur = np.full(n, -1, dtype=np.int64)
    best_choice = np.full(n, -1, dtype=np.int64)
    nxt = np.zeros(n + 1, dtype=np.int64)
    best = -1.0
    value = 0.0
    states = 0
    depth = 0
    while depth >= 0:
        if depth == n:
            if value > best:
                best = value
                for a in range(n):
                    best_choice[a] = cur[a]
            depth -= 1
            b = cur[depth]
            if b >= 0:
                for g in range(ng):
                    resid[g] += bundles[b, g]
                value -= values[depth, b]
                cur[depth] = -1
            continue
        t = nxt[depth]
        exhausted = t > nb
        if t == 0 and best >= 0.0 and value + suffix[depth] <= best:
            exhausted = True
        if exhausted:
            nxt[depth] = 0
            depth -= 1
            if depth >= 0:
                b = cur[depth]
                if b >= 0:
                    for g in range(ng):
                        resid[g] += bundles[b, g]
                    value -= values[depth, b]
                    cur[depth] = -1
            continue
        nxt[depth] = t + 1
        if t == 0:
            cur[depth] = -1
        else:
            b = t - 1
            if values[depth, b] <= 0.0:
                continue
            fits = True
            for g in range(ng):
                if bundles[b, g] > resid[g] + 1e-9:
                    fits = False
                    break
            if not fits:
                continue
            for g in range(ng):
                resid[g] -= bundles[b, g]
            value += values[depth, b]
            cur[depth] = b
        states += 1
        if states > max_states:
            return best_choice, best, states, False
        depth += 1
    return best_choice, best, states, True


_oracle_search_numba = njit(cache=True)(_oracle_search_py)


if HAVE_NUMBA:
    price = _price_numba
    reduced_costs = _reduced_costs_numba
    ratio_test = _ratio_test_numba
    pivot = _pivot_numba
    oracle_search = _oracle_search_numba
else:
    price = _price_numpy
    reduced_costs = _reduced_costs_numpy
    ratio_test = _ratio_test_py
    pivot = _pivot_numpy
    oracle_search = _oracle_search_py
