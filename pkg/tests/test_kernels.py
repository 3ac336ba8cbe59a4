"""The numba kernels and their numpy fallbacks must agree."""

import os
import subprocess
import sys

import numpy as np
import pytest
import scipy.sparse as sp

from popt import _kernels

needs_numba = pytest.mark.skipif(not _kernels.HAVE_NUMBA, reason="numba not installed")


def _csc(rng, m=6, n=40):
    A = sp.random(m, n, density=0.4, random_state=np.random.RandomState(1), format="csc")
    indptr, indices = A.indptr.astype(np.int64), A.indices.astype(np.int64)
    colids = np.repeat(np.arange(n), np.diff(indptr))
    return indptr, indices, A.data, colids, rng.normal(size=n), rng.normal(size=m)


@needs_numba
@pytest.mark.parametrize("bland", [False, True])
def test_price_agrees(bland):
    rng = np.random.default_rng(0)
    indptr, indices, data, colids, cost, y = _csc(rng)
    eligible = rng.random(cost.size) < 0.8
    a = _kernels._price_numpy(indptr, indices, data, colids, cost, y, eligible, bland, 1e-9)
    b = _kernels._price_numba(indptr, indices, data, colids, cost, y, eligible, bland, 1e-9)
    assert a[0] == b[0]
    assert a[1] == pytest.approx(b[1], abs=1e-12)


@needs_numba
def test_reduced_costs_agree():
    rng = np.random.default_rng(1)
    args = _csc(rng)
    np.testing.assert_allclose(_kernels._reduced_costs_numpy(*args), _kernels._reduced_costs_numba(*args),
                               atol=1e-12)


@needs_numba
def test_pivot_agrees():
    rng = np.random.default_rng(2)
    m = 5
    binv = rng.normal(size=(m, m))
    xb = rng.random(m)
    alpha = rng.normal(size=m)
    alpha[2] = 1.5
    b1, x1 = binv.copy(), xb.copy()
    b2, x2 = binv.copy(), xb.copy()
    _kernels._pivot_numpy(b1, x1, alpha, 2, 0.3)
    _kernels._pivot_numba(b2, x2, alpha, 2, 0.3)
    np.testing.assert_allclose(b1, b2, atol=1e-12)
    np.testing.assert_allclose(x1, x2, atol=1e-12)


def test_ratio_test_tie_breaking():
    xb = np.array([1.0, 2.0, 1.0])
    alpha = np.array([1.0, 2.0, 0.5])
    basis = np.array([7, 3, 5])
    # ratios 1, 1, 2: Bland picks the smaller basic index among the tie, otherwise the larger pivot
    assert _kernels._ratio_test_py(xb, alpha, basis, 1e-10, True)[0] == 1
    assert _kernels._ratio_test_py(xb, alpha, basis, 1e-10, False)[0] == 1
    assert _kernels._ratio_test_py(xb, -alpha, basis, 1e-10, False)[0] == -1


@needs_numba
def test_oracle_search_agrees():
    rng = np.random.default_rng(3)
    values = rng.integers(0, 6, size=(3, 5)).astype(float)
    bundles = np.array([[1, 0], [0, 1], [2, 0], [1, 1], [0, 2]], dtype=np.int64)
    s = np.array([2.0, 1.0])
    a = _kernels._oracle_search_py(values, bundles, s, 10**6)
    b = _kernels._oracle_search_numba(values, bundles, s, 10**6)
    assert a[1] == b[1] and a[3] and b[3]
    np.testing.assert_array_equal(a[0], b[0])


def test_env_flag_selects_numpy_backend():
    env = dict(os.environ, POPT_DISABLE_NUMBA="1")
    out = subprocess.run([sys.executable, "-c", "from popt import _kernels; print(_kernels.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "numpy"


def test_numpy_backend_solves_the_same_lp():
    code = ("import numpy as np\n"
            "from popt.lp import LinearProgram, solve\n"
            "rng = np.random.default_rng(5)\n"
            "A = rng.integers(1, 4, size=(4, 30)).astype(float)\n"
            "lp = LinearProgram(rng.random(30), A, ('<=',) * 4, np.full(4, 3.0))\n"
            "print(repr(solve(lp).objective_value))\n")
    vals = []
    for flag in ("1", "0"):
        env = dict(os.environ, POPT_DISABLE_NUMBA=flag)
        out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
        vals.append(float(out.stdout))
    assert vals[0] == pytest.approx(vals[1], rel=1e-12)
