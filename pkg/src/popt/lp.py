"""Two-phase revised simplex for small-row, many-column linear programs.

Problems are stated as maximisation over non-negative variables::

    max  c.x   s.t.  A_r x (<= | =) b_r   for every row r,  x >= 0,

with an optional partial map of variables held at fixed values. The solver
returns a basic (extreme-point) optimum together with row duals, which is
what the rounding and pricing code downstream depends on.

The basis inverse is kept explicitly (the row count is tiny compared to the
column count) and refactorised periodically. Pricing over the columns is
the hot loop and lives in :mod:`popt._kernels`.
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping, Optional

import numpy as np
import scipy.sparse as sp

from . import _kernels
from .errors import NumericalFailure

TOL_FEAS = 1e-9
TOL_DUALITY = 1e-7
TOL_PIVOT = 1e-10
BLAND_AFTER = 50
REFACTOR_EVERY = 50

LE = "<="
EQ = "="


class LPStatus(str, Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"


@dataclass(frozen=True, eq=False)
class LinearProgram:
    """``max objective.x`` subject to ``A x (senses) rhs``, ``x >= 0``.

    ``A`` may be a dense array or any scipy sparse matrix; it is stored in
    CSC form. ``fixings`` maps variable index to a fixed value; those
    variables are substituted out before solving.
    """

    objective: np.ndarray
    A: sp.csc_matrix
    senses: tuple
    rhs: np.ndarray
    fixings: Mapping[int, float] = field(default_factory=dict)

    def __post_init__(self):
        c = np.asarray(self.objective, dtype=float).ravel()
        A = sp.csc_matrix(self.A, dtype=float)
        b = np.asarray(self.rhs, dtype=float).ravel()
        senses = tuple(self.senses)
        if A.shape != (b.shape[0], c.shape[0]):
            raise ValueError(f"A has shape {A.shape}, expected {(b.shape[0], c.shape[0])}")
        if len(senses) != b.shape[0]:
            raise ValueError("one relation per row required")
        for s in senses:
            if s not in (LE, EQ):
                raise ValueError(f"unknown relation {s!r}")
        if not (np.all(np.isfinite(c)) and np.all(np.isfinite(b))):
            raise ValueError("objective and rhs must be finite")
        fix = {int(k): float(v) for k, v in dict(self.fixings).items()}
        for k, v in fix.items():
            if not 0 <= k < c.shape[0]:
                raise ValueError(f"fixing refers to unknown variable {k}")
            if not np.isfinite(v):
                raise ValueError(f"fixing for variable {k} is not finite")
        empty_rows = np.diff(A.tocsr().indptr) == 0
        for r in np.flatnonzero(empty_rows):
            if senses[r] == LE and b[r] < 0:
                raise ValueError(f"row {r} has no coefficients and negative rhs")
        object.__setattr__(self, "objective", c)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "rhs", b)
        object.__setattr__(self, "senses", senses)
        object.__setattr__(self, "fixings", fix)

    @classmethod
    def from_rows(cls, objective, rows, fixings=None):
        """Build from ``rows = [(coefficients, relation, rhs), ...]``."""
        objective = np.asarray(objective, dtype=float)
        if rows:
            A = np.array([np.asarray(r[0], dtype=float) for r in rows]).reshape(len(rows), objective.size)
        else:
            A = np.zeros((0, objective.size))
        return cls(objective, A, tuple(r[1] for r in rows),
                   np.array([r[2] for r in rows], dtype=float), fixings or {})

    @property
    def n_vars(self):
        return self.objective.shape[0]

    @property
    def n_rows(self):
        return self.rhs.shape[0]

    def to_text(self):
        """Plain-text dump, one row per line: ``<relation> <rhs> : <var>=<coef> ...``."""
        lines = ["max : " + " ".join(f"x{j}={v:.17g}" for j, v in enumerate(self.objective) if v != 0)]
        csr = self.A.tocsr()
        for r in range(self.n_rows):
            s, e = csr.indptr[r], csr.indptr[r + 1]
            terms = " ".join(f"x{j}={v:.17g}" for j, v in zip(csr.indices[s:e], csr.data[s:e]))
            lines.append(f"{self.senses[r]} {self.rhs[r]:.17g} : {terms}")
        for k in sorted(self.fixings):
            lines.append(f"fix x{k}={self.fixings[k]:.17g}")
        return "\n".join(lines) + "\n"


@dataclass(frozen=True, eq=False)
class LPSolution:
    """Result of :func:`solve`.

    ``basis`` lists basic variables: indices ``< n_vars`` are structural,
    ``n_vars + r`` is the slack of row ``r`` and ``n_vars + n_rows + r`` an
    artificial left basic on a redundant equality row ``r`` (always zero).
    """

    status: LPStatus
    primal: Optional[np.ndarray] = None
    duals: Optional[np.ndarray] = None
    objective_value: float = float("nan")
    basis: tuple = ()
    reduced_costs: Optional[np.ndarray] = None
    iterations: int = 0

    @property
    def optimal(self):
        return self.status == LPStatus.OPTIMAL


class _Simplex:
    """Mutable tableau state for one solve. Not shared between threads."""

    def __init__(self, A, b, senses, max_iter):
        m, n = A.shape
        sign = np.where(b < 0, -1.0, 1.0)
        self.m, self.n = m, n
        self.sign = sign
        self.b = b * sign
        n_le = sum(1 for s in senses if s == LE)
        slack_rows = [r for r in range(m) if senses[r] == LE]
        art_rows = [r for r in range(m) if senses[r] == EQ or sign[r] < 0]
        self.slack_of_row = {r: n + i for i, r in enumerate(slack_rows)}
        self.art_start = n + n_le
        self.art_rows = art_rows
        blocks = [sp.diags(sign) @ A if m else A]
        if slack_rows:
            blocks.append(sp.csc_matrix((sign[slack_rows], (slack_rows, range(n_le))), shape=(m, n_le)))
        if art_rows:
            blocks.append(sp.csc_matrix((np.ones(len(art_rows)), (art_rows, range(len(art_rows)))),
                                        shape=(m, len(art_rows))))
        full = sp.hstack(blocks, format="csc") if m else sp.csc_matrix((0, n))
        full.sort_indices()
        self.indptr = full.indptr.astype(np.int64)
        self.indices = full.indices.astype(np.int64)
        self.data = full.data.astype(np.float64)
        self.ncols = full.shape[1]
        self.colids = np.repeat(np.arange(self.ncols, dtype=np.int64), np.diff(self.indptr))
        self.is_art = np.zeros(self.ncols, dtype=bool)
        self.is_art[self.art_start:] = True

        basis = np.empty(m, dtype=np.int64)
        for r in range(m):
            if senses[r] == LE and sign[r] > 0:
                basis[r] = self.slack_of_row[r]
        for i, r in enumerate(art_rows):
            basis[r] = self.art_start + i
        self.basis = basis
        self.is_basic = np.zeros(self.ncols, dtype=bool)
        self.is_basic[basis] = True
        self.binv = np.eye(m)
        self.xb = self.b.copy()
        self.iterations = 0
        self.max_iter = max_iter

    def column(self, j):
        a = np.zeros(self.m)
        s, e = self.indptr[j], self.indptr[j + 1]
        a[self.indices[s:e]] = self.data[s:e]
        return a

    def refactor(self):
        if self.m == 0:
            return
        B = np.column_stack([self.column(j) for j in self.basis])
        try:
            self.binv = np.linalg.inv(B)
        except np.linalg.LinAlgError as exc:
            raise NumericalFailure("singular basis during refactorisation") from exc
        self.xb = self.binv @ self.b

    def run(self, cost, allowed):
        """Iterate to optimality for ``cost``; returns False when unbounded."""
        scale = max(1.0, float(np.max(np.abs(cost))) if cost.size else 1.0)
        tol = 1e-9 * scale
        bland = False
        degenerate = 0
        since_refactor = 0
        confirmations = 0
        while True:
            if self.iterations >= self.max_iter:
                raise NumericalFailure(f"simplex exceeded {self.max_iter} iterations")
            y = cost[self.basis] @ self.binv if self.m else np.zeros(0)
            eligible = allowed & ~self.is_basic
            q, _ = _kernels.price(self.indptr, self.indices, self.data, self.colids,
                                  cost, y, eligible, bland, tol)
            if q < 0:
                # confirm optimality on a fresh factorisation before stopping
                if since_refactor == 0 or confirmations >= 2:
                    return True
                self.refactor()
                since_refactor = 0
                confirmations += 1
                continue
            alpha = self.binv @ self.column(q)
            r, theta = _kernels.ratio_test(self.xb, alpha, self.basis, TOL_PIVOT, bland)
            if r < 0:
                return False
            if theta <= 1e-12:
                degenerate += 1
                if degenerate >= BLAND_AFTER:
                    bland = True
            else:
                degenerate = 0
            _kernels.pivot(self.binv, self.xb, alpha, r, theta)
            self.is_basic[self.basis[r]] = False
            self.basis[r] = q
            self.is_basic[q] = True
            self.iterations += 1
            since_refactor += 1
            if since_refactor >= REFACTOR_EVERY:
                self.refactor()
                since_refactor = 0

    def drive_out_artificials(self):
        """Pivot zero-valued artificials out of the basis where possible."""
        structural = ~self.is_art
        for r in range(self.m):
            j = self.basis[r]
            if not self.is_art[j]:
                continue
            row = self.binv[r]
            vals = _kernels.reduced_costs(self.indptr, self.indices, self.data, self.colids,
                                          np.zeros(self.ncols), row)
            cand = np.flatnonzero(structural & ~self.is_basic & (np.abs(vals) > 1e-7))
            if cand.size == 0:
                continue  # redundant row; artificial stays basic at zero
            q = int(cand[np.argmax(np.abs(vals[cand]))])
            alpha = self.binv @ self.column(q)
            _kernels.pivot(self.binv, self.xb, alpha, r, self.xb[r] / alpha[r])
            self.is_basic[j] = False
            self.basis[r] = q
            self.is_basic[q] = True
        self.refactor()


def solve(lp: LinearProgram, max_iter: Optional[int] = None) -> LPSolution:
    """Solve ``lp`` by two-phase simplex; returns an extreme-point optimum with duals.

    Infeasible and unbounded problems are reported through ``status``.
    Raises :class:`NumericalFailure` if the iteration cap is exceeded.
    """
    n, m = lp.n_vars, lp.n_rows
    fixed_idx = np.array(sorted(lp.fixings), dtype=np.int64)
    fixed_val = np.array([lp.fixings[k] for k in fixed_idx], dtype=float)
    free = np.setdiff1d(np.arange(n), fixed_idx)
    A = lp.A
    b = lp.rhs.copy()
    const = 0.0
    if fixed_idx.size:
        b -= A[:, fixed_idx] @ fixed_val
        const = float(lp.objective[fixed_idx] @ fixed_val)
    Af = A[:, free]
    cf = lp.objective[free]
    if max_iter is None:
        max_iter = 1000 + 20 * (m + n)

    row_nnz = np.bincount(Af.indices, minlength=m) if m else np.zeros(0, dtype=int)
    for r in np.flatnonzero(row_nnz == 0):
        if (lp.senses[r] == LE and b[r] < -TOL_FEAS) or (lp.senses[r] == EQ and abs(b[r]) > TOL_FEAS):
            return LPSolution(LPStatus.INFEASIBLE)

    tab = _Simplex(Af, b, lp.senses, max_iter)
    if tab.art_rows:
        cost1 = np.where(tab.is_art, -1.0, 0.0)
        tab.run(cost1, np.ones(tab.ncols, dtype=bool))
        tab.refactor()
        infeas = float(np.sum(tab.xb[tab.is_art[tab.basis]]))
        if infeas > TOL_FEAS * (1.0 + float(np.max(np.abs(tab.b), initial=0.0))):
            return LPSolution(LPStatus.INFEASIBLE, iterations=tab.iterations)
        tab.drive_out_artificials()

    cost = np.zeros(tab.ncols)
    cost[: free.size] = cf
    if not tab.run(cost, ~tab.is_art):
        return LPSolution(LPStatus.UNBOUNDED, iterations=tab.iterations)
    tab.refactor()

    xfull = np.zeros(tab.ncols)
    xfull[tab.basis] = np.maximum(tab.xb, 0.0)
    x = np.zeros(n)
    x[free] = xfull[: free.size]
    if fixed_idx.size:
        x[fixed_idx] = fixed_val
    y_int = cost[tab.basis] @ tab.binv if m else np.zeros(0)
    duals = y_int * tab.sign
    reduced = lp.objective - lp.A.T @ duals

    basis = []
    slack_label = {col: n + r for r, col in tab.slack_of_row.items()}
    for j in tab.basis:
        if j < free.size:
            basis.append(int(free[j]))
        elif j in slack_label:
            basis.append(slack_label[j])
        else:
            basis.append(n + m + tab.art_rows[j - tab.art_start])
    return LPSolution(
        status=LPStatus.OPTIMAL,
        primal=x,
        duals=duals,
        objective_value=float(cf @ x[free]) + const,
        basis=tuple(sorted(basis)),
        reduced_costs=reduced,
        iterations=tab.iterations,
    )


def row_activity(lp: LinearProgram, x) -> np.ndarray:
    return lp.A @ np.asarray(x, dtype=float)


def primal_residual(lp: LinearProgram, x) -> float:
    """Largest constraint violation of ``x`` (rows, bounds and fixings)."""
    x = np.asarray(x, dtype=float)
    act = row_activity(lp, x)
    viol = [0.0, float(np.max(-x, initial=0.0))]
    for r, s in enumerate(lp.senses):
        d = act[r] - lp.rhs[r]
        viol.append(max(d, 0.0) if s == LE else abs(d))
    for k, v in lp.fixings.items():
        viol.append(abs(x[k] - v))
    return max(viol)


def dual_objective(lp: LinearProgram, sol: LPSolution) -> float:
    """``b.y`` plus the constant contributed by fixed variables' reduced costs."""
    val = float(lp.rhs @ sol.duals)
    for k, v in lp.fixings.items():
        val += (lp.objective[k] - float(lp.A[:, [k]].toarray().ravel() @ sol.duals)) * v
    return val


def dual_residual(lp: LinearProgram, sol: LPSolution) -> float:
    """Largest dual infeasibility: negative ``<=`` duals, positive free reduced costs."""
    y = sol.duals
    d = lp.objective - lp.A.T @ y
    free = np.ones(lp.n_vars, dtype=bool)
    free[list(lp.fixings)] = False
    le = np.array([s == LE for s in lp.senses], dtype=bool)
    worst = float(np.max(d[free], initial=0.0))
    if le.any():
        worst = max(worst, float(np.max(-y[le], initial=0.0)))
    return max(worst, 0.0)


def complementary_slackness_residual(lp: LinearProgram, sol: LPSolution) -> float:
    """Max of ``|dual_r * slack_r|`` over ``<=`` rows and ``|reduced cost_v * x_v|`` over free variables."""
    x = np.asarray(sol.primal, dtype=float)
    y = np.asarray(sol.duals, dtype=float)
    slack = lp.rhs - row_activity(lp, x)
    terms = [0.0]
    for r, s in enumerate(lp.senses):
        if s == LE:
            terms.append(abs(y[r] * slack[r]))
    d = lp.objective - lp.A.T @ y
    free = np.ones(lp.n_vars, dtype=bool)
    free[list(lp.fixings)] = False
    if free.any():
        terms.append(float(np.max(np.abs(d[free] * x[free]))))
    return max(terms)
