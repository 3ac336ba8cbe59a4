"""Iterative rounding of a fractional allocation to an integral one.

Each round fixes every coordinate that is already 0 or 1, re-solves the LP
restricted to the remaining fractional coordinates (demand rows of agents
that were tight in the input stay equalities), and takes the extreme point
the simplex lands on. When that extreme point has no integral coordinate,
supply rows that can no longer be exceeded by more than ``k - 1`` are dropped.

The result is integral, never worse for the reward vector ``c``, keeps every
zero coordinate at zero, keeps tight agents allocated, and uses at most
``ceil(s_j) + k - 1`` units of each good.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .auction import PerturbedInstance
from .errors import NumericalFailure, RoundingStall
from .lp import EQ, LE, LinearProgram, solve

INT_TOL = 1e-7
TIGHT_TOL = 1e-7
FEAS_TOL = 1e-7


def snap(z, tol=INT_TOL):
    """Copy of ``z`` with entries within ``tol`` of 0 or 1 set exactly."""
    z = np.array(z, dtype=float, copy=True)
    z[np.abs(z) <= tol] = 0.0
    z[np.abs(z - 1.0) <= tol] = 1.0
    return z


def is_integral(z, tol=INT_TOL) -> bool:
    z = np.asarray(z, dtype=float)
    return bool(np.all((np.abs(z) <= tol) | (np.abs(z - 1.0) <= tol)))


@dataclass
class RoundingState:
    tau: int
    active_goods: np.ndarray
    fractional_support: np.ndarray
    residual_supplies: np.ndarray
    tight_agents: np.ndarray
    current_point: np.ndarray
    n_agents: int
    bundles: np.ndarray
    k: int
    # (n_fractional, n_active_goods) at the start of each round
    history: list = field(default_factory=list)

    def footprint(self) -> np.ndarray:
        """Units of each good demanded if every fractional coordinate went to 1."""
        nb = self.bundles.shape[0]
        per_bundle = self.fractional_support.reshape(self.n_agents, nb).sum(axis=0)
        return per_bundle @ self.bundles


def drop_rule(state: RoundingState) -> np.ndarray:
    """Active goods after removing those whose footprint is within ``ceil(s) + k - 1``.

    Raises :class:`RoundingStall` if no active good qualifies.
    """
    bound = np.ceil(state.residual_supplies - 1e-9) + state.k - 1
    droppable = state.active_goods & (state.footprint() <= bound + 1e-9)
    if not droppable.any():
        raise RoundingStall(
            f"round {state.tau}: all-fractional extreme point and no supply row can be dropped"
        )
    return state.active_goods & ~droppable


def _restricted_lp(z, frac, c, state, supplies_left):
    """LP over the fractional coordinates only; fixed ones are folded into the rhs."""
    n, nb = state.n_agents, state.bundles.shape[0]
    idx = np.flatnonzero(frac)
    agents = idx // nb
    bidx = idx % nb
    fixed_demand = np.where(frac, 0.0, z).reshape(n, nb).sum(axis=1)

    rows_agents = np.unique(agents)
    row_of_agent = {a: r for r, a in enumerate(rows_agents)}
    dem = sp.csc_matrix((np.ones(idx.size), ([row_of_agent[a] for a in agents], np.arange(idx.size))),
                        shape=(rows_agents.size, idx.size))
    senses = [EQ if state.tight_agents[a] else LE for a in rows_agents]
    rhs = list(1.0 - fixed_demand[rows_agents])

    goods = np.flatnonzero(state.active_goods)
    coef = state.bundles[bidx][:, goods].T.astype(float)
    keep = coef.any(axis=1)
    goods, coef = goods[keep], coef[keep]
    A = sp.vstack([dem, sp.csc_matrix(coef)], format="csc") if goods.size else dem
    senses += [LE] * goods.size
    rhs += list(supplies_left[goods])
    return LinearProgram(np.asarray(c, float)[idx], A, tuple(senses), np.array(rhs)), idx


def iterative_rounding(z, c, ctx: PerturbedInstance, supplies=None, *, return_state=False,
                       max_iter=None):
    """Round a fractional point ``z`` to an integral one without lowering ``c . z``.

    Parameters
    ----------
    z : array, shape (n_agents * n_bundles,)
        Point satisfying demand and the supply rows ``supplies``.
    c : array, same shape
        Reward vector.
    ctx : PerturbedInstance
        Provides the bundle space, ``k`` and default supplies.
    supplies : array, optional
        Supply right-hand side ``z`` satisfies; defaults to the perturbed supplies.
    return_state : bool
        Also return the final :class:`RoundingState` (iteration history included).
    """
    n, nb, k = ctx.n_agents, ctx.n_bundles, ctx.k
    s_in = ctx.perturbed_supplies if supplies is None else np.asarray(supplies, dtype=float)
    z = snap(z)
    c = np.asarray(c, dtype=float)
    if z.shape != (n * nb,) or c.shape != z.shape:
        raise ValueError(f"z and c must have length {n * nb}")
    if np.any(z < -FEAS_TOL) or np.any(z > 1 + FEAS_TOL):
        raise ValueError("z must lie in [0, 1]")
    demand = z.reshape(n, nb).sum(axis=1)
    if np.any(demand > 1 + FEAS_TOL):
        raise ValueError("z violates a demand row")
    if np.any(ctx.base.consumption(z) > s_in + FEAS_TOL):
        raise ValueError("z violates a supply row")

    state = RoundingState(
        tau=0,
        active_goods=np.ones(ctx.n_goods, dtype=bool),
        fractional_support=(z > 0) & (z < 1),
        residual_supplies=s_in.astype(float).copy(),
        tight_agents=np.abs(demand - 1.0) <= TIGHT_TOL,
        current_point=z,
        n_agents=n,
        bundles=ctx.bundles,
        k=k,
    )
    cap = max_iter if max_iter is not None else n * nb + n + ctx.n_goods
    while True:
        frac = (z > 0) & (z < 1)
        state.fractional_support = frac
        state.residual_supplies = s_in - ctx.base.consumption(np.where(frac, 0.0, z))
        if not frac.any():
            break
        if state.tau >= cap:
            raise RoundingStall(f"no progress within {cap} rounds")
        state.history.append((int(frac.sum()), int(state.active_goods.sum())))

        lp, idx = _restricted_lp(z, frac, c, state, state.residual_supplies)
        sol = solve(lp)
        if not sol.optimal:
            raise NumericalFailure(f"restricted LP in round {state.tau} is {sol.status.value}")
        new = snap(sol.primal)
        z = z.copy()
        z[idx] = new
        state.current_point = z
        state.tau += 1

        still = (new > 0) & (new < 1)
        if still.all():
            state.fractional_support = (z > 0) & (z < 1)
            state.residual_supplies = s_in - ctx.base.consumption(np.where(state.fractional_support, 0.0, z))
            state.active_goods = drop_rule(state)

    state.current_point = z
    if return_state:
        return z, state
    return z
