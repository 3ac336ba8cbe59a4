"""Per-good prices from the LP dual, and checks that they support an allocation.

One price vector is computed from the perturbed LP and reused for every
point of the lottery. Payoffs in the checks use the true (unweighted)
valuations; the weighting only enters through how the prices were found.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .auction import AuctionInstance, PerturbedInstance
from .lp import LPSolution

NEG_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class PriceVector:
    """Anonymous linear prices ``p_j``; ``alpha`` holds the demand-row duals when known."""

    p: np.ndarray
    alpha: Optional[np.ndarray] = None

    def __post_init__(self):
        p = np.asarray(self.p, dtype=float)
        if p.ndim != 1:
            raise ValueError("prices must be a 1-d array")
        if np.any(p < -NEG_TOL):
            raise ValueError(f"negative price {p.min()}")
        object.__setattr__(self, "p", np.clip(p, 0.0, None))

    def __len__(self):
        return self.p.size

    def bundle_prices(self, bundles) -> np.ndarray:
        return np.asarray(bundles, dtype=float) @ self.p


def popt_prices(lip_solution: LPSolution, n_agents: int) -> PriceVector:
    """Supply-row duals of the perturbed LP (rows after the ``n_agents`` demand rows)."""
    if not lip_solution.optimal:
        raise ValueError(f"LP solution is {lip_solution.status.value}, prices need an optimum")
    y = lip_solution.duals
    return PriceVector(y[n_agents:].copy(), np.clip(y[:n_agents], 0.0, None))


def bundle_price(bundle, p) -> float:
    """``sum_j B_j p_j``; ``None`` (no bundle) costs 0."""
    if bundle is None:
        return 0.0
    prices = p.p if isinstance(p, PriceVector) else np.asarray(p, dtype=float)
    return float(np.dot(np.asarray(bundle, dtype=float), prices))


@dataclass(frozen=True, eq=False)
class VerificationReport:
    """Outcome of the supporting-price and/or envy checks for one allocation.

    ``payoff_diffs[i]`` is agent ``i``'s realised payoff minus the best payoff
    available to it at these prices (non-positive up to ``eps_u``).
    A violation is the amount by which the unrelaxed inequality fails; the
    check passes when the worst violation is at most ``eps_u``.
    """

    payoff_diffs: np.ndarray
    eps_u: float
    supporting_violation: Optional[float] = None
    envy_violation: Optional[float] = None
    # envy with the sign of the printed definition: own >= other + eps_u
    envy_literal_pass: Optional[bool] = None
    eps_envy: Optional[float] = None

    @property
    def supporting_pass(self) -> Optional[bool]:
        if self.supporting_violation is None:
            return None
        return self.supporting_violation <= self.eps_u

    @property
    def envy_pass(self) -> Optional[bool]:
        if self.envy_violation is None:
            return None
        tol = self.eps_u if self.eps_envy is None else self.eps_envy
        return self.envy_violation <= tol

    @property
    def passed(self) -> bool:
        flags = [f for f in (self.supporting_pass, self.envy_pass) if f is not None]
        return all(flags)


def assigned_bundles(point, instance: AuctionInstance) -> np.ndarray:
    """Bundle index held by each agent in an integral point, -1 when unallocated."""
    X = np.asarray(point, dtype=float).reshape(instance.n_agents, instance.n_bundles)
    if np.any(X.sum(axis=1) > 1 + 1e-7):
        raise ValueError("allocation violates a demand row")
    held = X > 0.5
    return np.where(held.any(axis=1), held.argmax(axis=1), -1)


def _payoffs(instance, prices):
    P = prices.bundle_prices(instance.bundles)
    return instance.valuations - P[None, :]


def _own(V, assigned):
    rows = np.arange(V.shape[0])
    return np.where(assigned >= 0, V[rows, np.maximum(assigned, 0)], 0.0)


def payoff_differences(point, prices: PriceVector, instance: AuctionInstance) -> np.ndarray:
    """Realised payoff minus ``max(0, max_B [u_i(B) - P(B)])`` for each agent."""
    V = _payoffs(instance, prices)
    a = assigned_bundles(point, instance)
    best = np.maximum(V.max(axis=1), 0.0)
    return _own(V, a) - best


def verify_supporting(point, prices: PriceVector, instance: AuctionInstance,
                      eps_u: float) -> VerificationReport:
    """Allocated agents are within ``eps_u`` of their best bundle; unallocated ones
    gain at most ``eps_u`` from any bundle."""
    V = _payoffs(instance, prices)
    a = assigned_bundles(point, instance)
    own = _own(V, a)
    best = V.max(axis=1)
    viol = np.where(a >= 0, best - own, np.maximum(best, 0.0))
    diffs = own - np.maximum(best, 0.0)
    return VerificationReport(diffs, float(eps_u), supporting_violation=float(viol.max(initial=0.0)))


def verify_envy_free(point, prices: PriceVector, instance: AuctionInstance,
                     eps_u: float) -> VerificationReport:
    """No agent prefers another agent's assignment (at its own valuation) by more than ``eps_u``."""
    V = _payoffs(instance, prices)
    a = assigned_bundles(point, instance)
    own = _own(V, a)
    n = instance.n_agents
    # value to i of k's assignment; an empty assignment is worth 0
    other = np.where(a[None, :] >= 0, V[:, np.maximum(a, 0)], 0.0)
    other[np.arange(n), np.arange(n)] = -np.inf
    worst = float((other.max(axis=1) - own).max()) if n > 1 else 0.0
    diffs = own - np.maximum(V.max(axis=1), 0.0)
    return VerificationReport(diffs, float(eps_u), envy_violation=worst,
                              envy_literal_pass=bool(worst + eps_u <= 0.0))


def verify(point, prices: PriceVector, instance: AuctionInstance, eps_supporting: float,
           eps_envy: Optional[float] = None) -> VerificationReport:
    """Both checks in one report. ``eps_envy`` defaults to ``eps_supporting``."""
    s = verify_supporting(point, prices, instance, eps_supporting)
    e = verify_envy_free(point, prices, instance, eps_supporting if eps_envy is None else eps_envy)
    return VerificationReport(s.payoff_diffs, s.eps_u, s.supporting_violation, e.envy_violation,
                              e.envy_literal_pass, e.eps_u)


def weighted_argmax_gap(point, prices: PriceVector, ctx: PerturbedInstance) -> float:
    """Largest shortfall of an allocated agent's weighted payoff below its weighted best.

    Zero up to round-off whenever the prices are LP duals certifying ``point``.
    """
    W = ctx.weights * ctx.base.valuations - prices.bundle_prices(ctx.bundles)[None, :]
    a = assigned_bundles(point, ctx.base)
    if not np.any(a >= 0):
        return 0.0
    rows = np.flatnonzero(a >= 0)
    return float(np.max(W[rows].max(axis=1) - W[rows, a[rows]]))


def default_eps_u(instance: AuctionInstance, delta_w: float) -> float:
    """``2 * delta_w * max_i M_i``."""
    return 2.0 * delta_w * float(instance.max_values().max())
