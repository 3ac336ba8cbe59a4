"""One end-to-end run: perturb, solve, build the lottery, price, sample, verify."""

from dataclasses import dataclass

import numpy as np

from ..auction import AuctionInstance, MechanismConfig, PerturbedInstance, build_lip, perturb
from ..errors import NumericalFailure, VerificationFailure
from ..lottery import Lottery, construct_lottery, sample
from ..lp import LPSolution, solve
from ..pricing import PriceVector, popt_prices, verify


@dataclass(frozen=True, eq=False)
class MechanismResult:
    lottery: Lottery
    prices: PriceVector
    allocation: np.ndarray
    reports: list  # one VerificationReport per lottery point, or just the sampled one
    lip_solution: LPSolution
    context: PerturbedInstance
    eps_u: float

    @property
    def lp_value(self) -> float:
        """Unweighted utility of the LP optimum."""
        return float(self.context.base.valuations.ravel() @ self.lip_solution.primal)

    @property
    def expected_utility(self) -> float:
        return float(self.lottery.weights @ (self.lottery.points @ self.context.base.valuations.ravel()))

    @property
    def realized_utility(self) -> float:
        return float(self.context.base.valuations.ravel() @ self.allocation)

    def over_allocation(self, point=None) -> np.ndarray:
        x = self.allocation if point is None else point
        base = self.context.base
        return np.maximum(base.consumption(x) - base.supplies, 0.0)


def run_mechanism(instance: AuctionInstance, cfg: MechanismConfig, rng: np.random.Generator,
                  verify_all: bool = False, strict: bool = True,
                  agent_type=None) -> MechanismResult:
    """Full pipeline on ``instance`` with randomness from ``rng``.

    With ``strict`` the hard guarantees (over-allocation at most ``k - 1`` per
    good, supporting prices at ``eps_u``) raise :class:`VerificationFailure`.
    """
    ctx = perturb(instance, cfg, rng, agent_type)
    sol = solve(build_lip(ctx))
    if not sol.optimal:
        raise NumericalFailure(f"LP relaxation is {sol.status.value}")
    lottery = construct_lottery(sol.primal, ctx, cfg)
    prices = popt_prices(sol, instance.n_agents)
    x = sample(lottery, rng)
    eps_u = cfg.utility_error(instance)
    points = lottery.points if verify_all else x[None, :]
    reports = [verify(p, prices, instance, eps_u + 1e-9) for p in points]
    res = MechanismResult(lottery, prices, x, reports, sol, ctx, eps_u)
    if strict:
        for p, rep in zip(points, reports):
            over = res.over_allocation(p)
            if np.any(over > instance.k - 1 + 1e-9):
                raise VerificationFailure("supply+k-1", f"over-allocation {over.max()}")
            if not rep.supporting_pass:
                raise VerificationFailure("supporting-prices",
                                          f"violation {rep.supporting_violation:.3e} > {eps_u:.3e}")
    return res
