"""Gain from misreporting one's type in a large typed population.

Agents of the same reported type are interchangeable, so the mechanism can
work on the aggregated LP whose variable ``y[t, B]`` is the number of
type-``t`` agents holding bundle ``B``. An individual of reported type ``t``
then receives ``y[t] / n_t`` in expectation, and since the lottery
reproduces the LP optimum in expectation and prices are fixed across its
points, expected payoffs follow exactly from ``y`` and the supply duals.
"""

from dataclasses import dataclass

import numpy as np

from ..auction import AuctionInstance, MechanismConfig, lip_matrix, perturb
from ..errors import NumericalFailure
from ..lp import LE, LinearProgram, solve


@dataclass(frozen=True, eq=False)
class TypedPopulation:
    """Types with utilities over a shared bundle space and base multiplicities.

    ``utilities[t]`` is type ``t``'s valuation row; at scale ``n`` there are
    ``n * multiplicities[t]`` agents of type ``t`` and, with proportional
    supplies, ``n * supplies`` units of each good.
    """

    names: tuple
    utilities: np.ndarray
    multiplicities: np.ndarray
    n_goods: int
    supplies: np.ndarray
    k: int

    def __post_init__(self):
        u = np.asarray(self.utilities, dtype=float)
        m = np.asarray(self.multiplicities, dtype=np.int64)
        object.__setattr__(self, "utilities", u)
        object.__setattr__(self, "multiplicities", m)
        object.__setattr__(self, "supplies", np.asarray(self.supplies, dtype=np.int64))
        object.__setattr__(self, "names", tuple(self.names))
        if u.shape[0] != len(self.names) or m.shape != (len(self.names),):
            raise ValueError("one utility row and one multiplicity per type")
        if np.any(m < 1):
            raise ValueError("multiplicities must be positive")
        # validates shapes against the bundle space
        self.type_instance()

    def index(self, name) -> int:
        return self.names.index(name)

    def type_instance(self, supplies=None) -> AuctionInstance:
        s = self.supplies if supplies is None else supplies
        return AuctionInstance(len(self.names), self.n_goods, np.asarray(s), self.k, self.utilities)

    def counts(self, n: int) -> np.ndarray:
        return n * self.multiplicities

    def scaled_supplies(self, n: int, mode: str = "proportional") -> np.ndarray:
        if mode == "proportional":
            return n * self.supplies
        if mode == "fixed":
            return self.supplies.copy()
        raise ValueError(f"unknown supply mode {mode!r}")

    def individuals(self, n: int, mode: str = "proportional"):
        """Agent-level instance at scale ``n`` plus each agent's type label."""
        counts = self.counts(n)
        labels = tuple(name for name, c in zip(self.names, counts) for _ in range(c))
        u = np.repeat(self.utilities, counts, axis=0)
        inst = AuctionInstance(len(labels), self.n_goods, self.scaled_supplies(n, mode), self.k, u)
        return inst, labels


def typed_lp(ctx, counts) -> LinearProgram:
    """Aggregated LP: demand rows ``sum_B y[t, B] <= n_t`` over the usual supply rows."""
    A = lip_matrix(ctx.n_agents, ctx.bundles)
    rhs = np.concatenate([np.asarray(counts, dtype=float), ctx.perturbed_supplies])
    return LinearProgram(ctx.weighted_values, A, (LE,) * (ctx.n_agents + ctx.n_goods), rhs)


def typed_payoff(pop: TypedPopulation, n: int, true_type: int, reported_type: int,
                 cfg: MechanismConfig, rng: np.random.Generator, mode: str = "proportional") -> float:
    """Expected payoff of one type-``true_type`` agent reporting ``reported_type``.

    The other agents report truthfully.
    """
    counts = pop.counts(n).copy()
    counts[true_type] -= 1
    counts[reported_type] += 1
    ctx = perturb(pop.type_instance(pop.scaled_supplies(n, mode)), cfg, rng)
    sol = solve(typed_lp(ctx, counts))
    if not sol.optimal:
        raise NumericalFailure(f"typed LP is {sol.status.value}")
    nt, nb = len(pop.names), ctx.n_bundles
    y = sol.primal.reshape(nt, nb)
    p = np.clip(sol.duals[nt:], 0.0, None)
    net = pop.utilities[true_type] - ctx.bundles @ p
    return float(net @ y[reported_type]) / counts[reported_type]


@dataclass(frozen=True)
class GainEstimate:
    n: int
    mean: float
    half_width: float
    replications: int


def misreport_gain(pop: TypedPopulation, n: int, xi, zeta, cfg: MechanismConfig, seed: int = 0,
                   replications: int = 100, mode: str = "proportional", z: float = 1.96) -> GainEstimate:
    """Mean over perturbations of (payoff reporting ``zeta``) - (payoff reporting ``xi``)
    for an agent whose true type is ``xi``, with a normal-approximation half-width.

    Both runs of a replication reuse the same random stream, so ``zeta == xi``
    gives exactly zero.
    """
    a, b = pop.index(xi), pop.index(zeta)
    gains = np.empty(replications)
    for r in range(replications):
        ss = np.random.SeedSequence(seed, spawn_key=(n, r))
        truthful = typed_payoff(pop, n, a, a, cfg, np.random.default_rng(ss), mode)
        lied = typed_payoff(pop, n, a, b, cfg, np.random.default_rng(ss), mode)
        gains[r] = lied - truthful
    hw = z * gains.std(ddof=1) / np.sqrt(replications) if replications > 1 else np.inf
    return GainEstimate(n, float(gains.mean()), float(hw), replications)


def default_population() -> TypedPopulation:
    """Two goods, bundles of size at most 2, two types competing for good 0."""
    # bundle order: (1,0) (0,1) (2,0) (1,1) (0,2)
    u = np.array([[6.0, 2.0, 7.0, 8.0, 3.0],
                  [5.0, 4.0, 6.0, 9.0, 6.0]])
    return TypedPopulation(("a", "b"), u, np.array([1, 1]), 2, np.array([1, 1]), 2)
