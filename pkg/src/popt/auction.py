"""Auction instances, the k-bundle space, random perturbations and the LP relaxation.

Allocation vectors throughout the package are flat arrays of length
``n_agents * n_bundles`` in agent-major order: entry ``i * n_bundles + b``
is the share of bundle ``b`` given to agent ``i``.
"""

import itertools
from dataclasses import dataclass, field
from math import comb
from typing import Optional, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import BundleSpaceTooLarge, InvalidConfig
from .lp import LE, LinearProgram

DEFAULT_BUNDLE_CAP = 10**7

Bundle = tuple  # tuple of non-negative ints, one per good type


def bundle_count(n_goods: int, k: int) -> int:
    """Number of non-empty multisets of size at most ``k`` over ``n_goods`` goods."""
    return sum(comb(n_goods + m - 1, m) for m in range(1, k + 1))


def enumerate_k_bundles(n_goods: int, k: int, cap: int = DEFAULT_BUNDLE_CAP) -> list:
    """All bundles of size 1..k, ordered by size then lexicographically by good index.

    For two goods and ``k = 2`` the order is ``(1,0), (0,1), (2,0), (1,1), (0,2)``.
    """
    if n_goods < 1 or k < 1:
        raise ValueError("n_goods and k must be positive")
    total = bundle_count(n_goods, k)
    if total > cap:
        raise BundleSpaceTooLarge(f"{total} bundles exceeds cap {cap}")
    out = []
    for size in range(1, k + 1):
        for combo in itertools.combinations_with_replacement(range(n_goods), size):
            counts = [0] * n_goods
            for g in combo:
                counts[g] += 1
            out.append(tuple(counts))
    return out


def bundle_matrix(n_goods: int, k: int, cap: int = DEFAULT_BUNDLE_CAP) -> np.ndarray:
    return np.array(enumerate_k_bundles(n_goods, k, cap), dtype=np.int64).reshape(-1, n_goods)


@dataclass(frozen=True, eq=False)
class AuctionInstance:
    """Agents, goods, integer supplies and valuations over the canonical k-bundle order.

    ``valuations[i, b]`` is agent ``i``'s value for ``bundles[b]``.
    """

    n_agents: int
    n_goods: int
    supplies: np.ndarray
    k: int
    valuations: np.ndarray
    bundles: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self.n_agents < 1 or self.n_goods < 1 or self.k < 1:
            raise ValueError("n_agents, n_goods and k must be positive")
        s = np.asarray(self.supplies)
        if s.shape != (self.n_goods,):
            raise ValueError(f"supplies must have length {self.n_goods}")
        if np.any(s != np.round(s)) or np.any(s < 1):
            raise ValueError("supplies must be positive integers")
        bundles = self.bundles if self.bundles is not None else bundle_matrix(self.n_goods, self.k)
        u = np.asarray(self.valuations, dtype=float)
        if u.shape != (self.n_agents, bundles.shape[0]):
            raise ValueError(f"valuations must have shape {(self.n_agents, bundles.shape[0])}, got {u.shape}")
        if not np.all(np.isfinite(u)) or np.any(u < 0):
            raise ValueError("valuations must be finite and non-negative")
        object.__setattr__(self, "supplies", s.astype(np.int64))
        object.__setattr__(self, "valuations", u)
        object.__setattr__(self, "bundles", np.asarray(bundles, dtype=np.int64))

    @property
    def n_bundles(self):
        return self.bundles.shape[0]

    @property
    def n_vars(self):
        return self.n_agents * self.n_bundles

    def max_values(self):
        """Per-agent ``M_i = max_B u_i(B)``."""
        return self.valuations.max(axis=1)

    def consumption(self, x) -> np.ndarray:
        """Units of each good used by allocation ``x`` (flat, agent-major)."""
        X = np.asarray(x, dtype=float).reshape(self.n_agents, self.n_bundles)
        return X.sum(axis=0) @ self.bundles

    def demand(self, x) -> np.ndarray:
        return np.asarray(x, dtype=float).reshape(self.n_agents, self.n_bundles).sum(axis=1)

    def with_supplies(self, supplies):
        return AuctionInstance(self.n_agents, self.n_goods, np.asarray(supplies), self.k,
                               self.valuations, self.bundles)


@dataclass(frozen=True)
class MechanismConfig:
    """Perturbation scales and tolerances for one mechanism run.

    ``eps_u=None`` means "compute ``2 * delta_w * max_i M_i`` from the instance".
    """

    delta_w: float = 1e-5
    delta_eps: float = 1e-3
    eps: float = 1e-6
    eps_u: Optional[float] = None
    rng_seed: int = 0

    def __post_init__(self):
        if not 0 <= self.delta_w < 1:
            raise InvalidConfig(f"delta_w must lie in [0, 1), got {self.delta_w}")
        if not self.delta_eps > 0:
            raise InvalidConfig(f"delta_eps must be positive, got {self.delta_eps}")
        if not self.eps > 0:
            raise InvalidConfig(f"eps must be positive, got {self.eps}")
        if self.eps_u is not None and self.eps_u < 0:
            raise InvalidConfig("eps_u must be non-negative")

    def check_against(self, instance: AuctionInstance):
        if 2 * self.delta_eps >= instance.supplies.min():
            raise InvalidConfig(
                f"delta_eps={self.delta_eps} would push a supply of {instance.supplies.min()} to zero"
            )

    def utility_error(self, instance: AuctionInstance) -> float:
        if self.eps_u is not None:
            return self.eps_u
        return 2.0 * self.delta_w * float(instance.max_values().max())


@dataclass(frozen=True, eq=False)
class PerturbedInstance:
    """An instance together with its random weights ``w_i(B)`` and reduced supplies."""

    base: AuctionInstance
    weights: np.ndarray
    supply_offsets: np.ndarray
    agent_type: Optional[tuple] = None

    @property
    def perturbed_supplies(self) -> np.ndarray:
        return self.base.supplies - self.supply_offsets

    @property
    def weighted_values(self) -> np.ndarray:
        """Flat ``w_i(B) u_i(B)``, the LP objective."""
        return (self.weights * self.base.valuations).ravel()

    @property
    def n_agents(self):
        return self.base.n_agents

    @property
    def n_goods(self):
        return self.base.n_goods

    @property
    def n_bundles(self):
        return self.base.n_bundles

    @property
    def k(self):
        return self.base.k

    @property
    def bundles(self):
        return self.base.bundles


def unperturbed(instance: AuctionInstance, supply_offsets=None) -> PerturbedInstance:
    """Unit weights and the given (default zero) supply offsets."""
    offsets = np.zeros(instance.n_goods) if supply_offsets is None else np.asarray(supply_offsets, float)
    return PerturbedInstance(instance, np.ones(instance.valuations.shape), offsets)


def perturb(instance: AuctionInstance, cfg: MechanismConfig, rng: np.random.Generator,
            agent_type: Optional[Sequence] = None) -> PerturbedInstance:
    """Draw ``w_i(B) ~ U[1 - delta_w, 1 + delta_w]`` and ``eps_j ~ U[delta_eps, 2 delta_eps]``.

    With ``agent_type`` given, one weight vector is drawn per type (in order of
    first appearance) and shared by all agents of that type.
    """
    cfg.check_against(instance)
    shape = instance.valuations.shape
    if agent_type is None:
        w = rng.uniform(1.0 - cfg.delta_w, 1.0 + cfg.delta_w, size=shape)
        labels = None
    else:
        labels = tuple(agent_type)
        if len(labels) != instance.n_agents:
            raise ValueError("one type label per agent required")
        order = list(dict.fromkeys(labels))
        per_type = rng.uniform(1.0 - cfg.delta_w, 1.0 + cfg.delta_w, size=(len(order), shape[1]))
        idx = np.array([order.index(t) for t in labels])
        w = per_type[idx]
    offsets = rng.uniform(cfg.delta_eps, 2.0 * cfg.delta_eps, size=instance.n_goods)
    return PerturbedInstance(instance, w, offsets, labels)


def lip_matrix(n_agents: int, bundles: np.ndarray) -> sp.csc_matrix:
    """Demand rows (one per agent) stacked over supply rows (one per good)."""
    nb, ng = bundles.shape
    nvar = n_agents * nb
    cols = np.arange(nvar)
    demand = sp.csc_matrix((np.ones(nvar), (np.repeat(np.arange(n_agents), nb), cols)),
                           shape=(n_agents, nvar))
    supply = sp.csc_matrix(np.tile(bundles.T, (1, n_agents)).astype(float))
    return sp.vstack([demand, supply], format="csc")


def build_lip(p: PerturbedInstance, supplies=None) -> LinearProgram:
    """The perturbed LP relaxation: max sum w u x s.t. demand <= 1, supply <= s - eps.

    ``supplies`` overrides the right-hand side of the supply rows (used to
    build the modified-supply problem for a rounded point).
    """
    s = p.perturbed_supplies if supplies is None else np.asarray(supplies, dtype=float)
    A = lip_matrix(p.n_agents, p.bundles)
    rhs = np.concatenate([np.ones(p.n_agents), s])
    return LinearProgram(p.weighted_values, A, (LE,) * (p.n_agents + p.n_goods), rhs)
