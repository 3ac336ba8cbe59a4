"""Grid spectrum auctions: Poisson end users, per-cell utilities, boundary costs.

The arena is an ``m_g x n_g`` grid of unit cells; each cell is a good with
``s_g`` identical bands. Cell ``(r, c)`` has good index ``r * n_g + c``.
Every agent serves end users scattered by a spatial Poisson process. A
bundle is worth the users it covers, minus those sitting in boundary strips
next to neighbouring cells where the agent holds fewer bands.
"""

from dataclasses import asdict, dataclass

import numpy as np

from .auction import AuctionInstance, bundle_matrix
from .errors import InvalidConfig

UTILITY_MODELS = ("linear", "indicator")


@dataclass(frozen=True)
class GridSpec:
    m_g: int = 3
    n_g: int = 3
    s_g: int = 10
    n_agents: int = 30
    k_a: int = 4
    mu: float = 20.0
    lam: float = 0.1
    rng_seed: int = 0
    utility_model: str = "linear"

    def __post_init__(self):
        for name in ("m_g", "n_g", "s_g", "n_agents", "k_a"):
            v = getattr(self, name)
            if int(v) != v or v < 1:
                raise InvalidConfig(f"{name} must be a positive integer, got {v}")
        if not self.mu >= 0:
            raise InvalidConfig(f"mu must be non-negative, got {self.mu}")
        if not 0 < self.lam < 1:
            raise InvalidConfig(f"lam must lie in (0, 1), got {self.lam}")
        if self.utility_model not in UTILITY_MODELS:
            raise InvalidConfig(f"utility_model must be one of {UTILITY_MODELS}")

    @property
    def n_goods(self) -> int:
        return self.m_g * self.n_g

    def to_dict(self) -> dict:
        return asdict(self)


def grid_edges(m_g: int, n_g: int) -> np.ndarray:
    """Ordered adjacent pairs ``(j, k)``, both orientations, sorted."""
    out = []
    for r in range(m_g):
        for c in range(n_g):
            j = r * n_g + c
            for dr, dc in ((-1, 0), (0, -1), (0, 1), (1, 0)):
                rr, cc = r + dr, c + dc
                if 0 <= rr < m_g and 0 <= cc < n_g:
                    out.append((j, rr * n_g + cc))
    return np.array(out, dtype=np.int64).reshape(-1, 2)


def cell_class(m_g: int, n_g: int) -> np.ndarray:
    """'corner', 'edge' or 'interior' per cell, by number of neighbours."""
    deg = np.bincount(grid_edges(m_g, n_g)[:, 0], minlength=m_g * n_g)
    full = min(4, (m_g > 1) * 2 + (n_g > 1) * 2)
    labels = np.full(m_g * n_g, "edge", dtype=object)
    labels[deg == full] = "interior"
    labels[deg <= full - 2] = "corner"
    return labels


@dataclass(frozen=True, eq=False)
class AgentField:
    """User counts per agent: ``cell_users[i, j]`` and ``boundary_users[i, e]`` for edge ``e``."""

    cell_users: np.ndarray
    boundary_users: np.ndarray
    edges: np.ndarray
    m_g: int
    n_g: int

    def __post_init__(self):
        cu, bu = self.cell_users, self.boundary_users
        if np.any(cu < 0) or np.any(bu < 0):
            raise ValueError("user counts must be non-negative")
        if self.edges.size and np.any(bu > cu[:, self.edges[:, 0]]):
            raise ValueError("boundary users exceed cell users")

    @property
    def n_agents(self):
        return self.cell_users.shape[0]


def generate_field(spec: GridSpec, rng: np.random.Generator) -> AgentField:
    """Draw Poisson(mu) users per agent and cell, place them uniformly, count strip members.

    The strip facing each neighbour has width ``lam / 4``; a corner point
    can belong to two strips.
    """
    n, G = spec.n_agents, spec.n_goods
    counts = rng.poisson(spec.mu, size=(n, G))
    pos = rng.random((int(counts.sum()), 2))  # (row offset, column offset) inside the cell
    owner = np.repeat(np.arange(n * G), counts.ravel())
    edges = grid_edges(spec.m_g, spec.n_g)
    w = spec.lam / 4.0
    strips = {
        (-1, 0): pos[:, 0] < w,
        (1, 0): pos[:, 0] > 1.0 - w,
        (0, -1): pos[:, 1] < w,
        (0, 1): pos[:, 1] > 1.0 - w,
    }
    per_dir = {d: np.bincount(owner[m], minlength=n * G).reshape(n, G) for d, m in strips.items()}
    boundary = np.zeros((n, edges.shape[0]), dtype=np.int64)
    for e, (j, k) in enumerate(edges):
        rj, cj = divmod(int(j), spec.n_g)
        rk, ck = divmod(int(k), spec.n_g)
        boundary[:, e] = per_dir[(rk - rj, ck - cj)][:, j]
    return AgentField(counts.astype(np.int64), boundary, edges, spec.m_g, spec.n_g)


def utility_matrix(field: AgentField, bundles: np.ndarray, model: str = "linear") -> np.ndarray:
    """``u_i(B)`` for every agent and every bundle row, clipped at 0.

    ``model='linear'`` values a cell by users times bands; ``'indicator'``
    counts users once per cell held.
    """
    B = np.asarray(bundles, dtype=np.int64)
    if model == "linear":
        gain = field.cell_users @ B.T
    elif model == "indicator":
        gain = field.cell_users @ (B >= 1).T
    else:
        raise ValueError(f"unknown utility model {model!r}")
    if field.edges.size:
        D = np.maximum(B[:, field.edges[:, 0]] - B[:, field.edges[:, 1]], 0)
        gain = gain - field.boundary_users @ D.T
    return np.maximum(gain, 0).astype(float)


def grid_utility(field: AgentField, bundle, agent: int = 0, model: str = "linear") -> float:
    B = np.asarray(bundle, dtype=np.int64).reshape(1, -1)
    return float(utility_matrix(field, B, model)[agent, 0])


def generate(spec: GridSpec, rng: np.random.Generator, return_field: bool = False):
    """Random :class:`AuctionInstance` from the grid model (plus the field if asked)."""
    field = generate_field(spec, rng)
    bundles = bundle_matrix(spec.n_goods, spec.k_a)
    u = utility_matrix(field, bundles, spec.utility_model)
    inst = AuctionInstance(spec.n_agents, spec.n_goods, np.full(spec.n_goods, spec.s_g), spec.k_a,
                           u, bundles)
    return (inst, field) if return_field else inst


class MultibandBundle(ValueError):
    """Shape is undefined for a bundle holding more than one band of some cell."""


def classify_bundle_shape(bundle, m_g: int, n_g: int):
    """``(size, internal adjacencies)`` of a 0/1 bundle; ``(4, 4)`` is the 2x2 square."""
    B = np.asarray(bundle)
    if B.shape != (m_g * n_g,):
        raise ValueError(f"bundle must have {m_g * n_g} entries")
    if np.any(B > 1):
        raise MultibandBundle("bundle holds several bands of one cell")
    e = grid_edges(m_g, n_g)
    both = (B[e[:, 0]] > 0) & (B[e[:, 1]] > 0)
    return int(B.sum()), int(both.sum()) // 2
