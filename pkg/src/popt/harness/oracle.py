"""Exact integer optimum by depth-first search over per-agent bundle choices."""

import numpy as np

from .. import _kernels
from ..auction import AuctionInstance
from ..errors import ProblemTooLarge

MAX_STATES = 10**6


def ip_oracle(instance: AuctionInstance, supplies=None, max_states: int = MAX_STATES):
    """Best integral allocation under ``supplies`` (default: the instance's own).

    Returns ``(x, value)`` with ``x`` flat and agent-major. Raises
    :class:`ProblemTooLarge` when ``(n_bundles + 1) ** n_agents`` exceeds ``max_states``.
    """
    n, nb = instance.n_agents, instance.n_bundles
    if (nb + 1) ** n > max_states:
        raise ProblemTooLarge(f"({nb}+1)^{n} choice vectors exceed the limit of {max_states}")
    s = instance.supplies if supplies is None else np.asarray(supplies)
    choice, best, _, done = _kernels.oracle_search(
        np.ascontiguousarray(instance.valuations, dtype=np.float64),
        np.ascontiguousarray(instance.bundles, dtype=np.int64),
        np.asarray(s, dtype=np.float64), int(max_states) + 1)
    if not done:  # pragma: no cover - the size guard makes this unreachable
        raise ProblemTooLarge("search exceeded its state budget")
    x = np.zeros(n * nb)
    for i, b in enumerate(choice):
        if b >= 0:
            x[i * nb + b] = 1.0
    return x, max(float(best), 0.0)
