"""Lottery construction: integral points whose convex hull contains the LP optimum.

Starting from two roundings of ``x*`` (one maximising, one minimising the
weighted utility), the loop projects ``x*`` onto the hull of the current
point set, keeps the minimal face carrying the projection, pushes ``x*`` a
small step away from that projection and rounds the pushed point with the
push direction as reward. The new point lies strictly beyond the face, so
the distance shrinks until it falls below ``eps``.
"""

from dataclasses import dataclass

import numpy as np

from .auction import MechanismConfig, PerturbedInstance, build_lip
from .errors import LotteryDivergence, NumericalFailure, VerificationFailure
from .lp import LPSolution, solve
from .rounding import INT_TOL, is_integral, iterative_rounding, snap

SUPPORT_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class HullProjection:
    y_star: np.ndarray
    lambdas: np.ndarray
    distance: float


@dataclass(frozen=True, eq=False)
class Lottery:
    """Integral allocations ``points[t]`` drawn with probability ``weights[t]``."""

    points: np.ndarray
    weights: np.ndarray
    residual: float
    iterations: int = 0
    delta_z: float = 0.0
    step_shrinks: int = 0

    def __len__(self):
        return self.points.shape[0]

    def mean(self) -> np.ndarray:
        return self.weights @ self.points


def nearest_point_in_hull(points, x_star, tol=1e-12, max_iter=1000) -> HullProjection:
    """Closest point to ``x_star`` in the convex hull of ``points`` (Wolfe's method).

    Parameters
    ----------
    points : array_like, shape (l, d)
    x_star : array_like, shape (d,)
    tol : float
        Relative tolerance of the first-order test
        ``(x* - y).(p - y) <= tol * max ||p - x*||^2`` for every point ``p``.

    Returns
    -------
    HullProjection
        ``y_star``, barycentric ``lambdas`` over all input points, and the distance.
    """
    P = np.atleast_2d(np.asarray(points, dtype=float))
    x = np.asarray(x_star, dtype=float)
    if P.shape[0] == 0:
        raise ValueError("point set is empty")
    Q = P - x
    norms = np.einsum("ij,ij->i", Q, Q)
    scale = max(float(norms.max()), 1e-300)
    S = [int(np.argmin(norms))]
    lam = np.array([1.0])
    y = Q[S[0]].copy()
    for _ in range(max_iter):
        dots = Q @ y
        j = int(np.argmin(dots))
        yy = float(y @ y)
        if yy - dots[j] <= tol * scale or j in S:
            break
        S.append(j)
        lam = np.append(lam, 0.0)
        while True:
            QS = Q[S]
            m = len(S)
            K = np.zeros((m + 1, m + 1))
            K[:m, :m] = QS @ QS.T
            K[:m, m] = 1.0
            K[m, :m] = 1.0
            rhs = np.zeros(m + 1)
            rhs[m] = 1.0
            mu = np.linalg.lstsq(K, rhs, rcond=None)[0][:m]
            if np.all(mu > 1e-15):
                lam = mu
                break
            neg = mu <= 1e-15
            ratios = lam[neg] / (lam[neg] - mu[neg])
            theta = float(np.min(ratios)) if ratios.size else 0.0
            lam = lam + theta * (mu - lam)
            keep = lam > 1e-15
            if keep.all():
                keep[int(np.argmin(lam))] = False
            S = [s for s, kk in zip(S, keep) if kk]
            lam = lam[keep]
        y = lam @ Q[S]
    else:
        raise NumericalFailure(f"nearest-point iteration did not converge in {max_iter} steps")
    lam = np.clip(lam, 0.0, None)
    lam = lam / lam.sum()
    full = np.zeros(P.shape[0])
    for s, v in zip(S, lam):
        full[s] += v
    y_star = full @ P
    return HullProjection(y_star=y_star, lambdas=full, distance=float(np.linalg.norm(y_star - x)))


def perturbation_step(ctx: PerturbedInstance, delta_eps: float, good: int = 0) -> float:
    """``delta_eps / sqrt(|N| * sum_B B_j^2)``; independent of ``good`` by symmetry."""
    sq = float(np.sum(ctx.bundles[:, good].astype(float) ** 2))
    return delta_eps / np.sqrt(ctx.n_agents * sq)


def _push(x, d, step, ctx):
    """``x + step * d/|d|`` shrunk until it is non-negative and demand-feasible."""
    unit = d / np.linalg.norm(d)
    s = ctx.base.supplies.astype(float)
    z = x + step * unit
    if np.any(ctx.base.consumption(z) > s + 1e-9):
        raise VerificationFailure("perturbed-step-supply", "pushed point exceeds the unperturbed supply")
    shrinks = 0
    while np.any(z < -1e-12) or np.any(ctx.base.demand(z) > 1 + 1e-12):
        step *= 0.5
        shrinks += 1
        if shrinks > 60:
            raise NumericalFailure("could not find a feasible push step")
        z = x + step * unit
    return np.clip(z, 0.0, 1.0), shrinks


def construct_lottery(x_star, ctx: PerturbedInstance, cfg: MechanismConfig,
                      max_iter: int = 10_000, window: int = 50) -> Lottery:
    """Build a lottery over integral allocations whose mean is ``x_star`` within ``cfg.eps``.

    ``x_star`` must be an optimal solution of the perturbed LP relaxation of ``ctx``.
    """
    x = snap(x_star)
    if is_integral(x):
        return Lottery(points=x[None, :], weights=np.ones(1), residual=0.0)

    c1 = ctx.weighted_values
    s_tilde = ctx.perturbed_supplies
    s_full = ctx.base.supplies.astype(float)
    F = [iterative_rounding(x, c1, ctx, s_tilde), iterative_rounding(x, -c1, ctx, s_tilde)]
    if np.array_equal(F[0], F[1]):
        F = F[:1]

    delta_z = perturbation_step(ctx, cfg.delta_eps, 0)
    if ctx.n_goods > 1:
        other = perturbation_step(ctx, cfg.delta_eps, 1)
        if not np.isclose(delta_z, other, rtol=1e-12):
            raise VerificationFailure("delta-z-symmetry", f"{delta_z} != {other}")

    # every point of F vanishes wherever x* does, so project on x*'s support only
    support = np.flatnonzero(x > 0)
    best = np.inf
    since_best = 0
    shrinks = 0
    it = 0
    while True:
        Fa = np.array(F)
        if np.any(Fa[:, np.setdiff1d(np.arange(x.size), support)] != 0):
            raise VerificationFailure("zero-preservation", "a lottery point uses a bundle x* does not")
        proj = nearest_point_in_hull(Fa[:, support], x[support])
        if proj.distance < cfg.eps:
            break
        if proj.distance < best * (1 - 1e-12):
            best = proj.distance
            since_best = 0
        else:
            since_best += 1
            if since_best >= window:
                raise LotteryDivergence(f"residual stuck at {best:.3e} for {window} iterations")
        it += 1
        if it > max_iter:
            raise LotteryDivergence(f"no convergence within {max_iter} iterations")
        F = [F[t] for t in np.flatnonzero(proj.lambdas > SUPPORT_TOL)]
        y = np.zeros_like(x)
        y[support] = proj.y_star
        d = x - y
        z, n_shrink = _push(x, d, delta_z, ctx)
        shrinks += n_shrink
        F.append(iterative_rounding(z, d, ctx, s_full))

    keep = proj.lambdas > 0
    w = proj.lambdas[keep]
    return Lottery(points=Fa[keep], weights=w / w.sum(), residual=proj.distance,
                   iterations=it, delta_z=delta_z, step_shrinks=shrinks)


def sample(lottery: Lottery, rng: np.random.Generator) -> np.ndarray:
    """Draw one allocation, ``points[t]`` with probability ``weights[t]``."""
    t = int(rng.choice(len(lottery), p=lottery.weights))
    return lottery.points[t].copy()


@dataclass(frozen=True, eq=False)
class MLIPReport:
    modified_supplies: np.ndarray
    mlip_objective: float
    point_objective: float
    cs_residual: float


def modified_supplies(point, x_star, ctx: PerturbedInstance, tol=1e-9) -> np.ndarray:
    """Supplies under which ``point`` is LP-optimal: ``s~_j`` on rows slack at x* and
    not exceeded by the point, otherwise the point's own consumption."""
    s_t = ctx.perturbed_supplies
    used_star = ctx.base.consumption(x_star)
    used = ctx.base.consumption(point)
    return np.where((used_star < s_t - tol) & (used <= s_t + tol), s_t, used)


def verify_mlip_optimality(point, ctx: PerturbedInstance, lip_solution: LPSolution,
                           rel_tol: float = 1e-6) -> MLIPReport:
    """Check that ``point`` solves the modified-supply LP and that the LP duals certify it.

    Raises :class:`VerificationFailure` naming the first violated condition.
    """
    point = np.asarray(point, dtype=float)
    x_star = lip_solution.primal
    if not is_integral(point, INT_TOL):
        raise VerificationFailure("integrality")
    if np.any(ctx.base.demand(point) > 1 + 1e-9):
        raise VerificationFailure("demand", "an agent receives more than one bundle")
    s_bar = modified_supplies(point, x_star, ctx)
    if np.any(s_bar > ctx.base.supplies + ctx.k - 1 + 1e-9):
        raise VerificationFailure("supply+k-1", f"modified supplies {s_bar}")

    mlip = build_lip(ctx, supplies=s_bar)
    sol = solve(mlip)
    if not sol.optimal:
        raise VerificationFailure("mlip-solve", sol.status.value)
    obj = float(ctx.weighted_values @ point)
    scale = 1.0 + abs(obj)
    if abs(sol.objective_value - obj) > rel_tol * scale:
        raise VerificationFailure("mlip-optimality",
                                  f"point value {obj} vs modified LP optimum {sol.objective_value}")

    y = lip_solution.duals
    slack = mlip.rhs - mlip.A @ point
    reduced = mlip.objective - mlip.A.T @ y
    if np.min(slack) < -1e-9:
        raise VerificationFailure("mlip-feasibility")
    if np.min(y) < -1e-9 or np.max(reduced) > 1e-7 * scale:
        raise VerificationFailure("dual-feasibility")
    cs = max(float(np.max(np.abs(y * slack))), float(np.max(np.abs(reduced * point))))
    if cs > rel_tol * scale:
        raise VerificationFailure("complementary-slackness", f"residual {cs:.3e}")
    return MLIPReport(s_bar, sol.objective_value, obj, cs)
