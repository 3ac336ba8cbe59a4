"""Monte-Carlo sweeps over the boundary fraction ``lam`` on the grid model.

Replication ``r`` draws its randomness from
``SeedSequence(seed, spawn_key=(r,))``, the same stream for every ``lam``.
The user positions and weights are therefore shared across the sweep and
only the strip width changes, which makes trends in ``lam`` less noisy.
Results are folded in (lam, replication) order, so the output does not
depend on how many workers ran.
"""

import csv
import dataclasses
import json
import logging
import os
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from ..auction import MechanismConfig
from ..errors import InputError, InvalidConfig, ProblemTooLarge
from ..pricing import assigned_bundles
from ..spectrum import GridSpec, MultibandBundle, cell_class, classify_bundle_shape, generate
from .mechanism import run_mechanism
from .oracle import ip_oracle

log = logging.getLogger(__name__)

CSV_FILES = (
    "utility_vs_lambda.csv",
    "overallocation_hist.csv",
    "overallocation_cdf.csv",
    "overallocation_vs_lambda.csv",
    "tv_distance.csv",
    "price_vs_lambda.csv",
    "bundle_shapes.csv",
    "payoff_differences.csv",
    "allocation_counts.csv",
)


@dataclass(frozen=True)
class ExperimentConfig:
    grid: GridSpec = field(default_factory=GridSpec)
    mechanism: MechanismConfig = field(default_factory=MechanismConfig)
    replications: int = 10
    lambdas: tuple = (0.1,)
    out_dir: str = "results"
    seed: int = 0
    workers: int = 1
    intlp: bool = True

    def __post_init__(self):
        if int(self.replications) != self.replications or self.replications < 1:
            raise InvalidConfig("replications must be a positive integer")
        lams = tuple(float(v) for v in self.lambdas)
        if not lams or any(not 0 < v < 1 for v in lams):
            raise InvalidConfig("every lambda must lie in (0, 1)")
        object.__setattr__(self, "lambdas", lams)
        if self.workers < 1:
            raise InvalidConfig("workers must be at least 1")

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        d = dict(d)
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise InputError(f"unknown keys {sorted(unknown)}", field=sorted(unknown)[0])
        try:
            if "grid" in d:
                d["grid"] = GridSpec(**d["grid"])
            if "mechanism" in d:
                d["mechanism"] = MechanismConfig(**d["mechanism"])
            return cls(**d)
        except TypeError as e:
            raise InputError(str(e)) from None

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            d = json.loads(Path(path).read_text())
        except OSError as e:
            raise InputError(f"cannot read {path}: {e.strerror}") from e
        except json.JSONDecodeError as e:
            raise InputError(f"invalid JSON: {e.msg}", line=e.lineno) from None
        if not isinstance(d, dict):
            raise InputError("config must be a JSON object")
        return cls.from_dict(d)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["lambdas"] = list(self.lambdas)
        return d


@dataclass(frozen=True, eq=False)
class ReplicationMetrics:
    lam: float
    replication: int
    utility_popt: float
    utility_lp: float
    utility_intlp: Optional[float]
    over_allocation: np.ndarray  # per good, sampled allocation
    allocation_counts: np.ndarray  # units of each good allocated
    prices: np.ndarray
    shapes: dict  # (size, internal adjacencies) -> count; key "multiband" for the rest
    payoff_diffs: np.ndarray
    lottery_size: int
    passed: bool


def replication_rng(seed: int, replication: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(replication,))))


def run_replication(cfg: ExperimentConfig, lam: float, r: int) -> ReplicationMetrics:
    spec = dataclasses.replace(cfg.grid, lam=lam)
    rng = replication_rng(cfg.seed, r)
    inst = generate(spec, rng)
    res = run_mechanism(inst, cfg.mechanism, rng)
    intlp = None
    if cfg.intlp:
        try:
            intlp = ip_oracle(inst)[1]
        except ProblemTooLarge:
            pass
    shapes = Counter()
    for b in assigned_bundles(res.allocation, inst):
        if b < 0:
            continue
        try:
            shapes[classify_bundle_shape(inst.bundles[b], spec.m_g, spec.n_g)] += 1
        except MultibandBundle:
            shapes["multiband"] += 1
    rep = res.reports[0]
    return ReplicationMetrics(
        lam=lam, replication=r,
        utility_popt=res.expected_utility, utility_lp=res.lp_value, utility_intlp=intlp,
        over_allocation=res.over_allocation(),
        allocation_counts=np.rint(inst.consumption(res.allocation)).astype(np.int64),
        prices=res.prices.p.copy(), shapes=dict(shapes), payoff_diffs=rep.payoff_diffs.copy(),
        lottery_size=len(res.lottery), passed=rep.passed)


def _run_one(args):
    return run_replication(*args)


@dataclass(frozen=True, eq=False)
class MetricsReport:
    config: ExperimentConfig
    replications: list  # ReplicationMetrics in (lambda, replication) order

    def at(self, lam: float) -> list:
        return [m for m in self.replications if m.lam == lam]

    def total_over_allocation(self, lam: float) -> np.ndarray:
        return np.array([m.over_allocation.sum() for m in self.at(lam)])

    def mean_over_allocation(self, lam: float) -> float:
        return float(self.total_over_allocation(lam).mean())

    def shape_histogram(self, lam: float) -> Counter:
        c = Counter()
        for m in self.at(lam):
            c.update(m.shapes)
        return c

    def payoff_diffs(self, lam: float) -> np.ndarray:
        return np.concatenate([m.payoff_diffs for m in self.at(lam)])

    def count_distributions(self, lam: float) -> np.ndarray:
        """Empirical distribution over replications of units allocated, one row per good."""
        counts = np.array([m.allocation_counts for m in self.at(lam)])
        top = int(counts.max(initial=0)) + 1
        dist = np.zeros((counts.shape[1], top))
        for j in range(counts.shape[1]):
            dist[j] = np.bincount(counts[:, j], minlength=top) / counts.shape[0]
        return dist

    def tv_distances(self, lam: float) -> np.ndarray:
        """Pairwise total-variation distances between the goods' count distributions."""
        d = self.count_distributions(lam)
        return 0.5 * np.abs(d[:, None, :] - d[None, :, :]).sum(axis=2)


def run_experiment(cfg: ExperimentConfig, write: bool = True) -> MetricsReport:
    """Run every (lam, replication) pair and optionally write the CSVs to ``cfg.out_dir``."""
    jobs = [(cfg, lam, r) for lam in cfg.lambdas for r in range(cfg.replications)]
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(_run_one, jobs, chunksize=max(1, len(jobs) // (4 * cfg.workers))))
    else:
        results = []
        for t, job in enumerate(jobs):
            results.append(_run_one(job))
            log.debug("replication %d/%d done", t + 1, len(jobs))
    report = MetricsReport(cfg, results)
    if write:
        write_csvs(report, cfg.out_dir)
    return report


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".12g")
    return str(v)


def _write(path: Path, header, rows):
    try:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([_fmt(v) for v in row])
    except OSError as e:
        raise OSError(e.errno, f"cannot write {path}: {e.strerror}") from e


def write_csvs(report: MetricsReport, out_dir) -> list:
    """One CSV per statistic; returns the written paths."""
    cfg = report.config
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise OSError(e.errno, f"cannot create {out}: {e.strerror}") from e
    lams = cfg.lambdas
    grid = cfg.grid
    classes = cell_class(grid.m_g, grid.n_g)
    paths = []

    def emit(name, header, rows):
        p = out / name
        _write(p, header, rows)
        paths.append(p)

    rows = []
    for lam in lams:
        ms = report.at(lam)
        ip = [m.utility_intlp for m in ms]
        rows.append((lam, np.mean([m.utility_popt for m in ms]), np.mean([m.utility_lp for m in ms]),
                     None if any(v is None for v in ip) else float(np.mean(ip))))
    emit("utility_vs_lambda.csv",
         ("lambda", "mean_total_utility_popt", "mean_total_utility_lp", "mean_total_utility_intlp"), rows)

    hist, cdf, summary = [], [], []
    for lam in lams:
        tot = np.rint(report.total_over_allocation(lam)).astype(np.int64)
        counts = np.bincount(tot, minlength=(grid.k_a - 1) * grid.n_goods + 1)
        cum = np.cumsum(counts) / tot.size
        for v, (c, f) in enumerate(zip(counts, cum)):
            hist.append((lam, v, int(c)))
            cdf.append((lam, v, float(f)))
        summary.append((lam, float(tot.mean()), float(tot.std()), int(tot.max()),
                        float(np.mean(tot <= 12))))
    emit("overallocation_hist.csv", ("lambda", "total_overallocation", "count"), hist)
    emit("overallocation_cdf.csv", ("lambda", "total_overallocation", "cdf"), cdf)
    emit("overallocation_vs_lambda.csv",
         ("lambda", "mean_overallocation", "std_overallocation", "max_overallocation", "frac_le_12"),
         summary)

    rows = []
    for lam in lams:
        tv = report.tv_distances(lam)
        G = tv.shape[0]
        for a in range(G):
            for b in range(a + 1, G):
                rows.append((lam, a, b, classes[a], classes[b], float(tv[a, b])))
    emit("tv_distance.csv", ("lambda", "grid_a", "grid_b", "class_a", "class_b", "tv_distance"), rows)

    rows = []
    for lam in lams:
        P = np.array([m.prices for m in report.at(lam)])
        for j in range(P.shape[1]):
            rows.append((lam, j, classes[j], float(P[:, j].mean())))
    emit("price_vs_lambda.csv", ("lambda", "grid", "class", "mean_price"), rows)

    rows = []
    for lam in lams:
        h = report.shape_histogram(lam)
        for key in sorted(k for k in h if k != "multiband"):
            rows.append((lam, "single", key[0], key[1], h[key]))
        rows.append((lam, "multiband", None, None, h.get("multiband", 0)))
    emit("bundle_shapes.csv", ("lambda", "kind", "size", "internal_boundaries", "count"), rows)

    rows = []
    for lam in lams:
        for m in report.at(lam):
            for i, v in enumerate(m.payoff_diffs):
                rows.append((lam, m.replication, i, float(v)))
    emit("payoff_differences.csv", ("lambda", "replication", "agent", "payoff_difference"), rows)

    rows = []
    for lam in lams:
        d = report.count_distributions(lam)
        n = len(report.at(lam))
        for j in range(d.shape[0]):
            for units in range(d.shape[1]):
                c = int(round(d[j, units] * n))
                if c:
                    rows.append((lam, j, units, c))
    emit("allocation_counts.csv", ("lambda", "grid", "units", "count"), rows)
    return paths


def resolve_out_dir(cli_value=None, config_value=None) -> str:
    """Command-line flag, then ``POPT_OUT_DIR``, then the config file."""
    return cli_value or os.environ.get("POPT_OUT_DIR") or config_value or "results"
