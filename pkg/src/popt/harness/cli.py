"""Command line entry point.

Exit codes: 0 success, 1 a verification failed, 2 bad input or configuration.
"""

import argparse
import dataclasses
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from ..auction import MechanismConfig
from ..errors import InputError, InvalidConfig, PoptError, ProblemTooLarge, VerificationFailure
from ..spectrum import GridSpec, generate
from .experiment import ExperimentConfig, resolve_out_dir, run_experiment
from .io import FORMATS, parse_input
from .mechanism import run_mechanism
from .oracle import ip_oracle
from .strategy import TypedPopulation, default_population, misreport_gain

EXIT_OK, EXIT_VERIFY, EXIT_INPUT = 0, 1, 2


def _load_instance(args, rng):
    if not args.input:
        raise InputError("--input is required", field="input")
    obj = parse_input(args.input, args.format)
    if isinstance(obj, GridSpec):
        return generate(obj, rng)
    return obj


def _allocation_pairs(x, inst):
    X = np.asarray(x).reshape(inst.n_agents, inst.n_bundles)
    return [{"agent": int(i), "bundle": [int(v) for v in inst.bundles[b]]}
            for i, b in zip(*np.nonzero(X > 0.5))]


def _optional_out(args):
    """Output directory for single-shot verbs; ``None`` means print only."""
    if args.out_dir or os.environ.get("POPT_OUT_DIR"):
        return resolve_out_dir(args.out_dir)
    return None


def _emit(obj, out_dir, name):
    text = json.dumps(obj, indent=2)
    print(text)
    if out_dir:
        p = Path(out_dir)
        p.mkdir(parents=True, exist_ok=True)
        (p / name).write_text(text + "\n")


def cmd_solve(args):
    rng = np.random.default_rng(args.seed)
    inst = _load_instance(args, rng)
    res = run_mechanism(inst, MechanismConfig(rng_seed=args.seed), rng, verify_all=True, strict=False)
    reports = res.reports
    out = {
        "allocation": _allocation_pairs(res.allocation, inst),
        "prices": [float(v) for v in res.prices.p],
        "lp_value": res.lp_value,
        "expected_utility": res.expected_utility,
        "realized_utility": res.realized_utility,
        "lottery": {"size": len(res.lottery), "weights": [float(w) for w in res.lottery.weights],
                    "residual": res.lottery.residual},
        "eps_u": res.eps_u,
        "over_allocation": [float(v) for v in res.over_allocation()],
        "supporting_pass": all(r.supporting_pass for r in reports),
        "envy_pass": all(r.envy_pass for r in reports),
        "worst_supporting_violation": max(r.supporting_violation for r in reports),
        "worst_envy_violation": max(r.envy_violation for r in reports),
    }
    _emit(out, _optional_out(args), "solve.json")
    bad = any(np.any(res.over_allocation(p) > inst.k - 1 + 1e-9) for p in res.lottery.points)
    return EXIT_VERIFY if bad or not out["supporting_pass"] else EXIT_OK


def cmd_oracle(args):
    inst = _load_instance(args, np.random.default_rng(args.seed))
    x, value = ip_oracle(inst)
    _emit({"value": value, "allocation": _allocation_pairs(x, inst)},
          _optional_out(args), "oracle.json")
    return EXIT_OK


def cmd_experiment(args):
    cfg = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
    changes = {"out_dir": resolve_out_dir(args.out_dir, cfg.out_dir if args.config else None)}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.replications is not None:
        changes["replications"] = args.replications
    if args.workers is not None:
        changes["workers"] = args.workers
    cfg = dataclasses.replace(cfg, **changes)
    report = run_experiment(cfg)
    for lam in cfg.lambdas:
        tot = report.total_over_allocation(lam)
        print(f"lambda={lam:g} replications={tot.size} mean_overallocation={tot.mean():.4f} "
              f"max={tot.max():g}")
    print(f"wrote CSVs to {cfg.out_dir}")
    return EXIT_OK if all(m.passed for m in report.replications) else EXIT_VERIFY


def _population(d):
    try:
        return TypedPopulation(tuple(d["types"]), np.array([d["types"][t] for t in d["types"]]),
                               np.array([d.get("multiplicities", {}).get(t, 1) for t in d["types"]]),
                               int(d["n_goods"]), np.array(d["supplies"]), int(d["k"]))
    except KeyError as e:
        raise InputError("missing field", field=f"population.{e.args[0]}") from None
    except ValueError as e:
        raise InputError(str(e), field="population") from None


def cmd_sp_test(args):
    d = {}
    if args.config:
        try:
            d = json.loads(Path(args.config).read_text())
        except OSError as e:
            raise InputError(f"cannot read {args.config}: {e.strerror}") from e
        except json.JSONDecodeError as e:
            raise InputError(f"invalid JSON: {e.msg}", line=e.lineno) from None
    pop = _population(d["population"]) if "population" in d else default_population()
    xi, zeta = d.get("misreport", [pop.names[-1], pop.names[0]])
    for name, f in ((xi, "misreport[0]"), (zeta, "misreport[1]")):
        if name not in pop.names:
            raise InputError(f"unknown type {name!r}", field=f)
    cfg = MechanismConfig(**d.get("mechanism", {}))
    reps = args.replications or d.get("replications", 50)
    seed = args.seed if args.seed is not None else d.get("seed", 0)
    rows = []
    print("n_theta,mean_gain,half_width")
    for n in d.get("scales", [5, 20, 80]):
        g = misreport_gain(pop, int(n), xi, zeta, cfg, seed=seed, replications=reps,
                           mode=d.get("supply_mode", "proportional"))
        rows.append(g)
        print(f"{n},{g.mean:.10g},{g.half_width:.10g}")
    out = _optional_out(args)
    if out:
        Path(out).mkdir(parents=True, exist_ok=True)
        (Path(out) / "sp_test.csv").write_text(
            "n_theta,mean_gain,half_width\n" + "".join(f"{g.n},{g.mean:.10g},{g.half_width:.10g}\n" for g in rows))
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="popt", description="Randomised combinatorial auction with LP-dual prices")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--out-dir", default=None, help="output directory (env POPT_OUT_DIR)")

    s = sub.add_parser("solve", help="run the mechanism on one instance")
    s.add_argument("--input", required=True)
    s.add_argument("--format", choices=FORMATS, default=None)
    common(s)
    s.set_defaults(func=cmd_solve)

    s = sub.add_parser("oracle", help="exact integer optimum of a tiny instance")
    s.add_argument("--input", required=True)
    s.add_argument("--format", choices=FORMATS, default=None)
    common(s)
    s.set_defaults(func=cmd_oracle)

    s = sub.add_parser("experiment", help="Monte-Carlo sweep on the grid model, writes CSVs")
    s.add_argument("--config", default=None)
    s.add_argument("--replications", type=int, default=None)
    s.add_argument("--workers", type=int, default=None)
    common(s)
    s.set_defaults(func=cmd_experiment)

    s = sub.add_parser("sp-test", help="misreporting gain at growing population sizes")
    s.add_argument("--config", default=None)
    s.add_argument("--replications", type=int, default=None)
    common(s)
    s.set_defaults(func=cmd_sp_test)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command in ("solve", "oracle") and args.seed is None:
        args.seed = 0
    try:
        return args.func(args)
    except (InputError, InvalidConfig, ProblemTooLarge) as e:
        print(f"input error: {e}", file=sys.stderr)
        return EXIT_INPUT
    except VerificationFailure as e:
        print(f"verification failed: {e}", file=sys.stderr)
        return EXIT_VERIFY
    except PoptError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_VERIFY


if __name__ == "__main__":
    sys.exit(main())
