"""Command line entry point: bench, verify, constants, run."""
from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np
import yaml

from . import bench, verify
from . import perturbations as pt
from .estimators import parse_estimator
from .objectives import NoiseModel, NoisyObjective, make_objective
from .optimizer import run


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--seed", type=int, default=None, help="master seed")
    p.add_argument("--out-dir", default="out")
    p.add_argument("--format", choices=("text", "csv", "json"), default="text")
    p.add_argument("--jobs", type=int, default=1)


def _cmd_bench(args) -> int:
    overrides = {"master_seed": args.seed, "setting": args.setting, "n_runs": args.n_runs}
    if args.objectives:
        overrides["objectives"] = args.objectives.split(",")
    if args.noises:
        overrides["noises"] = args.noises.split(",")
    try:
        suite = bench.load_suite(args.config, overrides)
    except bench.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    if args.print_config:
        sys.stdout.write(yaml.safe_dump(suite, sort_keys=True))
        return 0
    reports = bench.run_experiments(bench.expand_suite(suite), jobs=args.jobs)
    bench.write_outputs(reports, suite, args.out_dir)
    sys.stdout.write(bench.emit_tables(reports, args.format))
    return 0


def _cmd_verify(args) -> int:
    entries = verify.verify_suite(args.suite)
    if args.format == "json":
        print(json.dumps([e.to_dict() for e in entries], indent=2, default=float))
    else:
        for e in entries:
            print(e.line())
    os.makedirs(args.out_dir, exist_ok=True)
    with open(os.path.join(args.out_dir, "verify.json"), "w") as fh:
        json.dump([e.to_dict() for e in entries], fh, indent=2, default=float)
    return 0 if all(e.passed for e in entries) else 1


def _cmd_constants(args) -> int:
    kind = pt.PerturbationKind(args.kind)
    seed = 0 if args.seed is None else args.seed
    consts = pt.estimate_constants(kind, args.dim, args.samples, seed)
    d = consts.to_dict()
    if kind.name == pt.TRUNCATED_CAUCHY:
        d["c2_quadrature"] = pt.exact_c2(args.dim)
        d["c_bar_quadrature"] = pt.exact_c_bar(args.dim)
    if args.format == "json":
        print(json.dumps(d, indent=2, sort_keys=True))
    else:
        for k in sorted(d):
            print(f"{k:>16}  {d[k]}")
    return 0


def _cmd_run(args) -> int:
    spec = make_objective(args.objective)
    obj = NoisyObjective(spec, NoiseModel(args.noise, args.sigma))
    kind = parse_estimator(json.loads(args.estimator) if args.estimator.startswith("{") else args.estimator)
    horizon = args.horizon or bench.DEFAULT_HORIZONS.get(args.objective, 1000)
    sched = bench.setting_schedule(args.setting, horizon)
    seed = 0 if args.seed is None else args.seed
    if args.x1:
        x1 = np.array([float(v) for v in args.x1.split(",")])
    else:
        box = spec.domain_box
        x1 = np.random.default_rng([seed, 0]).uniform(box[:, 0], box[:, 1])
    rec = run(obj, kind, x1, sched, seed)
    os.makedirs(args.out_dir, exist_ok=True)
    path = os.path.join(args.out_dir, "trajectory.jsonl")
    t = rec.trajectory
    with open(path, "w") as fh:
        for i in range(len(t.k)):
            fh.write(json.dumps({"k": int(t.k[i]), "x": t.x[i].tolist(), "f_true": float(t.f_true[i]),
                                 "g_norm": float(t.g_norm[i])}) + "\n")
    summary = rec.to_json_dict(objective=spec.name, noise=obj.noise.label(), estimator=kind.label(),
                               schedule=sched.to_dict())
    print(json.dumps(summary, indent=None if args.format != "json" else 2))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tcsf-bench", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("bench", help="benchmark tables for both parameter settings")
    _add_common(p)
    p.add_argument("--config", help="YAML or JSON suite file")
    p.add_argument("--setting", choices=bench.SETTINGS)
    p.add_argument("--n-runs", type=int)
    p.add_argument("--objectives", help="comma separated subset")
    p.add_argument("--noises", help="comma separated subset")
    p.add_argument("--print-config", action="store_true")
    p.set_defaults(func=_cmd_bench)

    p = sub.add_parser("verify", help="property suites with pinned seeds")
    _add_common(p)
    p.add_argument("--suite", choices=verify.SUITES + ("all",), default="all")
    p.set_defaults(func=_cmd_verify)

    p = sub.add_parser("constants", help="Monte Carlo distribution constants")
    _add_common(p)
    p.add_argument("--dim", type=int, default=4)
    p.add_argument("--samples", type=int, default=10**6)
    p.add_argument("--kind", default=pt.TRUNCATED_CAUCHY,
                   choices=(pt.TRUNCATED_CAUCHY, pt.T_PROJECTED_SPHERE, pt.GAUSSIAN, pt.RADEMACHER))
    p.set_defaults(func=_cmd_constants)

    p = sub.add_parser("run", help="one trajectory, dumped as JSON lines")
    _add_common(p)
    p.add_argument("--objective", default="quadratic")
    p.add_argument("--noise", default="type1")
    p.add_argument("--sigma", type=float, default=5.0)
    p.add_argument("--estimator", default="tcsf", help="name or JSON mapping")
    p.add_argument("--setting", choices=bench.SETTINGS, default="constant")
    p.add_argument("--horizon", type=int)
    p.add_argument("--x1", help="comma separated start point")
    p.set_defaults(func=_cmd_run)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
