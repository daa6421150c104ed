"""nl-sysid command line: simulate, theory, train, experiment, verify.

Exit status: 0 on success, 1 when a verification check fails, 2 on usage errors.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import verify as V
from .activation import leaky_relu, parse
from .experiment import ExperimentConfig, run_experiment
from .learner import (LearnerConfig, build_dataset, empirical_scaling_traj, encode, sgd_train)
from .linalg import haar_orthogonal
from .simulator import (SystemParams, gaussian_inputs, random_system, simulate, trajectory_to_csv,
                        write_trajectory_csv)
from .theory import STABLE, b_t, covariance_bounds_check, theory_report


class UsageError(Exception):
    pass


def _activation(args):
    if getattr(args, "activation", None):
        return parse(args.activation)
    return leaky_relu(args.beta)


def _load_config(path) -> dict:
    if path is None:
        return {}
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"config file not found: {path}")
    try:
        return json.loads(p.read_text())
    except json.JSONDecodeError as e:
        raise UsageError(f"invalid JSON in {path}: {e}") from e


def cmd_simulate(args) -> int:
    rng = np.random.default_rng(args.seed)
    params = random_system(args.n, args.p, args.a_norm, rng, _activation(args))
    traj = simulate(params, gaussian_inputs(args.p, args.T, rng))
    if args.out:
        trajectory_to_csv(traj, args.out)
    else:
        write_trajectory_csv(traj, sys.stdout)
    return 0


def cmd_theory(args) -> int:
    rng = np.random.default_rng(args.seed)
    A = args.a_norm * haar_orthogonal(args.n, rng)
    if args.b == "identity":
        B = np.eye(args.n, args.p)
    else:
        B = rng.standard_normal((args.n, args.p))
    params = SystemParams(A, B, _activation(args))
    try:
        rep = theory_report(params, args.mode, T0=args.t0, C=args.C, c0=args.c0, c=args.c)
    except ValueError as e:
        raise UsageError(str(e)) from e
    text = rep.to_json()
    if args.out:
        Path(args.out).write_text(text + "\n")
    print(text)
    return 0


def cmd_train(args) -> int:
    conf = _load_config(args.config)
    n, p, N = conf.get("n", args.n), conf.get("p", args.p), conf.get("N", args.N)
    a_norm = conf.get("a_norm", args.a_norm)
    eta = conf.get("eta", args.eta)
    iterations = conf.get("iterations", args.iterations)
    act = parse(conf["activation"]) if "activation" in conf else _activation(args)
    seed = conf.get("seed", args.seed)

    sys_ss, in_ss, sgd_ss = np.random.SeedSequence(seed).spawn(3)
    params = random_system(n, p, a_norm, np.random.default_rng(sys_ss), act)
    traj = simulate(params, gaussian_inputs(p, N + 1, np.random.default_rng(in_ss)))
    mu_mode = conf.get("mu_mode", args.mu_mode)
    if mu_mode == "empirical":
        mu = empirical_scaling_traj(traj)
    elif mu_mode == "theoretical":
        mu = 1.0 / b_t(params.a_norm, params.b_norm, math.inf)
    else:
        mu = float(mu_mode)
    ds = build_dataset(traj, mu)
    cfg = LearnerConfig(eta=eta, iterations=iterations, mu_mode=mu, seed=int(sgd_ss.generate_state(1)[0]),
                        trace_stride=conf.get("trace_stride", args.trace_stride))
    trace = sgd_train(ds, cfg, act, truth=encode(params.A, params.B, mu))
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    trace.to_csv(out / "trace.csv")
    (out / "weights.json").write_text(trace.weights_json() + "\n")
    print(json.dumps({"final_normalized_error": trace.final_error,
                      "final_normalized_loss": float(trace.losses[-1]), "mu": mu}))
    return 0


def cmd_experiment(args) -> int:
    conf = _load_config(args.config)
    if args.seed is not None:
        conf["seed"] = args.seed
    if args.out:
        conf["output_dir"] = args.out
    try:
        cfg = ExperimentConfig(**conf)
    except (TypeError, ValueError) as e:
        raise UsageError(f"bad experiment config: {e}") from e
    if not cfg.output_dir:
        raise UsageError("no output directory: set output_dir in the config or pass --out")
    res = run_experiment(cfg)
    print(json.dumps({k: res.final_mean_error(k) for k in res.aggregates}, indent=2, sort_keys=True))
    return 0


def deterministic_suite(seed: int) -> list[V.CheckReport]:
    rng = np.random.default_rng(seed)
    reports = []
    for a_norm in (0.3, 0.7):
        for _ in range(3):
            params = random_system(5, 8, a_norm, rng, leaky_relu(0.5))
            U = gaussian_inputs(8, 30, rng)
            reports.append(V.check_truncation(params, U, int(rng.integers(1, 8))))
            reports.append(V.check_lipschitz_input(params, U, int(rng.integers(0, 30)), rng.standard_normal(8)))
            reports.append(V.check_independence_structure(params, int(rng.integers(2, 5)), 1, 3, rng))
            reports.append(V.check_merge(params, gaussian_inputs(8, 200, rng), 3))
    return reports


def statistical_suite(seed: int) -> list[V.CheckReport]:
    ss = np.random.SeedSequence(seed)
    reports = []
    for beta, a_norm in [(0.5, 0.5), (1.0, 0.9), (0.25, 0.0)]:
        s_sys, s_mc, s_norm = ss.spawn(3)
        params = random_system(3, 3, a_norm, np.random.default_rng(s_sys), leaky_relu(beta))
        cov = covariance_bounds_check(params, 5, 20_000, s_mc)
        reports.append(V.CheckReport(f"covariance_bounds[beta={beta},a={a_norm}]",
                                     observed=[cov.eig_min, cov.eig_max],
                                     bound=[cov.lower_bound, cov.upper_bound],
                                     tolerance=cov.tolerance, passed=cov.passed,
                                     samples_used=cov.num_samples))
        reports.append(V.check_norm_growth(params, 5, 20_000, s_norm))
    prob = V.random_single_row_problem(10, 200, leaky_relu(0.5), ss.spawn(1)[0])
    reports.append(V.check_rate_bound(prob, 100, ss.spawn(1)[0]))
    return reports


def cmd_verify(args) -> int:
    reports = []
    if args.suite in ("deterministic", "all"):
        reports += deterministic_suite(args.seed)
    if args.suite in ("statistical", "all"):
        reports += statistical_suite(args.seed)
    for r in reports:
        print(f"{'PASS' if r.passed else 'FAIL'}  {r.name}")
    if args.out:
        Path(args.out).write_text(V.reports_json(reports) + "\n")
    return 0 if all(r.passed for r in reports) else 1


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="nl-sysid", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    def common(sp, seed_default=0):
        sp.add_argument("--seed", type=int, default=seed_default)
        sp.add_argument("--out", default=None)

    def system_args(sp):
        sp.add_argument("--n", type=int, default=5)
        sp.add_argument("--p", type=int, default=10)
        sp.add_argument("--a-norm", type=float, default=0.5)
        sp.add_argument("--beta", type=float, default=0.5, help="leaky ReLU slope")
        sp.add_argument("--activation", default=None, help="e.g. relu, linear, leaky_relu:0.25")

    sp = sub.add_parser("simulate", help="emit a trajectory CSV")
    system_args(sp)
    sp.add_argument("--T", type=int, default=100)
    common(sp)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("theory", help="print the theory report as JSON")
    system_args(sp)
    sp.add_argument("--b", choices=["identity", "gaussian"], default="gaussian")
    sp.add_argument("--mode", choices=["stable", "odd", "unstable"], default=STABLE)
    sp.add_argument("--t0", type=int, default=None)
    sp.add_argument("--C", type=float, default=1.0)
    sp.add_argument("--c0", type=float, default=1.0)
    sp.add_argument("--c", type=float, default=1.0)
    common(sp)
    sp.set_defaults(func=cmd_theory)

    sp = sub.add_parser("train", help="single SGD run: trace CSV + weights JSON")
    system_args(sp)
    sp.add_argument("--N", type=int, default=200)
    sp.add_argument("--eta", type=float, default=0.01)
    sp.add_argument("--iterations", type=int, default=20_000)
    sp.add_argument("--mu-mode", default="empirical")
    sp.add_argument("--trace-stride", type=int, default=100)
    sp.add_argument("--config", default=None)
    common(sp)
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("experiment", help="run a multi-realization experiment from JSON")
    sp.add_argument("--config", required=True)
    common(sp, seed_default=None)
    sp.set_defaults(func=cmd_experiment)

    sp = sub.add_parser("verify", help="run the verification battery")
    sp.add_argument("--suite", choices=["deterministic", "statistical", "all"], default="all")
    common(sp)
    sp.set_defaults(func=cmd_verify)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        return args.func(args)
    except UsageError as e:
        print(f"nl-sysid: error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
