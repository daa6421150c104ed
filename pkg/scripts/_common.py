"""Shared argument handling for the experiment scripts."""

import argparse
import json
from dataclasses import replace
from pathlib import Path

from nlsysid.experiment import ExperimentConfig, run_experiment


def parser(description: str) -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(description=description)
    ap.add_argument("--out", default="results", help="output root directory")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--realizations", type=int, default=None, help="override the realization count")
    ap.add_argument("--iterations", type=int, default=None, help="override the SGD iteration count")
    return ap


def run(cfg: ExperimentConfig, args, name: str) -> dict:
    over = {"seed": args.seed, "output_dir": str(Path(args.out) / name)}
    if args.realizations:
        over["realizations"] = args.realizations
    if args.iterations:
        over["iterations"] = args.iterations
    cfg = replace(cfg, **over)
    res = run_experiment(cfg)
    finals = {k: res.final_mean_error(k) for k in res.aggregates}
    print(f"{name}: " + json.dumps({k: f"{v:.3e}" for k, v in finals.items()}))
    return finals
