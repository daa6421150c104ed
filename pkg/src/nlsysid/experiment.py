"""Multi-realization SGD experiments with CSV/JSON output.

Seeding: realization r uses SeedSequence(seed, spawn_key=(r,)), whose three
children drive (system draw, inputs, SGD indices). Every activation in a sweep
sees the same system, inputs and index sequence for a given realization, and
results do not depend on the order realizations are run in.
"""

from __future__ import annotations

import csv
import json
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Union

import numpy as np

from .activation import Activation, parse
from .learner import (LearnerConfig, TrainTrace, build_dataset,
                      dataset_from_samples, empirical_scaling, encode,
                      normalized_error, normalized_loss, sgd_indices, sgd_train)
from .simulator import gaussian_inputs, multi_trajectory_sample, random_system, simulate
from .theory import STABLE, UNSTABLE, b_t, theoretical_hparams

CSV_HEADER = ["iteration", "mean_error", "std_error", "mean_loss", "std_loss"]

__all__ = ["ExperimentConfig", "ExperimentResult", "run_experiment", "run_realization",
           "realization_data", "normalized_error", "normalized_loss", "aggregate", "smooth",
           "write_outputs"]


@dataclass
class ExperimentConfig:
    n: int = 50
    p: int = 100
    N: int = 500
    a_norm: float = 0.8
    activations: list = field(default_factory=lambda: [{"kind": "leaky_relu", "beta": 0.5}])
    eta: Union[float, str] = 0.01  # a number, or "theory" for the halving recipe
    iterations: int = 50_000
    realizations: int = 20
    seed: int = 0
    mu_mode: Union[str, float] = "empirical"
    trace_stride: int = 100
    output_dir: Optional[str] = None
    sampling: str = "single"  # "single" trajectory or "multi" independent trajectories
    T0: int = 1
    c0: float = 1.0

    def __post_init__(self):
        for name in ("n", "p", "N", "iterations", "realizations", "trace_stride", "T0"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be positive")
        if self.a_norm < 0:
            raise ValueError("a_norm must be nonnegative")
        if not self.activations:
            raise ValueError("need at least one activation")
        if self.sampling not in ("single", "multi"):
            raise ValueError("sampling must be 'single' or 'multi'")
        if isinstance(self.eta, str) and self.eta != "theory":
            raise ValueError("eta must be a number or 'theory'")
        if not isinstance(self.eta, str) and not self.eta > 0:
            raise ValueError("eta must be positive")
        self.activations = [parse(a).to_dict() for a in self.activations]

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        with open(path) as f:
            return cls(**json.load(f))

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    traces: dict  # label -> list[TrainTrace]
    aggregates: dict  # label -> dict of arrays
    timings: dict  # label -> list of seconds

    def final_mean_error(self, label: str) -> float:
        return float(self.aggregates[label]["mean_error"][-1])

    def final_errors(self, label: str) -> np.ndarray:
        return np.array([t.final_error for t in self.traces[label]])


def realization_seeds(seed: int, r: int):
    return np.random.SeedSequence(seed, spawn_key=(r,)).spawn(3)


def _resolve_mu(cfg: ExperimentConfig, params, h, u) -> float:
    if cfg.mu_mode == "empirical":
        return empirical_scaling(h, u)
    if cfg.mu_mode == "theoretical":
        t = cfg.T0 if cfg.sampling == "multi" else math.inf
        return 1.0 / b_t(params.a_norm, params.b_norm, t)
    return float(cfg.mu_mode)


def _stable(trace: TrainTrace) -> bool:
    vals = np.concatenate([trace.errors, trace.losses, trace.theta.ravel()])
    return bool(np.all(np.isfinite(vals)) and np.max(trace.losses) <= trace.losses[0])


def realization_data(cfg: ExperimentConfig, act: Activation, r: int):
    """System, regression dataset and SGD index sequence of realization r."""
    sys_ss, in_ss, sgd_ss = realization_seeds(cfg.seed, r)
    params = random_system(cfg.n, cfg.p, cfg.a_norm, np.random.default_rng(sys_ss), act)
    if cfg.sampling == "single":
        traj = simulate(params, gaussian_inputs(cfg.p, cfg.N + 1, np.random.default_rng(in_ss)))
        mu = _resolve_mu(cfg, params, traj.states[1:cfg.N + 1], traj.inputs[1:cfg.N + 1])
        ds = build_dataset(traj, mu)
    else:
        sample = multi_trajectory_sample(params, cfg.N, cfg.T0, in_ss)
        mu = _resolve_mu(cfg, params, sample.h, sample.u)
        ds = dataset_from_samples(sample, mu)
    return params, ds, sgd_indices(sgd_ss, len(ds), cfg.iterations)


def run_realization(cfg: ExperimentConfig, act: Activation, r: int) -> TrainTrace:
    params, ds, idx = realization_data(cfg, act, r)
    mu = ds.mu
    truth = encode(params.A, params.B, mu)

    if cfg.eta == "theory":
        mode = UNSTABLE if cfg.sampling == "multi" else STABLE
        eta = theoretical_hparams(params, mode, T0=cfg.T0, c0=cfg.c0).eta
        for _ in range(60):
            trace = sgd_train(ds, LearnerConfig(eta, cfg.iterations, mu, trace_stride=cfg.trace_stride),
                              act, truth, indices=idx)
            if _stable(trace):
                break
            eta /= 2.0
    else:
        eta = float(cfg.eta)
        trace = sgd_train(ds, LearnerConfig(eta, cfg.iterations, mu, trace_stride=cfg.trace_stride),
                          act, truth, indices=idx)
    trace.extra.update(eta=eta, realization=r)
    return trace


def aggregate(traces: list[TrainTrace]) -> dict:
    """Welford mean/std across realizations; identical traces give std exactly 0."""
    mean_e = np.zeros_like(traces[0].errors)
    mean_l = np.zeros_like(traces[0].losses)
    m2_e = np.zeros_like(mean_e)
    m2_l = np.zeros_like(mean_l)
    for k, tr in enumerate(traces, start=1):
        de = tr.errors - mean_e
        mean_e = mean_e + de / k
        m2_e = m2_e + de * (tr.errors - mean_e)
        dl = tr.losses - mean_l
        mean_l = mean_l + dl / k
        m2_l = m2_l + dl * (tr.losses - mean_l)
    k = len(traces)
    return {
        "iteration": traces[0].iterations.copy(),
        "mean_error": mean_e,
        "std_error": np.sqrt(np.maximum(m2_e / k, 0.0)),
        "mean_loss": mean_l,
        "std_loss": np.sqrt(np.maximum(m2_l / k, 0.0)),
    }


def smooth(series, window: int = 10) -> np.ndarray:
    """Trailing moving average over ``window`` consecutive records."""
    s = np.asarray(series, dtype=np.float64)
    if s.size < window:
        return s.copy()
    c = np.cumsum(np.insert(s, 0, 0.0))
    return (c[window:] - c[:-window]) / window


def run_experiment(cfg: ExperimentConfig, write: bool = True) -> ExperimentResult:
    traces, aggs, timings = {}, {}, {}
    for desc in cfg.activations:
        act = parse(desc)
        label = act.label()
        runs, secs = [], []
        for r in range(cfg.realizations):
            t0 = time.perf_counter()
            runs.append(run_realization(cfg, act, r))
            secs.append(time.perf_counter() - t0)
        traces[label] = runs
        aggs[label] = aggregate(runs)
        timings[label] = secs
    result = ExperimentResult(cfg, traces, aggs, timings)
    if write and cfg.output_dir:
        write_outputs(result, cfg.output_dir)
    return result


def write_outputs(result: ExperimentResult, out_dir) -> None:
    """Per-activation aggregate CSVs and summary.json; wall-clock goes to timing.json."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    summary = {"config": result.config.to_dict(), "activations": {}}
    for label, agg in result.aggregates.items():
        with open(out / f"{label}.csv", "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(CSV_HEADER)
            for row in zip(*(agg[k] for k in ["iteration", "mean_error", "std_error", "mean_loss", "std_loss"])):
                w.writerow([int(row[0])] + [repr(float(v)) for v in row[1:]])
        finals = result.final_errors(label)
        summary["activations"][label] = {
            "final_mean_error": float(agg["mean_error"][-1]),
            "final_std_error": float(agg["std_error"][-1]),
            "final_mean_loss": float(agg["mean_loss"][-1]),
            "final_errors": [float(v) for v in finals],
            "eta": [float(t.extra["eta"]) for t in result.traces[label]],
        }
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    timing = {label: {"per_run_seconds": secs, "total_seconds": sum(secs)} for label, secs in result.timings.items()}
    (out / "timing.json").write_text(json.dumps(timing, indent=2, sort_keys=True) + "\n")
