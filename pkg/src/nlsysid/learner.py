"""Regression view of the state equation and the constant-step SGD learner.

With x_t = [mu h_t; u_t], y_t = h_{t+1} and C = [A / mu, B], the dynamics read
y_t = phi(C x_t), which SGD fits by least squares one random sample at a time.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

import numba
import numpy as np

from .activation import Activation, derivative, evaluate
from .simulator import MultiTrajectorySample, Trajectory
from .theory import empirical_covariance
from .linalg import spectral_norm


@dataclass(frozen=True, eq=False)
class RegressionDataset:
    X: np.ndarray  # (N, n + p) rows x_t = [mu h_t; u_t]
    Y: np.ndarray  # (N, n) rows y_t = h_{t+1}
    mu: float
    n: int
    p: int

    def __post_init__(self):
        if self.X.shape != (self.Y.shape[0], self.n + self.p) or self.Y.shape[1] != self.n:
            raise ValueError("inconsistent dataset shapes")

    def __len__(self):
        return self.X.shape[0]


def _stack(h, u, y, mu) -> RegressionDataset:
    if mu <= 0:
        raise ValueError("mu must be positive")
    h = np.asarray(h, dtype=np.float64)
    u = np.asarray(u, dtype=np.float64)
    X = np.ascontiguousarray(np.hstack([mu * h, u]))
    return RegressionDataset(X, np.ascontiguousarray(y, dtype=np.float64), float(mu), h.shape[1], u.shape[1])


def build_dataset(traj: Trajectory, mu: float) -> RegressionDataset:
    """Samples t = 1..N with N = len(inputs) - 1; t = 0 is left out."""
    if len(traj) < 2:
        raise ValueError("trajectory too short: need at least 2 inputs")
    N = len(traj) - 1
    return _stack(traj.states[1:N + 1], traj.inputs[1:N + 1], traj.states[2:N + 2], mu)


def dataset_from_samples(sample: MultiTrajectorySample, mu: float) -> RegressionDataset:
    return _stack(sample.h, sample.u, sample.y, mu)


def encode(A, B, mu: float) -> np.ndarray:
    return np.hstack([np.asarray(A, dtype=np.float64) / mu, np.asarray(B, dtype=np.float64)])


def decode(theta, mu: float, n: Optional[int] = None):
    theta = np.atleast_2d(np.asarray(theta, dtype=np.float64))
    if mu <= 0:
        raise ValueError("mu must be positive")
    n = theta.shape[0] if n is None else n
    return mu * theta[:, :n], theta[:, n:].copy()


def loss(theta, ds: RegressionDataset, act: Activation) -> float:
    R = ds.Y - evaluate(act, ds.X @ np.asarray(theta).T)
    return float(0.5 * np.sum(R * R) / len(ds))


def loss_single(theta, x, y, act: Activation) -> float:
    r = np.asarray(y) - evaluate(act, np.asarray(theta) @ np.asarray(x))
    return float(0.5 * np.sum(r * r))


def grad_single(theta, x, y, act: Activation) -> np.ndarray:
    """Row i: (phi(<theta_i, x>) - y_i) phi'(<theta_i, x>) x^T."""
    x = np.asarray(x, dtype=np.float64)
    z = np.asarray(theta, dtype=np.float64) @ x
    g = (np.atleast_1d(evaluate(act, z)) - y) * np.atleast_1d(derivative(act, z))
    return np.outer(g, x)


def normalized_error(theta_hat, C) -> float:
    C = np.asarray(C, dtype=np.float64)
    den = float(np.sum(C * C))
    if den == 0.0:
        raise ValueError("ground truth is zero")
    D = np.asarray(theta_hat) - C
    return float(np.sum(D * D) / den)


def normalized_loss(theta_hat, ds: RegressionDataset, act: Activation) -> float:
    den = float(np.sum(ds.Y * ds.Y))
    if den == 0.0:
        raise ValueError("all outputs are zero")
    R = ds.Y - evaluate(act, ds.X @ np.asarray(theta_hat).T)
    return float(np.sum(R * R) / den)


def empirical_scaling(h, u) -> float:
    """sqrt(||Sigma_u|| / ||Sigma_h||) from state and input samples."""
    sh = spectral_norm(empirical_covariance(h))
    if sh == 0.0:
        raise ValueError("state covariance is zero")
    return float(np.sqrt(spectral_norm(empirical_covariance(u)) / sh))


def empirical_scaling_traj(traj: Trajectory) -> float:
    N = len(traj) - 1
    return empirical_scaling(traj.states[1:N + 1], traj.inputs[1:N + 1])


@numba.njit(cache=True)
def _sgd_steps(theta, X, Y, idx, eta, neg_slope):
    # in-place constant-step SGD over the index sequence; rows are independent
    n, d = theta.shape
    for k in range(idx.shape[0]):
        j = idx[k]
        for i in range(n):
            z = 0.0
            for l in range(d):
                z += theta[i, l] * X[j, l]
            if z >= 0.0:
                g = z - Y[j, i]
            else:
                g = (neg_slope * z - Y[j, i]) * neg_slope
            if g != 0.0:
                step = eta * g
                for l in range(d):
                    theta[i, l] -= step * X[j, l]


def sgd_steps(theta: np.ndarray, ds: RegressionDataset, idx, eta: float, act: Activation) -> np.ndarray:
    """Apply one SGD update per index in ``idx`` to ``theta`` (modified in place)."""
    _sgd_steps(theta, ds.X, ds.Y, np.asarray(idx, dtype=np.int64), float(eta), act.negative_slope)
    return theta


MuMode = Union[str, float]


@dataclass
class LearnerConfig:
    eta: float = 0.01
    iterations: int = 50_000
    mu_mode: MuMode = "empirical"  # "empirical", "theoretical", or an explicit positive value
    theta0: Optional[np.ndarray] = None
    seed: int = 0
    trace_stride: int = 100

    def __post_init__(self):
        if not self.eta >= 0:
            raise ValueError("eta must be nonnegative")
        if self.iterations < 0:
            raise ValueError("iterations must be nonnegative")
        if self.trace_stride < 1:
            raise ValueError("trace_stride must be >= 1")
        if not isinstance(self.mu_mode, str) and not self.mu_mode > 0:
            raise ValueError("explicit mu must be positive")


@dataclass
class TrainTrace:
    iterations: np.ndarray
    errors: np.ndarray
    losses: np.ndarray
    theta: np.ndarray
    mu: float
    n: int
    extra: dict = field(default_factory=dict)

    @property
    def decoded(self):
        return decode(self.theta, self.mu, self.n)

    @property
    def final_error(self) -> float:
        return float(self.errors[-1])

    def to_csv(self, path) -> None:
        with open(Path(path), "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["iteration", "normalized_error", "normalized_loss"])
            for it, e, l in zip(self.iterations, self.errors, self.losses):
                w.writerow([int(it), repr(float(e)), repr(float(l))])

    def weights_json(self) -> str:
        A_hat, B_hat = self.decoded
        return json.dumps({"mu": self.mu, "A_hat": A_hat.tolist(), "B_hat": B_hat.tolist()}, indent=2)


def sgd_indices(seed, N: int, iterations: int) -> np.ndarray:
    return np.random.default_rng(seed).integers(0, N, size=iterations)


def sgd_train(ds: RegressionDataset, cfg: LearnerConfig, act: Activation,
              truth: Optional[np.ndarray] = None, indices: Optional[np.ndarray] = None) -> TrainTrace:
    """Constant-step SGD with indices drawn uniformly with replacement.

    Metrics are recorded at iteration 0 and every ``trace_stride`` iterations;
    the error column is NaN when no ground truth is given.
    """
    if len(ds) < 1:
        raise ValueError("empty dataset")
    d = ds.n + ds.p
    theta = np.zeros((ds.n, d)) if cfg.theta0 is None else np.array(cfg.theta0, dtype=np.float64)
    if theta.shape != (ds.n, d):
        raise ValueError(f"theta0 must have shape {(ds.n, d)}")
    idx = sgd_indices(cfg.seed, len(ds), cfg.iterations) if indices is None else np.asarray(indices, dtype=np.int64)

    its, errs, losses = [], [], []

    def record(k):
        its.append(k)
        errs.append(normalized_error(theta, truth) if truth is not None else np.nan)
        losses.append(normalized_loss(theta, ds, act))

    record(0)
    s = cfg.trace_stride
    for k in range(s, cfg.iterations + 1, s):
        sgd_steps(theta, ds, idx[k - s:k], cfg.eta, act)
        record(k)
    done = (cfg.iterations // s) * s
    sgd_steps(theta, ds, idx[done:], cfg.eta, act)
    return TrainTrace(np.array(its), np.array(errs), np.array(losses), theta, ds.mu, ds.n)
