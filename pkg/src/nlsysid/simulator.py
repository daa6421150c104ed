"""Ground-truth systems h_{t+1} = phi(A h_t + B u_t) and the data drawn from them."""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

from .activation import Activation, evaluate
from .linalg import haar_orthogonal, min_singular_value, spectral_norm


def as_seed_sequence(seed) -> np.random.SeedSequence:
    if isinstance(seed, np.random.SeedSequence):
        return seed
    if isinstance(seed, np.random.Generator):
        return np.random.SeedSequence(int(seed.integers(0, 2**63)))
    return np.random.SeedSequence(seed)


def as_generator(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


@dataclass(frozen=True, eq=False)
class SystemParams:
    A: np.ndarray
    B: np.ndarray
    act: Activation

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=np.float64))
        B = np.atleast_2d(np.asarray(self.B, dtype=np.float64))
        if A.shape[0] != A.shape[1]:
            raise ValueError(f"A must be square, got {A.shape}")
        if B.shape[0] != A.shape[0]:
            raise ValueError(f"B must have {A.shape[0]} rows, got {B.shape}")
        A.setflags(write=False)
        B.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def p(self) -> int:
        return self.B.shape[1]

    @cached_property
    def a_norm(self) -> float:
        return spectral_norm(self.A)

    @cached_property
    def b_norm(self) -> float:
        return spectral_norm(self.B)

    @cached_property
    def b_min(self) -> float:
        return min_singular_value(self.B)

    def step(self, h, u):
        return evaluate(self.act, self.A @ h + self.B @ u)


@dataclass(frozen=True, eq=False)
class Trajectory:
    """inputs[t] = u_t for t < T, states[t] = h_t for t <= T."""

    inputs: np.ndarray
    states: np.ndarray

    def __len__(self):
        return self.inputs.shape[0]


def gaussian_inputs(p: int, T: int, rng) -> np.ndarray:
    if p < 1 or T < 1:
        raise ValueError("need p >= 1 and T >= 1")
    return as_generator(rng).standard_normal((T, p))


def random_system(n: int, p: int, target_spectral_norm: float, rng, act: Activation) -> SystemParams:
    """A = norm * (Haar orthogonal), B with i.i.d. N(0, 1) entries."""
    if target_spectral_norm < 0:
        raise ValueError("spectral norm must be nonnegative")
    rng = as_generator(rng)
    A = target_spectral_norm * haar_orthogonal(n, rng)
    B = rng.standard_normal((n, p))
    return SystemParams(A, B, act)


def simulate(params: SystemParams, inputs, h0=None) -> Trajectory:
    U = np.atleast_2d(np.asarray(inputs, dtype=np.float64))
    if U.shape[1] != params.p:
        raise ValueError(f"inputs must have {params.p} columns, got {U.shape}")
    if h0 is None:
        h = np.zeros(params.n)
    else:
        h = np.asarray(h0, dtype=np.float64)
        if h.shape != (params.n,):
            raise ValueError(f"h0 must have length {params.n}")
        if np.any(h != 0):
            warnings.warn("nonzero initial state is outside the zero-start setting", stacklevel=2)
    H = np.empty((U.shape[0] + 1, params.n))
    H[0] = h
    for t in range(U.shape[0]):
        H[t + 1] = params.step(H[t], U[t])
    return Trajectory(U, H)


def simulate_batch(params: SystemParams, inputs) -> np.ndarray:
    """Run many independent trajectories from zero.

    inputs has shape (T, M, p); returns states of shape (T + 1, M, n).
    """
    U = np.asarray(inputs, dtype=np.float64)
    T, M, _ = U.shape
    H = np.zeros((T + 1, M, params.n))
    for t in range(T):
        H[t + 1] = evaluate(params.act, H[t] @ params.A.T + U[t] @ params.B.T)
    return H


def truncated_state(params: SystemParams, inputs, t: int, L: int) -> np.ndarray:
    """State at time t when every input older than t - L is replaced by zero."""
    U = np.atleast_2d(np.asarray(inputs, dtype=np.float64))
    if t > U.shape[0]:
        raise ValueError("t exceeds the number of inputs")
    q = np.zeros(params.n)
    zero = np.zeros(params.p)
    for tau in range(t):
        q = params.step(q, zero if tau < t - L else U[tau])
    return q


def subsample(traj: Trajectory, L: int, tau: int):
    """Timestamps (i-1)L + tau <= N, i = 1..N_bar, with their (h, u) pairs.

    N is the last index at which both h_t and u_t exist.
    """
    if L < 1 or not 1 <= tau <= L:
        raise ValueError("need L >= 1 and 1 <= tau <= L")
    N = len(traj) - 1
    idx = np.arange(tau, N + 1, L)
    return idx, traj.states[idx], traj.inputs[idx]


@dataclass(frozen=True, eq=False)
class MultiTrajectorySample:
    """One (h_{T0+1}, h_{T0}, u_{T0}) triple per independent trajectory."""

    y: np.ndarray
    h: np.ndarray
    u: np.ndarray
    T0: int


def trajectory_streams(seed, count: int) -> list[np.random.Generator]:
    return [np.random.default_rng(s) for s in as_seed_sequence(seed).spawn(count)]


def multi_trajectory_sample(params: SystemParams, N: int, T0: int, seed) -> MultiTrajectorySample:
    """Sample N independent zero-start trajectories at time T0.

    Trajectory i draws its inputs from its own child stream of ``seed``, so the
    dataset does not depend on evaluation order.
    """
    if N < 1 or T0 < 1:
        raise ValueError("need N >= 1 and T0 >= 1")
    U = np.stack([g.standard_normal((T0 + 1, params.p)) for g in trajectory_streams(seed, N)], axis=1)
    H = simulate_batch(params, U)
    return MultiTrajectorySample(y=H[T0 + 1], h=H[T0], u=U[T0], T0=T0)


def write_trajectory_csv(traj: Trajectory, f) -> None:
    """One row per t: t, u components (blank at the final state), h components."""
    T, p = traj.inputs.shape
    n = traj.states.shape[1]
    w = csv.writer(f)
    w.writerow(["t"] + [f"u{j}" for j in range(p)] + [f"h{j}" for j in range(n)])
    for t in range(T + 1):
        u = [repr(float(v)) for v in traj.inputs[t]] if t < T else [""] * p
        w.writerow([t] + u + [repr(float(v)) for v in traj.states[t]])


def trajectory_to_csv(traj: Trajectory, path) -> None:
    with open(Path(path), "w", newline="") as f:
        write_trajectory_csv(traj, f)
