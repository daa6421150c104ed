"""Independent oracles and checks that certify simulator and learner behaviour.

Deterministic checks use an absolute slack of 1e-9; statistical ones use three
standard errors.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from typing import Optional, Sequence

import numpy as np

from .activation import Activation, evaluate
from .learner import loss_single, sgd_indices, _sgd_steps
from .simulator import (SystemParams, as_generator, as_seed_sequence, gaussian_inputs,
                        simulate, subsample, truncated_state)
from .theory import b_t, data_matrix_condition, sample_states

ATOL = 1e-9


@dataclass
class CheckReport:
    name: str
    observed: object
    bound: object
    tolerance: float
    passed: bool
    samples_used: int
    detail: Optional[dict] = None

    def to_dict(self) -> dict:
        return _jsonable(asdict(self))


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.floating, np.integer, np.bool_)):
        return x.item()
    return x


def reports_json(reports: Sequence[CheckReport]) -> str:
    return json.dumps([r.to_dict() for r in reports], indent=2, sort_keys=True)


def finite_diff_grad(theta, x, y, act: Activation, step: float = 1e-6) -> np.ndarray:
    """Central differences of the per-sample loss, one entry of theta at a time."""
    if step <= 0:
        raise ValueError("step must be positive")
    theta = np.array(theta, dtype=np.float64)
    G = np.empty_like(theta)
    for ij in np.ndindex(*theta.shape):
        old = theta[ij]
        theta[ij] = old + step
        fp = loss_single(theta, x, y, act)
        theta[ij] = old - step
        fm = loss_single(theta, x, y, act)
        theta[ij] = old
        G[ij] = (fp - fm) / (2.0 * step)
    return G


def check_truncation(params: SystemParams, inputs, L: int) -> CheckReport:
    """||h_t - trunc_L(h_t)|| <= ||A||^L ||h_{t-L}|| at every t (and = 0 for t <= L)."""
    traj = simulate(params, inputs)
    T = len(traj)
    worst = -math.inf
    gaps = []
    for t in range(T + 1):
        diff = float(np.linalg.norm(traj.states[t] - truncated_state(params, traj.inputs, t, L)))
        bound = 0.0 if t <= L else params.a_norm**L * float(np.linalg.norm(traj.states[t - L]))
        gaps.append(diff - bound)
        worst = max(worst, diff - bound)
    return CheckReport("truncation", observed=worst, bound=0.0, tolerance=ATOL,
                       passed=worst <= ATOL, samples_used=T + 1, detail={"L": L})


def check_lipschitz_input(params: SystemParams, inputs, tau: int, delta) -> CheckReport:
    """Perturbing u_tau by delta moves h_{t+1} by at most ||A||^{t-tau} ||B|| ||delta||."""
    U = np.array(inputs, dtype=np.float64)
    if not 0 <= tau < U.shape[0]:
        raise ValueError("tau out of range")
    base = simulate(params, U)
    U[tau] = U[tau] + np.asarray(delta, dtype=np.float64)
    pert = simulate(params, U)
    dn = float(np.linalg.norm(delta))
    worst = -math.inf
    for t in range(U.shape[0]):
        diff = float(np.linalg.norm(pert.states[t + 1] - base.states[t + 1]))
        bound = 0.0 if t < tau else params.a_norm ** (t - tau) * params.b_norm * dn
        worst = max(worst, diff - bound)
    return CheckReport("lipschitz_input", observed=worst, bound=0.0, tolerance=ATOL,
                       passed=worst <= ATOL, samples_used=U.shape[0], detail={"tau": tau})


def dependence_window(i: int, L: int, tau: int) -> tuple[int, int]:
    """Input timestamps that the (L-1)-truncated i-th sub-trajectory state can see."""
    return (i - 2) * L + tau + 1, (i - 1) * L + tau - 1


def check_independence_structure(params: SystemParams, L: int, tau: int, trials: int, seed,
                                 length: Optional[int] = None) -> CheckReport:
    """Refresh every input outside a sample's window and require a bit-identical truncated state."""
    if L < 2 or not 1 <= tau <= L:
        raise ValueError("need L >= 2 and 1 <= tau <= L")
    rng = as_generator(seed)
    T = length or 4 * L + tau + 1
    mismatches = 0
    checked = 0
    for _ in range(trials):
        U = gaussian_inputs(params.p, T, rng)
        idx = np.arange(tau, T, L)  # timestamps (i-1)L + tau
        for i, t in enumerate(idx, start=1):
            ref = truncated_state(params, U, int(t), L - 1)
            lo, hi = dependence_window(i, L, tau)
            V = gaussian_inputs(params.p, T, rng)
            keep = np.arange(max(lo, 0), min(hi, T - 1) + 1)
            V[keep] = U[keep]
            mismatches += int(not np.array_equal(ref, truncated_state(params, V, int(t), L - 1)))
            checked += 1
    return CheckReport("independence_structure", observed=mismatches, bound=0, tolerance=0.0,
                       passed=mismatches == 0, samples_used=checked, detail={"L": L, "tau": tau})


@dataclass
class SingleRowProblem:
    X: np.ndarray
    theta: np.ndarray
    act: Activation

    @property
    def y(self) -> np.ndarray:
        return evaluate(self.act, self.X @ self.theta)

    def constants(self):
        """Measured (gamma_plus, gamma_minus, B) of the design."""
        cond = data_matrix_condition(self.X)
        return cond.lambda_max, cond.lambda_min, cond.max_row_norm**2


def random_single_row_problem(dim: int, N: int, act: Activation, seed) -> SingleRowProblem:
    rng = as_generator(seed)
    return SingleRowProblem(rng.standard_normal((N, dim)), rng.standard_normal(dim), act)


def check_rate_bound(problem: SingleRowProblem, runs: int, seed, checkpoints=(10, 100, 1000),
                     theta0=None) -> CheckReport:
    """Average SGD error over independent index sequences vs the contraction bound.

    The step is beta^2 gamma_- / (gamma_+ B) with constants measured on the data.
    """
    beta = problem.act.min_slope
    gp, gm, B = problem.constants()
    if not (beta > 0 and gm > 0):
        return CheckReport("rate_bound", observed=None, bound=None, tolerance=0.0, passed=False,
                           samples_used=0, detail={"error": "needs beta > 0 and a full-rank design"})
    eta = beta**2 * gm / (gp * B)
    factor = 1.0 - beta**4 * gm**2 / (gp * B)
    X = np.ascontiguousarray(problem.X)
    Y = np.ascontiguousarray(problem.y[:, None])
    w0 = np.zeros(X.shape[1]) if theta0 is None else np.asarray(theta0, dtype=np.float64)
    e0 = float(np.sum((w0 - problem.theta) ** 2))
    cps = sorted(checkpoints)
    sq = np.zeros(len(cps))
    for ss in as_seed_sequence(seed).spawn(runs):
        idx = sgd_indices(ss, X.shape[0], cps[-1])
        th = w0.copy()[None, :]
        prev = 0
        for j, c in enumerate(cps):
            _sgd_steps(th, X, Y, idx[prev:c], eta, problem.act.negative_slope)
            sq[j] += float(np.sum((th[0] - problem.theta) ** 2))
            prev = c
    mean = sq / runs
    bound = np.array([e0 * factor**c for c in cps])
    slack = 1.0 + 3.0 / math.sqrt(runs)
    return CheckReport("rate_bound", observed=mean, bound=bound, tolerance=3.0 / math.sqrt(runs),
                       passed=bool(np.all(mean <= bound * slack)), samples_used=runs,
                       detail={"checkpoints": cps, "eta": eta, "gamma_plus": gp,
                               "gamma_minus": gm, "B": B, "factor": factor})


def check_norm_growth(params: SystemParams, t: int, num_samples: int, seed, batches: int = 10) -> CheckReport:
    """E||h_t||^2 <= tr(B B^T) (1 - ||A||^{2t}) / (1 - ||A||^2), up to three standard errors."""
    blocks = sample_states(params, t, num_samples, seed, batches)
    per_batch = np.array([np.mean(np.sum(b * b, axis=1)) for b in blocks])
    est = float(np.mean(np.sum(np.concatenate(blocks) ** 2, axis=1)))
    se = float(per_batch.std(ddof=1) / math.sqrt(batches))
    bound = float(np.trace(params.B @ params.B.T)) * (b_t(params.a_norm, 1.0, t) ** 2)
    return CheckReport("norm_growth", observed=est, bound=bound, tolerance=3.0 * se,
                       passed=est <= bound + 3.0 * se, samples_used=num_samples, detail={"t": t})


def check_merge(params: SystemParams, inputs, L: int, mu: float = 1.0) -> CheckReport:
    """Splitting X into L sub-trajectories: the merged Gram spectrum sits inside the pieces' range."""
    traj = simulate(params, inputs)
    lo, hi = math.inf, -math.inf
    rows = []
    for tau in range(1, L + 1):
        _, H, U = subsample(traj, L, tau)
        Xi = np.hstack([mu * H, U])
        ev = np.linalg.eigvalsh(Xi.T @ Xi / Xi.shape[0])
        lo, hi = min(lo, ev[0]), max(hi, ev[-1])
        rows.append(Xi)
    X = np.vstack(rows)
    ev = np.linalg.eigvalsh(X.T @ X / X.shape[0])
    ok = ev[0] >= lo - ATOL and ev[-1] <= hi + ATOL
    return CheckReport("merge", observed=[float(ev[0]), float(ev[-1])], bound=[float(lo), float(hi)],
                       tolerance=ATOL, passed=bool(ok), samples_used=X.shape[0], detail={"L": L})
