"""Closed-form bounds and hyperparameter recipes, plus Monte Carlo certification.

Unspecified absolute constants (c, C, c0) default to 1.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import NamedTuple, Optional

import numpy as np

from .simulator import SystemParams, as_seed_sequence, simulate_batch

STABLE = "stable"
ODD = "odd"
UNSTABLE = "unstable"


def geometric_sum(r: float, t: int) -> float:
    """sum_{i=0}^{t-1} r**i, exact at r = 1."""
    if t <= 0:
        return 0.0
    if abs(1.0 - r) < 1e-8:
        return math.fsum(r**i for i in range(t))
    return (1.0 - r**t) / (1.0 - r)


def b_t(a_norm: float, b_norm: float, t) -> float:
    """State-scale bound ||B|| sqrt((1 - ||A||^{2t}) / (1 - ||A||^2)); t may be math.inf."""
    if a_norm < 0 or b_norm < 0:
        raise ValueError("norms must be nonnegative")
    if t == math.inf:
        if a_norm >= 1:
            raise ValueError("B_inf is infinite unless ||A|| < 1")
        return b_norm / math.sqrt(1.0 - a_norm**2)
    t = int(t)
    if t < 0:
        raise ValueError("t must be nonnegative")
    return b_norm * math.sqrt(geometric_sum(a_norm**2, t))


def _require_beta(beta: float) -> None:
    if beta <= 0:
        raise ValueError("theory requires a strictly increasing activation (beta > 0)")


def _require_full_row_rank(params: SystemParams) -> None:
    if params.b_min <= 1e-12 * max(params.b_norm, 1e-300):
        raise ValueError("B must have full row rank (p >= n, min singular value > 0)")


def rho_stable(params: SystemParams) -> float:
    beta = params.act.min_slope
    _require_beta(beta)
    if params.a_norm >= 1:
        raise ValueError("stable condition bound needs ||A|| < 1")
    _require_full_row_rank(params)
    return (params.b_norm / params.b_min) ** 2 / (beta**2 * (1.0 - params.a_norm**2))


def rho_unstable(params: SystemParams, T0: int) -> float:
    """Condition bound for samples taken at time T0 of independent trajectories.

    For n = 1 the extra factor (1 - beta^2 |A|^2) / (1 - (beta |A|)^{2 T0}) is the
    reciprocal of a geometric sum, which is how it is evaluated here.
    """
    beta = params.act.min_slope
    _require_beta(beta)
    if T0 < 1:
        raise ValueError("T0 must be >= 1")
    _require_full_row_rank(params)
    rho_bar = b_t(params.a_norm, params.b_norm, T0) ** 2 / (beta**2 * params.b_min**2)
    if params.n == 1:
        return rho_bar / geometric_sum((beta * params.a_norm) ** 2, T0)
    return rho_bar


def truncation_length(n: int, rho: float, a_norm: float, c: float = 1.0) -> int:
    """ceil(1 - log(c n rho) / log ||A||), never below 2."""
    if a_norm >= 1:
        raise ValueError("truncation length needs ||A|| < 1")
    if c * n * rho < 1:
        raise ValueError("need c * n * rho >= 1")
    if a_norm == 0:
        return 2
    return max(2, math.ceil(1.0 - math.log(c * n * rho) / math.log(a_norm)))


@dataclass(frozen=True)
class AssumptionParams:
    gamma_plus: float
    gamma_minus: float
    theta: float
    L: int

    def __post_init__(self):
        if not self.gamma_plus >= self.gamma_minus > 0:
            raise ValueError("need gamma_plus >= gamma_minus > 0")
        if self.theta < 0:
            raise ValueError("theta must be nonnegative")
        if self.L < 2:
            raise ValueError("L must be > 1")

    @property
    def rho(self) -> float:
        return self.gamma_plus / self.gamma_minus


class Hyperparams(NamedTuple):
    mu: float
    eta: float
    rate: float
    N_min: int


@dataclass
class TheoryReport:
    mode: str
    n: int
    p: int
    a_norm: float
    b_norm: float
    b_min: float
    beta: float
    B_t: dict = field(default_factory=dict)
    B_inf: Optional[float] = None  # None encodes +inf
    rho: float = math.nan
    L: Optional[int] = None
    N_min: int = 0
    mu: float = math.nan
    eta: float = math.nan
    rate: float = math.nan

    def to_dict(self) -> dict:
        d = asdict(self)
        d["B_t"] = {str(k): v for k, v in self.B_t.items()}
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def theoretical_hparams(params: SystemParams, mode: str = STABLE, T0: Optional[int] = None,
                        C: float = 1.0, c0: float = 1.0, c: float = 1.0) -> Hyperparams:
    n, p = params.n, params.p
    beta = params.act.min_slope
    if mode in (STABLE, ODD):
        if mode == ODD and not params.act.is_odd:
            raise ValueError("odd-mode recipe needs an odd activation")
        rho = rho_stable(params)
        L = truncation_length(n, rho, params.a_norm, c)
        mu = 1.0 / b_t(params.a_norm, params.b_norm, math.inf)
        scale = (n + p) if mode == ODD else n * (n + p)
        eta = c0 * beta**2 / (rho * scale)
        rate = 1.0 - c0 * beta**4 / (2.0 * rho**2 * scale)
        N_min = math.ceil(C * L * rho**2 * (n + p))
    elif mode == UNSTABLE:
        if T0 is None:
            raise ValueError("unstable mode needs T0")
        rho = rho_unstable(params, T0)
        # mu = 1/B_T0 (the general-result choice mu = 1/sqrt(gamma_plus) with gamma_plus = B_T0^2)
        mu = 1.0 / b_t(params.a_norm, params.b_norm, T0)
        eta = c0 * beta**2 / (rho * n * (n + p))
        rate = 1.0 - c0 * beta**4 / (2.0 * rho**2 * n * (n + p))
        N_min = math.ceil(C * rho**2 * (n + p))
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return Hyperparams(mu, eta, rate, N_min)


def general_hparams(assume: AssumptionParams, n: int, p: int, beta: float,
                    C: float = 1.0, c0: float = 1.0) -> Hyperparams:
    """Recipe driven directly by (gamma_plus, gamma_minus, theta, L)."""
    _require_beta(beta)
    rho = assume.rho
    k = (assume.theta + math.sqrt(2.0)) ** 2 * (n + p)
    mu = 1.0 / math.sqrt(assume.gamma_plus)
    eta = c0 * beta**2 / (rho * k)
    rate = 1.0 - c0 * beta**4 / (2.0 * rho**2 * k)
    return Hyperparams(mu, eta, rate, math.ceil(C * assume.L * rho**2 * (n + p)))


def theory_report(params: SystemParams, mode: str = STABLE, T0: Optional[int] = None,
                  ts=(1, 10, 100), C: float = 1.0, c0: float = 1.0, c: float = 1.0) -> TheoryReport:
    beta = params.act.min_slope
    rep = TheoryReport(mode=mode, n=params.n, p=params.p, a_norm=params.a_norm,
                       b_norm=params.b_norm, b_min=params.b_min, beta=beta)
    rep.B_t = {int(t): b_t(params.a_norm, params.b_norm, t) for t in ts}
    if params.a_norm < 1:
        rep.B_inf = b_t(params.a_norm, params.b_norm, math.inf)
    hp = theoretical_hparams(params, mode, T0=T0, C=C, c0=c0, c=c)
    if mode == UNSTABLE:
        rep.rho = rho_unstable(params, T0)
    else:
        rep.rho = rho_stable(params)
        rep.L = truncation_length(params.n, rep.rho, params.a_norm, c)
    rep.mu, rep.eta, rep.rate, rep.N_min = hp
    return rep


class DataMatrixCondition(NamedTuple):
    lambda_max: float
    lambda_min: float
    max_row_norm: float


def data_matrix_condition(X) -> DataMatrixCondition:
    """Extreme eigenvalues of X^T X / N and the largest row norm of X."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    N, d = X.shape
    if N < d:
        raise ValueError(f"need at least {d} rows, got {N}")
    ev = np.linalg.eigvalsh(X.T @ X / N)
    return DataMatrixCondition(float(ev[-1]), float(ev[0]), float(np.linalg.norm(X, axis=1).max()))


def empirical_covariance(samples) -> np.ndarray:
    """Mean-centered covariance with 1/N normalization."""
    S = np.asarray(samples, dtype=np.float64)
    if S.ndim == 1:
        S = S[:, None]
    if S.shape[0] < 2:
        raise ValueError("need at least 2 samples")
    Z = S - S.mean(axis=0)
    cov = Z.T @ Z / S.shape[0]
    return (cov + cov.T) / 2.0


@dataclass
class CovarianceCheck:
    t: int
    num_samples: int
    eig_min: float
    eig_max: float
    se_eig: float
    lower_bound: Optional[float]
    upper_bound: float
    mean_norm: float
    mean_tol: float
    miso_bound: Optional[float] = None
    upper_pass: bool = True
    lower_pass: Optional[bool] = None
    miso_pass: Optional[bool] = None
    mean_pass: Optional[bool] = None

    @property
    def tolerance(self) -> float:
        return 3.0 * self.se_eig

    @property
    def passed(self) -> bool:
        flags = (self.upper_pass, self.lower_pass, self.miso_pass, self.mean_pass)
        return all(f for f in flags if f is not None)


def sample_states(params: SystemParams, t: int, num_samples: int, seed, batches: int = 10) -> list[np.ndarray]:
    """h_t from num_samples independent zero-start trajectories, in ``batches`` blocks.

    Each block draws from its own child stream of ``seed``.
    """
    sizes = [num_samples // batches + (i < num_samples % batches) for i in range(batches)]
    out = []
    for size, ss in zip(sizes, as_seed_sequence(seed).spawn(batches)):
        U = np.random.default_rng(ss).standard_normal((t, size, params.p))
        out.append(simulate_batch(params, U)[t])
    return out


def covariance_bounds_check(params: SystemParams, t: int, num_samples: int, seed,
                            batches: int = 10) -> CovarianceCheck:
    """Monte Carlo check of the state covariance against its upper and lower bounds.

    The eigenvalue tolerance is three standard errors of the covariance estimate
    in Frobenius norm, taken from the spread of per-batch covariances. The
    extreme eigenvalues of a degenerate spectrum are biased by about their own
    batch spread, so that spread alone is too tight.
    """
    if num_samples < 1000:
        raise ValueError("need at least 1000 samples")
    blocks = sample_states(params, t, num_samples, seed, batches)
    H = np.concatenate(blocks)
    cov = empirical_covariance(H)
    ev = np.linalg.eigvalsh(cov)
    # Weyl: every eigenvalue moves by at most ||E||_2 <= ||E||_F, E the matrix estimation error
    batch_cov = np.stack([empirical_covariance(b) for b in blocks])
    se_eig = float(np.linalg.norm(batch_cov.std(axis=0, ddof=1)) / math.sqrt(batches))
    mean = H.mean(axis=0)
    mean_se = np.sqrt(np.diag(cov) / H.shape[0])

    beta = params.act.min_slope
    upper = b_t(params.a_norm, params.b_norm, t) ** 2
    rep = CovarianceCheck(
        t=t, num_samples=num_samples, eig_min=float(ev[0]), eig_max=float(ev[-1]), se_eig=se_eig,
        lower_bound=None, upper_bound=upper, mean_norm=float(np.linalg.norm(mean)),
        mean_tol=float(3.0 * np.linalg.norm(mean_se)),
    )
    tol = rep.tolerance
    rep.upper_pass = rep.eig_max <= upper + tol
    if beta > 0 and t >= 1:
        s_min = float(np.linalg.eigvalsh(params.B @ params.B.T)[0])
        rep.lower_bound = beta**2 * max(s_min, 0.0)
        rep.lower_pass = rep.eig_min >= rep.lower_bound - tol
        if params.n == 1:
            rep.miso_bound = beta**2 * params.b_norm**2 * geometric_sum((beta * params.a_norm) ** 2, t)
            rep.miso_pass = rep.eig_min >= rep.miso_bound - tol
    if params.act.is_odd:
        rep.mean_pass = rep.mean_norm <= rep.mean_tol
    return rep
