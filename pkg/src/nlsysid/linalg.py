import numpy as np


def spectral_norm(M) -> float:
    M = np.atleast_2d(np.asarray(M, dtype=np.float64))
    if M.size == 0:
        return 0.0
    return float(np.linalg.svd(M, compute_uv=False)[0])


def min_singular_value(B) -> float:
    """Smallest singular value of an n x p matrix, counting n of them.

    For p < n the matrix cannot have full row rank, so 0 is returned.
    """
    B = np.atleast_2d(np.asarray(B, dtype=np.float64))
    n, p = B.shape
    if p < n:
        return 0.0
    return float(np.linalg.svd(B, compute_uv=False)[n - 1])


def haar_orthogonal(n: int, rng: np.random.Generator) -> np.ndarray:
    # QR of a Gaussian matrix with the sign of diag(R) folded into Q is Haar.
    G = rng.standard_normal((n, n))
    Q, R = np.linalg.qr(G)
    d = np.sign(np.diag(R))
    d[d == 0] = 1.0
    return Q * d


def power_iteration_norm(M, tol: float = 1e-12, max_iter: int = 10_000, seed: int = 0) -> float:
    """Spectral norm by power iteration on M^T M; a cross-check for ``spectral_norm``."""
    M = np.atleast_2d(np.asarray(M, dtype=np.float64))
    G = M.T @ M
    v = np.random.default_rng(seed).standard_normal(G.shape[0])
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(max_iter):
        w = G @ v
        nrm = np.linalg.norm(w)
        if nrm == 0.0:
            return 0.0
        v = w / nrm
        lam_new = float(v @ G @ v)
        if abs(lam_new - lam) <= tol * max(lam_new, 1e-300):
            lam = lam_new
            break
        lam = lam_new
    return float(np.sqrt(max(lam, 0.0)))
