"""Dense positive-definite linear algebra for small dimensions.

Everything operates on float64 numpy arrays. Matrices are kept dense and
row-major; the toolkit targets context dimensions far below 128, where a
Sherman-Morrison update of the maintained inverse beats any factored or
sparse scheme.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

# Hard cap on matrix dimension, enforced when states are created.
MAX_DIM = 128

# The maintained inverse is rebuilt from the matrix itself every this many
# rank-1 updates, which keeps Sherman-Morrison drift below 1e-6 over 1e5
# updates at dimensions up to 32.
REFRESH_INTERVAL = 1000


class NotPositiveDefiniteError(ArithmeticError):
    """Cholesky factorization hit a nonpositive pivot.

    ``pivot`` is the 0-based index of the failing diagonal entry.
    """

    def __init__(self, pivot: int, value: float):
        self.pivot = pivot
        self.value = value
        super().__init__(
            f"matrix is not positive definite: pivot {pivot} = {value:.6g}"
        )


def cholesky(m: np.ndarray) -> np.ndarray:
    """Lower-triangular factor L with L @ L.T equal to the symmetric input.

    Uses the LAPACK path when it succeeds; on failure, falls back to an
    explicit column sweep so the error can name the offending pivot.
    """
    a = np.asarray(m, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    try:
        return np.linalg.cholesky(a)
    except np.linalg.LinAlgError:
        return _cholesky_by_column(a)


def _cholesky_by_column(a: np.ndarray) -> np.ndarray:
    n = a.shape[0]
    low = np.zeros((n, n))
    for j in range(n):
        pivot = a[j, j] - low[j, :j] @ low[j, :j]
        if not pivot > 0.0:  # also rejects NaN
            raise NotPositiveDefiniteError(j, float(pivot))
        low[j, j] = np.sqrt(pivot)
        if j + 1 < n:
            low[j + 1 :, j] = (a[j + 1 :, j] - low[j + 1 :, :j] @ low[j, :j]) / low[j, j]
    return low


def sample_mvn(mean: np.ndarray, cov: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """One multivariate normal draw, mean + L z with L the Cholesky factor.

    An exactly-zero covariance is treated as the degenerate point mass at
    the mean; anything else must be positive definite.
    """
    mean = np.asarray(mean, dtype=np.float64)
    cov = np.asarray(cov, dtype=np.float64)
    if not cov.any():
        return mean.copy()
    low = cholesky(cov)
    return mean + low @ rng.standard_normal(mean.shape[0])


@dataclass
class PsdState:
    """A positive definite matrix maintained jointly with its inverse.

    The matrix only ever grows by positive rank-1 terms, so its smallest
    eigenvalue never drops below the ridge it was initialized with. The
    inverse is updated in O(d^2) per step via Sherman-Morrison and rebuilt
    from scratch every REFRESH_INTERVAL updates.
    """

    dim: int
    mat: np.ndarray
    inv: np.ndarray
    update_count: int = 0

    def rank1_update(self, x: np.ndarray) -> None:
        """Add x x^T to the matrix and downdate the inverse accordingly."""
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.dim,):
            raise ValueError(f"expected a vector of length {self.dim}, got shape {x.shape}")
        self.mat += x[:, None] * x
        z = self.inv @ x
        self.inv -= z[:, None] * (z / (1.0 + float(x @ z)))
        self.update_count += 1
        if self.update_count % REFRESH_INTERVAL == 0:
            self._refresh_inverse()

    def mahalanobis_sq(self, v: np.ndarray) -> float:
        """Quadratic form v^T inv v, clipped at zero against roundoff."""
        v = np.asarray(v, dtype=np.float64)
        if v.shape != (self.dim,):
            raise ValueError(f"expected a vector of length {self.dim}, got shape {v.shape}")
        q = float(v @ self.inv @ v)
        return q if q > 0.0 else 0.0

    def _refresh_inverse(self) -> None:
        low = cholesky(self.mat)
        eye = np.eye(self.dim)
        half = solve_triangular(low, eye, lower=True)
        inv = solve_triangular(low.T, half, lower=False)
        self.inv = (inv + inv.T) / 2.0


def psd_init(dim: int, ridge: float) -> PsdState:
    """Fresh state at ridge * identity, with the exact inverse."""
    if not isinstance(dim, (int, np.integer)) or dim < 1:
        raise ValueError(f"dim must be a positive integer, got {dim!r}")
    if dim > MAX_DIM:
        raise ValueError(f"dim {dim} exceeds the supported maximum {MAX_DIM}")
    if not ridge > 0.0:
        raise ValueError(f"ridge must be positive, got {ridge!r}")
    mat = np.eye(dim) * float(ridge)
    inv = np.eye(dim) / float(ridge)
    return PsdState(dim=int(dim), mat=mat, inv=inv)
