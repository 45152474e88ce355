"""
Linear solvers for cutfem

Sparse direct factorization with a fill-reducing ordering, a Jacobi
preconditioned conjugate gradient fallback, and power-iteration estimates of
extreme eigenvalues and condition numbers.
"""

import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
import scipy.sparse as sparse
import scipy.sparse.linalg as sparse_linalg

logger = logging.getLogger(__name__)

RESIDUAL_TOLERANCE = 1e-10
BACKWARD_TOLERANCE = 1e-13


class SolverError(RuntimeError):
    """Raised when no method reaches the residual tolerance."""

    def __init__(self, message: str, residual: float):
        self.residual = residual
        super().__init__(f"{message} (relative residual {residual:.3e})")


class ConditionEstimateError(SolverError):
    """Raised when an eigenvalue iteration does not settle."""

    def __init__(self, message: str, residual: float = float('nan')):
        super().__init__(message, residual)


def as_csr(K) -> sparse.csr_matrix:
    """CSR copy with sorted, summed column indices."""
    K = sparse.csr_matrix(K, dtype=float)
    K.sum_duplicates()
    K.sort_indices()
    return K


def is_symmetric(K, rtol: float = 1e-12) -> bool:
    K = as_csr(K)
    scale = abs(K).max() if K.nnz else 0.0
    if scale == 0.0:
        return True
    diff = K - K.T
    return (abs(diff).max() if diff.nnz else 0.0) <= rtol * scale


def _relative_residual(K, x: np.ndarray, b: np.ndarray) -> float:
    norm_b = np.linalg.norm(b)
    r = np.linalg.norm(K @ x - b)
    return r / norm_b if norm_b > 0.0 else r


def backward_error(K, x: np.ndarray, b: np.ndarray) -> float:
    """Normwise backward error ||Kx - b|| / (||K|| ||x|| + ||b||) in the max norm."""
    K = as_csr(K)
    r = np.abs(K @ x - b).max() if len(b) else 0.0
    norm_K = abs(K).sum(axis=1).max() if K.nnz else 0.0
    scale = norm_K * np.abs(x).max(initial=0.0) + np.abs(b).max(initial=0.0)
    return float(r / scale) if scale > 0.0 else float(r)


def acceptable(K, x: np.ndarray, b: np.ndarray) -> Tuple[bool, float]:
    """(accepted, relative residual).

    The relative residual must drop below RESIDUAL_TOLERANCE unless it already
    sits at the rounding floor eps * cond(K), which the backward error detects.
    """
    residual = _relative_residual(K, x, b)
    if not np.all(np.isfinite(x)) or not np.isfinite(residual):
        return False, float('inf')
    if residual < RESIDUAL_TOLERANCE:
        return True, residual
    return backward_error(K, x, b) < BACKWARD_TOLERANCE, residual


class Factorization:
    """Sparse LU of a square matrix, reusable for many right-hand sides."""

    def __init__(self, K):
        self.K = as_csr(K)
        if self.K.shape[0] != self.K.shape[1]:
            raise SolverError(f"Matrix of shape {self.K.shape} is not square", float('nan'))
        options = dict(SymmetricMode=True)
        self._lu = sparse_linalg.splu(self.K.tocsc(), permc_spec="MMD_AT_PLUS_A", options=options)

    @property
    def size(self) -> int:
        return self.K.shape[0]

    def solve(self, b: np.ndarray) -> np.ndarray:
        return self._lu.solve(np.asarray(b, dtype=float))


def factorize(K) -> Factorization:
    try:
        return Factorization(K)
    except RuntimeError as e:
        if isinstance(e, SolverError):
            raise
        raise SolverError(f"Factorization failed: {e}", float('inf'))


def conjugate_gradient(K, b: np.ndarray, x0: Optional[np.ndarray] = None, tol: float = 1e-12,
                       max_iterations: Optional[int] = None) -> Tuple[np.ndarray, int, float]:
    """Jacobi-preconditioned CG; returns (x, iterations, relative residual)."""
    K = as_csr(K)
    b = np.asarray(b, dtype=float)
    n = len(b)
    if max_iterations is None:
        max_iterations = 20 * n
    diag = K.diagonal()
    if np.any(diag <= 0.0):
        raise SolverError("Jacobi preconditioner needs a positive diagonal", float('inf'))
    inv_diag = 1.0 / diag
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    norm_b = np.linalg.norm(b)
    if norm_b == 0.0:
        return np.zeros(n), 0, 0.0
    r = b - K @ x
    z = inv_diag * r
    d = z.copy()
    rz = r @ z
    k = 0
    while np.linalg.norm(r) > tol * norm_b and k < max_iterations:
        Kd = K @ d
        dKd = d @ Kd
        if dKd <= 0.0:
            break
        alpha = rz / dKd
        x += alpha * d
        r -= alpha * Kd
        z = inv_diag * r
        rz_next = r @ z
        d = z + (rz_next / rz) * d
        rz = rz_next
        k += 1
    return x, k, np.linalg.norm(r) / norm_b


def solve(K, b: np.ndarray) -> np.ndarray:
    """Direct solve, falling back to CG when the residual is not small enough."""
    K = as_csr(K)
    b = np.asarray(b, dtype=float)
    if K.shape != (len(b), len(b)):
        raise SolverError(f"Matrix {K.shape} does not match right-hand side of length {len(b)}", float('nan'))
    try:
        factor = Factorization(K)
        x = factor.solve(b)
        # one refinement step with the same factors
        x = x + factor.solve(b - K @ x)
        ok, residual = acceptable(K, x, b)
        if ok:
            logger.debug("direct solve: n=%d, residual=%.2e", len(b), residual)
            return x
        logger.info("direct solve residual %.2e too large, trying CG", residual)
    except RuntimeError as e:
        logger.info("direct factorization failed (%s), trying CG", e)

    x, iterations, _ = conjugate_gradient(K, b)
    ok, residual = acceptable(K, x, b)
    if not ok:
        raise SolverError(f"CG stopped after {iterations} iterations", residual)
    logger.debug("CG solve: n=%d, %d iterations, residual=%.2e", len(b), iterations, residual)
    return x


@dataclass
class ConditionEstimate:
    """Extreme eigenvalue magnitudes and their ratio."""
    lambda_max: float
    lambda_min: float
    cond: float
    iterations: int
    converged: bool


def _power(apply, n: int, iterations: int, rtol: float, rng) -> Tuple[float, int, bool]:
    v = rng.standard_normal(n)
    v /= np.linalg.norm(v)
    estimate = 0.0
    for k in range(1, iterations + 1):
        w = apply(v)
        rayleigh = abs(v @ w)
        norm_w = np.linalg.norm(w)
        if norm_w == 0.0:
            return 0.0, k, True
        v = w / norm_w
        if k > 1 and abs(rayleigh - estimate) <= rtol * abs(rayleigh):
            return rayleigh, k, True
        estimate = rayleigh
    return estimate, iterations, False


def estimate_condition(K, iterations: int = 200, rtol: float = 1e-8, seed: int = 0,
                       strict: bool = True) -> ConditionEstimate:
    """Power iteration on K and on K^-1; eigenvalues are taken by magnitude.

    A singular matrix gives lambda_min = 0 and cond = inf. Without strict, an
    unsettled iteration is returned with converged = False instead of raising.
    """
    K = as_csr(K)
    n = K.shape[0]
    if n == 0:
        raise ConditionEstimateError("Empty matrix")
    rng = np.random.default_rng(seed)
    lam_max, it_max, ok_max = _power(lambda v: K @ v, n, iterations, rtol, rng)
    try:
        factor = Factorization(K)
    except RuntimeError as e:
        logger.debug("condition estimate: matrix is singular (%s)", e)
        return ConditionEstimate(lam_max, 0.0, float('inf'), it_max, ok_max)
    inv_max, it_min, ok_min = _power(factor.solve, n, iterations, rtol, rng)
    converged = ok_max and ok_min
    if not converged:
        if strict:
            raise ConditionEstimateError(f"Power iteration did not converge in {iterations} iterations")
        logger.warning("condition estimate not converged after %d iterations", iterations)
    if inv_max == 0.0 or not np.isfinite(inv_max):
        return ConditionEstimate(lam_max, 0.0, float('inf'), it_max + it_min, converged)
    lam_min = 1.0 / inv_max
    return ConditionEstimate(lam_max, lam_min, lam_max / lam_min, it_max + it_min, converged)


def smallest_eigenvalue(K, iterations: int = 200, rtol: float = 1e-8, seed: int = 0) -> float:
    """Signed eigenvalue nearest zero by inverse iteration (lambda_min for SPD K).

    A singular matrix gives 0.
    """
    K = as_csr(K)
    rng = np.random.default_rng(seed)
    try:
        factor = Factorization(K)
    except RuntimeError:
        return 0.0
    v = rng.standard_normal(K.shape[0])
    v /= np.linalg.norm(v)
    estimate = rayleigh = 0.0
    for k in range(iterations):
        w = factor.solve(v)
        v = w / np.linalg.norm(w)
        rayleigh = float(v @ (K @ v))
        if k and abs(rayleigh - estimate) <= rtol * abs(rayleigh):
            break
        estimate = rayleigh
    return rayleigh
