"""
Small dense linear algebra: linear solves, symmetric eigenvalue extremes
and the continuous-time Lyapunov equation.

Matrices here are tiny (state dimensions of a handful), so the Lyapunov
equation is vectorized with Kronecker products and handed to a dense LU.
"""

import logging
import warnings
from typing import Tuple

import numpy as np
from scipy.linalg import LinAlgWarning, eigvalsh, lu_factor, lu_solve

from src.core.exceptions import NotPositiveDefinite, NotSymmetric, SingularMatrix

logger = logging.getLogger(__name__)

PIVOT_RTOL = 1e-12
SYMMETRY_RTOL = 1e-12
LYAPUNOV_RESIDUAL_TOL = 1e-9


def _check_shape(M: np.ndarray, name: str, square: bool = False) -> np.ndarray:
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.ndim != 2:
        raise ValueError(f"{name} must be a 2-D matrix, got shape {M.shape}")
    if square and M.shape[0] != M.shape[1]:
        raise ValueError(f"{name} must be square, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ValueError(f"{name} has non-finite entries")
    return M


def solve_linear(A: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve ``A x = b`` by LU with partial pivoting.

    Raises SingularMatrix when a pivot of U is smaller than 1e-12 times the
    largest entry of A (the largest pivot candidate).
    """
    A = _check_shape(A, "A", square=True)
    b = np.asarray(b, dtype=float)
    if b.shape[0] != A.shape[0]:
        raise ValueError(f"dimension mismatch: A is {A.shape}, b is {b.shape}")

    scale = np.max(np.abs(A)) if A.size else 0.0
    if scale == 0.0:
        raise SingularMatrix("matrix is identically zero")

    with warnings.catch_warnings():
        # exact zero pivots are reported below with our own threshold
        warnings.simplefilter("ignore", LinAlgWarning)
        lu, piv = lu_factor(A, check_finite=False)

    pivots = np.abs(np.diag(lu))
    if np.min(pivots) < PIVOT_RTOL * scale:
        raise SingularMatrix(
            f"pivot {np.min(pivots):.3e} below {PIVOT_RTOL:g} x largest pivot candidate {scale:.3e}"
        )
    return lu_solve((lu, piv), b, check_finite=False)


def symmetrize(S: np.ndarray) -> np.ndarray:
    S = np.asarray(S, dtype=float)
    return 0.5 * (S + S.T)


def sym_eig_extremes(S: np.ndarray) -> Tuple[float, float]:
    """Smallest and largest eigenvalue of a symmetric matrix."""
    S = _check_shape(S, "S", square=True)
    asymmetry = np.max(np.abs(S - S.T))
    if asymmetry > SYMMETRY_RTOL * np.linalg.norm(S, np.inf):
        raise NotSymmetric(f"max |S_ij - S_ji| = {asymmetry:.3e}")

    eigenvalues = eigvalsh(symmetrize(S))
    return float(eigenvalues[0]), float(eigenvalues[-1])


def solve_continuous_lyapunov(A_cl: np.ndarray, Q: np.ndarray) -> np.ndarray:
    """Solve ``A_cl^T P + P A_cl + Q = 0`` for a symmetric positive-definite P.

    vec(A^T P) = (I kron A^T) vec(P) and vec(P A) = (A^T kron I) vec(P),
    with column-major vec.
    """
    A_cl = _check_shape(A_cl, "A_cl", square=True)
    Q = _check_shape(Q, "Q", square=True)
    n = A_cl.shape[0]
    if Q.shape != (n, n):
        raise ValueError(f"Q must be {n}x{n}, got {Q.shape}")

    I = np.eye(n)
    M = np.kron(I, A_cl.T) + np.kron(A_cl.T, I)
    p = solve_linear(M, -Q.reshape(-1, order="F"))
    P = symmetrize(p.reshape((n, n), order="F"))

    lambda_min, _ = sym_eig_extremes(P)
    if lambda_min <= 0.0:
        raise NotPositiveDefinite(f"Lyapunov solution has lambda_min = {lambda_min:.3e}")

    residual = np.linalg.norm(A_cl.T @ P + P @ A_cl + Q, np.inf)
    if residual > LYAPUNOV_RESIDUAL_TOL:
        logger.warning(f"Lyapunov residual {residual:.3e} exceeds {LYAPUNOV_RESIDUAL_TOL:g}")
    logger.debug(f"Lyapunov solve n={n}: residual={residual:.3e}, lambda_min={lambda_min:.6f}")
    return P


def controllability_rank(A: np.ndarray, B: np.ndarray, tol: float = 1e-9) -> int:
    """Rank of [B, AB, ..., A^(n-1) B]."""
    A = _check_shape(A, "A", square=True)
    B = _check_shape(B, "B")
    blocks = [B]
    for _ in range(A.shape[0] - 1):
        blocks.append(A @ blocks[-1])
    return int(np.linalg.matrix_rank(np.hstack(blocks), tol=tol))
