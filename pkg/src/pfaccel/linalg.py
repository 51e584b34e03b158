"""Sparse and dense linear algebra used by the assembly and the accelerators.

Sparse matrices are plain :class:`scipy.sparse.csr_matrix` objects with
sorted, duplicate-free column indices. Dense matrices are 2-D numpy arrays.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

__all__ = [
    "SolverError",
    "csr_from_triplets",
    "solve_spd",
    "pcg_jacobi",
    "solve_dense_lstsq",
    "COND_LIMIT",
]

COND_LIMIT = 1.0e10


class SolverError(RuntimeError):
    """Raised when an iterative or direct solve misses its residual target."""

    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (relative residual {residual:.3e})")
        self.residual = residual


def csr_from_triplets(rows, cols, values, n_rows: int, n_cols: int) -> sp.csr_matrix:
    """Build a CSR matrix from coordinate triplets, summing duplicates.

    Raises
    ------
    IndexError
        If any row or column index lies outside the matrix shape.
    """
    rows = np.asarray(rows, dtype=np.int64).ravel()
    cols = np.asarray(cols, dtype=np.int64).ravel()
    values = np.asarray(values, dtype=float).ravel()
    if not (rows.size == cols.size == values.size):
        raise ValueError("triplet arrays must have equal length")
    if rows.size:
        if rows.min() < 0 or rows.max() >= n_rows:
            raise IndexError("row index out of range")
        if cols.min() < 0 or cols.max() >= n_cols:
            raise IndexError("column index out of range")
    A = sp.coo_matrix((values, (rows, cols)), shape=(n_rows, n_cols)).tocsr()
    A.sum_duplicates()
    A.sort_indices()
    return A


def pcg_jacobi(A, b, rel_tol: float = 1e-12, max_iter: int | None = None) -> np.ndarray:
    """Conjugate gradients with a diagonal preconditioner.

    The iteration cap defaults to ``10 * n``.
    """
    A = sp.csr_matrix(A)
    b = np.asarray(b, dtype=float)
    n = b.size
    if max_iter is None:
        max_iter = 10 * n
    bnorm = np.linalg.norm(b)
    x = np.zeros(n)
    if bnorm == 0.0:
        return x
    d = A.diagonal()
    if np.any(d <= 0.0):
        raise SolverError("non-positive diagonal in SPD solve", np.inf)
    inv_d = 1.0 / d
    r = b.copy()
    z = inv_d * r
    p = z.copy()
    rz = r @ z
    target = rel_tol * bnorm
    for _ in range(max_iter):
        Ap = A @ p
        alpha = rz / (p @ Ap)
        x += alpha * p
        r -= alpha * Ap
        if np.linalg.norm(r) <= target:
            # guard against drift of the recursive residual
            if np.linalg.norm(b - A @ x) <= target:
                return x
            r = b - A @ x
        z = inv_d * r
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise SolverError("CG did not converge", np.linalg.norm(b - A @ x) / bnorm)


def solve_spd(A, b, rel_tol: float = 1e-12, method: str = "direct") -> np.ndarray:
    """Solve ``A x = b`` for a symmetric positive definite sparse ``A``.

    Parameters
    ----------
    A : sparse matrix
        SPD after Dirichlet elimination.
    b : array_like
        Right-hand side.
    rel_tol : float
        Required bound on ``||A x - b|| / ||b||``.
    method : {"direct", "cg"}
        ``"direct"`` uses a sparse LU factorisation followed by iterative
        refinement; ``"cg"`` uses Jacobi-preconditioned conjugate gradients.

    Raises
    ------
    SolverError
        If the returned solution misses ``rel_tol``.
    """
    if rel_tol <= 0:
        raise ValueError("rel_tol must be positive")
    b = np.asarray(b, dtype=float)
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return np.zeros_like(b)
    if method == "cg":
        return pcg_jacobi(A, b, rel_tol)
    if method != "direct":
        raise ValueError(f"unknown method {method!r}")
    A = sp.csc_matrix(A)
    lu = spla.splu(A, permc_spec="MMD_AT_PLUS_A")
    x = lu.solve(b)
    res = b - A @ x
    for _ in range(3):
        if np.linalg.norm(res) <= rel_tol * bnorm:
            return x
        x = x + lu.solve(res)
        res = b - A @ x
    rel = np.linalg.norm(res) / bnorm
    if rel <= rel_tol:
        return x
    raise SolverError("direct solve missed tolerance", rel)


def _condition_estimate(R: np.ndarray) -> float:
    d = np.abs(np.diag(R))
    if d.size == 0:
        return 1.0
    if d.min() == 0.0:
        return np.inf
    return d.max() / d.min()


def solve_dense_lstsq(A, b, cond_limit: float = COND_LIMIT) -> tuple[np.ndarray, np.ndarray]:
    """Least-squares solve with greedy dropping of near-collinear columns.

    Columns are admitted left to right. A column is dropped (its coefficient
    set to zero) when adding it pushes the ratio of the largest to smallest
    diagonal magnitude of the Householder ``R`` factor above ``cond_limit``.

    Returns
    -------
    x : ndarray
        Coefficients, zero for dropped columns.
    kept : ndarray of bool
        Mask of admitted columns. ``not kept.any()`` flags full rank deficiency.
    """
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    if A.ndim != 2:
        raise ValueError("A must be 2-D")
    n_rows, n_cols = A.shape
    if n_rows < n_cols:
        raise ValueError("need n_rows >= n_cols")
    kept: list[int] = []
    for j in range(n_cols):
        trial = kept + [j]
        if _condition_estimate(np.linalg.qr(A[:, trial], mode="r")) <= cond_limit:
            kept = trial
    x = np.zeros(n_cols)
    mask = np.zeros(n_cols, dtype=bool)
    if not kept:
        return x, mask
    Q, R = np.linalg.qr(A[:, kept], mode="reduced")
    x[kept] = sla.solve_triangular(R, Q.T @ b)
    mask[kept] = True
    return x, mask
