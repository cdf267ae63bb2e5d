"""Sparse storage and linear solvers.

All assembled operators are canonical scipy CSR matrices (sorted column
indices, duplicates summed). The solvers wrap scipy with explicit residual
contracts and raise SolverError instead of returning silently bad vectors.
"""
from dataclasses import dataclass
from typing import Iterable, Literal, Optional, Tuple
import logging

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import bicgstab, cg, splu

logger = logging.getLogger(__name__)

SparseMatrix = sp.csr_matrix

DEFAULT_TOL = 1e-10


@dataclass(frozen=True)
class SolveReport:
    iterations: int       # 0 for direct solves
    residual: float       # ||Ax - b|| / ||b|| (absolute when b = 0)
    converged: bool
    method: str = "cg"


class SolverError(Exception):
    """Raised when a linear solve cannot meet its residual contract."""

    def __init__(self, msg: str, report: SolveReport, kind: str = "not_converged"):
        self.report = report
        self.kind = kind
        super().__init__(msg)


def from_triplets(rows: int, cols: int, entries: Iterable[Tuple[int, int, float]]) -> SparseMatrix:
    """Build a canonical CSR matrix from (i, j, value) triplets, summing duplicates."""
    entries = list(entries)
    if entries:
        i, j, v = (np.asarray(a) for a in zip(*entries))
    else:
        i = j = np.zeros(0, dtype=np.int64)
        v = np.zeros(0)
    return from_arrays(rows, cols, i, j, v)


def from_arrays(rows: int, cols: int, i, j, values) -> SparseMatrix:
    """Array form of from_triplets used by the vectorised assembly loops."""
    i = np.asarray(i, dtype=np.int64).ravel()
    j = np.asarray(j, dtype=np.int64).ravel()
    values = np.asarray(values, dtype=float).ravel()
    if i.size and (i.min() < 0 or i.max() >= rows or j.min() < 0 or j.max() >= cols):
        raise ValueError(f"Triplet index out of range for a {rows}x{cols} matrix")
    # Sort by (row, col) first so the summation order of duplicates is fixed.
    order = np.lexsort((j, i))
    A = sp.coo_matrix((values[order], (i[order], j[order])), shape=(rows, cols)).tocsr()
    A.sum_duplicates()
    A.sort_indices()
    return A


def spmv(A: SparseMatrix, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.shape[0] != A.shape[1]:
        raise ValueError(f"Dimension mismatch: matrix is {A.shape}, vector has shape {x.shape}")
    return A @ x


def _relative_residual(A, x, b) -> float:
    r = np.linalg.norm(A @ x - b)
    bnorm = np.linalg.norm(b)
    return float(r / bnorm) if bnorm > 0 else float(r)


def solve_spd(A: SparseMatrix, b, tol: float = DEFAULT_TOL, max_iter: Optional[int] = None) -> Tuple[np.ndarray, SolveReport]:
    """Unpreconditioned conjugate gradients for symmetric positive definite A."""
    b = np.asarray(b, dtype=float)
    if b.shape != (A.shape[0],):
        raise ValueError(f"Right-hand side of shape {b.shape} does not match {A.shape}")
    if not np.any(b):
        return np.zeros_like(b), SolveReport(iterations=0, residual=0.0, converged=True, method="cg")
    if max_iter is None:
        max_iter = 10 * A.shape[0]

    iterations = 0

    def _count(_):
        nonlocal iterations
        iterations += 1

    x = np.zeros_like(b)
    residual = np.inf
    # scipy stops on the recursively updated residual; restart from the
    # current iterate until the true residual meets the contract as well.
    for _ in range(3):
        x, info = cg(A, b, x0=x, rtol=0.5 * tol, atol=0.0, maxiter=max_iter, callback=_count)
        residual = _relative_residual(A, x, b)
        if residual <= tol:
            break
        if info < 0:
            break
    report = SolveReport(iterations=iterations, residual=residual, converged=residual <= tol, method="cg")
    if not report.converged:
        raise SolverError(
            f"CG did not reach tol={tol} within {max_iter} iterations (residual {residual:.3e})",
            report,
        )
    logger.debug(f"[SOLVE] cg n={A.shape[0]} iterations={iterations} residual={residual:.2e}")
    return x, report


def solve_general(
    A: SparseMatrix,
    b,
    tol: float = DEFAULT_TOL,
    max_iter: Optional[int] = None,
    method: Literal["lu", "bicgstab"] = "lu",
) -> Tuple[np.ndarray, SolveReport]:
    """Solve a square nonsymmetric system, by sparse LU (default) or BiCGSTAB."""
    b = np.asarray(b, dtype=float)
    if A.shape[0] != A.shape[1]:
        raise ValueError(f"solve_general needs a square matrix, got {A.shape}")
    if b.shape != (A.shape[0],):
        raise ValueError(f"Right-hand side of shape {b.shape} does not match {A.shape}")

    if method == "lu":
        try:
            lu = splu(sp.csc_matrix(A), permc_spec="COLAMD")
        except RuntimeError as e:
            report = SolveReport(iterations=0, residual=np.inf, converged=False, method="lu")
            raise SolverError(f"Sparse LU failed: {e}", report, kind="singular") from e
        x = lu.solve(b)
        iterations = 0
    elif method == "bicgstab":
        iterations = 0

        def _count(_):
            nonlocal iterations
            iterations += 1

        x, _ = bicgstab(A, b, rtol=0.5 * tol, atol=0.0, maxiter=max_iter or 10 * A.shape[0], callback=_count)
    else:
        raise ValueError(f"Unknown method: {method}. Available: ['lu', 'bicgstab']")

    if not np.all(np.isfinite(x)):
        report = SolveReport(iterations=iterations, residual=np.inf, converged=False, method=method)
        raise SolverError("Solution contains non-finite values", report, kind="non_finite")
    residual = _relative_residual(A, x, b)
    report = SolveReport(iterations=iterations, residual=residual, converged=residual <= tol, method=method)
    if not report.converged:
        kind = "singular" if method == "lu" else "not_converged"
        raise SolverError(f"{method} residual {residual:.3e} exceeds tol={tol}", report, kind=kind)
    logger.debug(f"[SOLVE] {method} n={A.shape[0]} residual={residual:.2e}")
    return x, report
