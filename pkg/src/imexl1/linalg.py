"""Minimal sparse/dense linear algebra for the FE solver.

Storage is compressed-row (scipy), solves are a banded direct factorization
for 1D systems, conjugate gradients for SPD systems, and BiCGStab with Jacobi
preconditioning for the convection-bearing nonsymmetric systems.  Iterative
solves are always verified by their final residual.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.linalg import solve_banded

__all__ = ["SparseMatrix", "SolveInfo", "SolverFailure", "assemble_from_triplets", "solve"]

DEFAULT_RTOL = 1e-10


class SolverFailure(RuntimeError):
    """Linear solve did not reach the requested residual."""

    def __init__(self, message: str, residual: float):
        super().__init__(message)
        self.residual = residual


@dataclass(frozen=True)
class SolveInfo:
    iterations: int
    residual: float


class SparseMatrix:
    """CSR matrix with sorted, deduplicated columns and finite entries."""

    def __init__(self, csr: sp.csr_matrix):
        csr = sp.csr_matrix(csr)
        csr.sum_duplicates()
        csr.sort_indices()
        if not np.all(np.isfinite(csr.data)):
            raise ValueError("sparse matrix entries must be finite")
        self.csr = csr

    @property
    def n_rows(self) -> int:
        return self.csr.shape[0]

    @property
    def n_cols(self) -> int:
        return self.csr.shape[1]

    @property
    def nnz(self) -> int:
        return self.csr.nnz

    def matvec(self, x: np.ndarray) -> np.ndarray:
        return self.csr @ np.asarray(x, dtype=float)

    __matmul__ = matvec

    def toarray(self) -> np.ndarray:
        return self.csr.toarray()

    def submatrix(self, rows: np.ndarray, cols: np.ndarray) -> "SparseMatrix":
        return SparseMatrix(self.csr[np.ix_(rows, cols)].tocsr())

    def __add__(self, other: "SparseMatrix") -> "SparseMatrix":
        return SparseMatrix((self.csr + other.csr).tocsr())

    def scaled(self, c: float) -> "SparseMatrix":
        return SparseMatrix((c * self.csr).tocsr())

    def diagonal(self) -> np.ndarray:
        return self.csr.diagonal()


def assemble_from_triplets(triplets, shape: tuple[int, int]) -> SparseMatrix:
    """Build a SparseMatrix from (row, col, value) contributions.

    Duplicate (row, col) entries are summed; an empty list gives the zero
    matrix.  ``triplets`` may be a sequence of 3-tuples or a (rows, cols,
    values) triple of arrays.
    """
    if isinstance(triplets, tuple) and len(triplets) == 3:
        rows, cols, vals = (np.asarray(a) for a in triplets)
    else:
        arr = np.asarray(list(triplets), dtype=float)
        if arr.size == 0:
            rows = cols = np.zeros(0, dtype=int)
            vals = np.zeros(0)
        else:
            rows = arr[:, 0].astype(int)
            cols = arr[:, 1].astype(int)
            vals = arr[:, 2]
    n, m = shape
    if rows.size and (rows.min() < 0 or rows.max() >= n or cols.min() < 0 or cols.max() >= m):
        raise IndexError("triplet index out of range")
    return SparseMatrix(sp.csr_matrix((vals.astype(float), (rows, cols)), shape=shape))


def _as_operator(A):
    """Accept SparseMatrix, ndarray, scipy sparse, or LinearOperator."""
    if isinstance(A, SparseMatrix):
        return A.csr
    return A


def _operator_diagonal(A) -> np.ndarray | None:
    if isinstance(A, SparseMatrix):
        return A.diagonal()
    if sp.issparse(A):
        return np.asarray(A.diagonal())
    if isinstance(A, np.ndarray):
        return np.diagonal(A).copy()
    return getattr(A, "diag", None)


def _banded_solve(A: SparseMatrix, rhs: np.ndarray) -> np.ndarray:
    coo = A.csr.tocoo()
    if coo.nnz == 0:
        raise SolverFailure("banded solve on an empty matrix", residual=np.inf)
    lower = int(np.max(coo.row - coo.col, initial=0))
    upper = int(np.max(coo.col - coo.row, initial=0))
    n = A.n_rows
    ab = np.zeros((lower + upper + 1, n))
    ab[upper + coo.row - coo.col, coo.col] = coo.data
    return solve_banded((lower, upper), ab, rhs)


def solve(
    A,
    rhs: np.ndarray,
    hint: str,
    rtol: float = DEFAULT_RTOL,
    return_info: bool = False,
):
    """Solve A x = rhs.

    hint selects the path: "banded" (direct, A must be a SparseMatrix),
    "spd" (conjugate gradients), or "nonsymmetric" (Jacobi-preconditioned
    BiCGStab).  Iterative paths guarantee ||Ax-b|| <= rtol*||b|| or raise
    SolverFailure with the reached residual.
    """
    rhs = np.asarray(rhs, dtype=float)
    n = rhs.shape[0]
    op = _as_operator(A)
    if hint not in ("spd", "nonsymmetric", "banded"):
        raise ValueError(f"unknown solver hint {hint!r}")

    b_norm = float(np.linalg.norm(rhs))
    if b_norm == 0.0:
        x = np.zeros(n)
        return (x, SolveInfo(0, 0.0)) if return_info else x

    if hint == "banded":
        if not isinstance(A, SparseMatrix):
            raise TypeError("banded solve requires a SparseMatrix")
        x = _banded_solve(A, rhs)
        res = float(np.linalg.norm(A.matvec(x) - rhs))
        return (x, SolveInfo(0, res)) if return_info else x

    maxiter = max(10 * n, 50)
    count = {"it": 0}

    def _cb(_):
        count["it"] += 1

    diag = _operator_diagonal(A)
    M = None
    if diag is not None and np.all(np.abs(diag) > 0.0):
        inv = 1.0 / diag
        M = spla.LinearOperator((n, n), matvec=lambda v: inv * v)

    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        if hint == "spd":
            x, info = spla.cg(op, rhs, rtol=rtol, atol=0.0, maxiter=maxiter, M=M, callback=_cb)
        else:
            x, info = spla.bicgstab(op, rhs, rtol=rtol, atol=0.0, maxiter=maxiter, M=M, callback=_cb)

    res = float(np.linalg.norm(_apply(op, x) - rhs))
    if info != 0 or not res <= rtol * b_norm * (1.0 + 1e-12):
        raise SolverFailure(
            f"{hint} solve failed after {count['it']} iterations: "
            f"residual {res:.3e} > {rtol:.1e} * ||b|| = {rtol * b_norm:.3e}",
            residual=res,
        )
    return (x, SolveInfo(count["it"], res)) if return_info else x


def _apply(op, x: np.ndarray) -> np.ndarray:
    if isinstance(op, np.ndarray) or sp.issparse(op):
        return op @ x
    return op.matvec(x)
