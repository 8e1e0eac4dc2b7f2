"""
Sparse containers and the deterministic direct solver
"""

import logging
from typing import Optional, Sequence, Tuple, Union

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from oldroyd_fem.errors import InvalidInputError, SingularMatrixError
from oldroyd_fem.tensor import TOLERANCES

logger = logging.getLogger(__name__)


class SparseMatrix:
    """
    Coordinate-format triplet builder compiled to compressed columns

    Duplicate (row, col) pairs are summed on compile, in insertion order.
    """

    def __init__(self, shape: Tuple[int, int]):
        self.shape = (int(shape[0]), int(shape[1]))
        self._rows: list = []
        self._cols: list = []
        self._vals: list = []

    def add(self, rows, cols, values) -> "SparseMatrix":
        rows = np.asarray(rows, dtype=np.int64).ravel()
        cols = np.asarray(cols, dtype=np.int64).ravel()
        values = np.asarray(values, dtype=float).ravel()
        if not (len(rows) == len(cols) == len(values)):
            raise InvalidInputError("triplet arrays must have equal length")
        if len(rows) and (
            rows.min() < 0 or cols.min() < 0 or rows.max() >= self.shape[0] or cols.max() >= self.shape[1]
        ):
            raise InvalidInputError(f"triplet index outside a {self.shape} matrix")
        if not np.all(np.isfinite(values)):
            raise InvalidInputError("matrix entries must be finite")
        self._rows.append(rows)
        self._cols.append(cols)
        self._vals.append(values)
        return self

    def add_block(self, row_dofs: np.ndarray, col_dofs: np.ndarray, local: np.ndarray) -> "SparseMatrix":
        """Scatter element matrices local[k, i, j] to (row_dofs[k, i], col_dofs[k, j])"""
        row_dofs = np.asarray(row_dofs)
        col_dofs = np.asarray(col_dofs)
        rows = np.broadcast_to(row_dofs[:, :, None], local.shape)
        cols = np.broadcast_to(col_dofs[:, None, :], local.shape)
        return self.add(rows, cols, local)

    def compile(self) -> sp.csc_matrix:
        if self._rows:
            rows = np.concatenate(self._rows)
            cols = np.concatenate(self._cols)
            vals = np.concatenate(self._vals)
        else:
            rows = cols = np.zeros(0, dtype=np.int64)
            vals = np.zeros(0)
        coo = sp.coo_matrix((vals, (rows, cols)), shape=self.shape)
        csc = coo.tocsc()
        csc.sum_duplicates()
        return csc

    @classmethod
    def from_dense(cls, dense) -> "SparseMatrix":
        dense = np.asarray(dense, dtype=float)
        rows, cols = np.nonzero(dense)
        return cls(dense.shape).add(rows, cols, dense[rows, cols])


MatrixLike = Union[SparseMatrix, sp.spmatrix, np.ndarray]


def as_csc(a: MatrixLike) -> sp.csc_matrix:
    if isinstance(a, SparseMatrix):
        return a.compile()
    if sp.issparse(a):
        return sp.csc_matrix(a)
    return sp.csc_matrix(np.asarray(a, dtype=float))


def _deficient_index(a: sp.csc_matrix) -> Optional[int]:
    """First row or column index with no nonzero entry, if any"""
    col_nnz = np.diff(a.indptr)
    empty = np.flatnonzero(col_nnz == 0)
    if len(empty):
        return int(empty[0])
    row_nnz = np.bincount(a.indices[a.data != 0], minlength=a.shape[0])
    empty = np.flatnonzero(row_nnz == 0)
    return int(empty[0]) if len(empty) else None


class Factorization:
    """Sparse LU with partial pivoting and natural column ordering"""

    def __init__(self, a: MatrixLike):
        csc = as_csc(a)
        if csc.shape[0] != csc.shape[1]:
            raise InvalidInputError(f"matrix must be square, got {csc.shape}")
        self.matrix = csc
        try:
            self._lu = splu(csc, permc_spec="NATURAL")
        except RuntimeError as e:
            pivot = _deficient_index(csc)
            raise SingularMatrixError(f"factorization failed: {e} (pivot {pivot})", pivot) from e
        diag = np.abs(self._lu.U.diagonal())
        scale = max(float(np.max(np.abs(csc.data))) if csc.nnz else 0.0, 1.0)
        tiny = np.flatnonzero(diag <= 1e-14 * scale)
        if len(tiny):
            pivot = int(self._lu.perm_c[tiny[0]])
            raise SingularMatrixError(f"numerically singular matrix at pivot {pivot}", pivot)

    @property
    def shape(self) -> Tuple[int, int]:
        return self.matrix.shape

    def solve(self, b: Sequence[float]) -> np.ndarray:
        b = np.asarray(b, dtype=float)
        if b.shape != (self.shape[0],):
            raise InvalidInputError(f"right-hand side has shape {b.shape}, expected ({self.shape[0]},)")
        x = self._lu.solve(b)
        residual = float(np.max(np.abs(self.matrix @ x - b), initial=0.0))
        bound = TOLERANCES.solve_residual * (1.0 + float(np.max(np.abs(b), initial=0.0)))
        if not np.isfinite(residual) or residual > bound:
            worst = int(np.argmax(np.abs(self.matrix @ x - b)))
            raise SingularMatrixError(
                f"solve residual {residual:.3e} exceeds {bound:.3e} (worst row {worst})", worst
            )
        logger.debug("solved %d x %d system, residual %.3e", *self.shape, residual)
        return x


def solve(a: MatrixLike, b: Sequence[float]) -> np.ndarray:
    """x with ||A x - b||_inf <= 1e-11 (1 + ||b||_inf), checked after the solve"""
    return Factorization(a).solve(b)
