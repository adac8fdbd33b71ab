"""Sparse SPD matrix storage, deterministic kernels, and Matrix Market I/O.

Matrices are stored in full symmetric CSR form (both triangles). All kernels
are pure functions with a fixed accumulation order, so repeated runs on the
same machine produce bitwise identical results; that reproducibility is a
hard requirement for the rounding-error experiments built on top of them.

Vectors are plain 1-D ``float64`` numpy arrays throughout the package.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Iterable, Union

import numpy as np
import scipy.sparse as _sp

__all__ = [
    "CsrMatrix",
    "MatrixFormatError",
    "as_vector",
    "axpy",
    "dot",
    "gen_laplacian_2d",
    "max_row_nnz",
    "norm2",
    "norm_inf_matrix",
    "read_matrix_market",
    "spmv",
    "write_matrix_market",
]


class MatrixFormatError(ValueError):
    """Raised for malformed or unsupported Matrix Market input."""


@dataclass(frozen=True, eq=False)
class CsrMatrix:
    """Square symmetric matrix in compressed sparse row form.

    Stores the full symmetric matrix (not a single triangle). Arrays are
    frozen after construction and may be shared freely across threads.

    Attributes:
        n: number of rows (= columns).
        row_ptr: int64 offsets, length ``n + 1``.
        col_idx: int64 column indices, sorted strictly increasing per row.
        values: float64 nonzero entries.
        mu: maximum number of nonzeros in any row.
        inf_norm: maximum absolute row sum.
        source_entries: raw triplet count of the file this matrix was read
            from, if any (the stored nnz counts the expanded matrix).
    """

    n: int
    row_ptr: np.ndarray
    col_idx: np.ndarray
    values: np.ndarray
    mu: int
    inf_norm: float
    source_entries: int | None = None
    _csr: _sp.csr_matrix = field(repr=False, default=None)

    @property
    def nnz(self) -> int:
        return int(self.row_ptr[-1])

    @classmethod
    def from_csr_arrays(
        cls,
        row_ptr: Iterable[int],
        col_idx: Iterable[int],
        values: Iterable[float],
        *,
        source_entries: int | None = None,
        validate: bool = True,
    ) -> "CsrMatrix":
        row_ptr = np.ascontiguousarray(row_ptr, dtype=np.int64)
        col_idx = np.ascontiguousarray(col_idx, dtype=np.int64)
        values = np.ascontiguousarray(values, dtype=np.float64)
        n = row_ptr.shape[0] - 1
        if validate:
            _validate_structure(n, row_ptr, col_idx, values)
        csr = _sp.csr_matrix((values, col_idx, row_ptr), shape=(n, n))
        if validate:
            _validate_symmetry(csr)
        mu = int(np.diff(row_ptr).max()) if n > 0 else 0
        inf_norm = _inf_norm_from_arrays(row_ptr, values)
        for arr in (row_ptr, col_idx, values):
            arr.setflags(write=False)
        return cls(n, row_ptr, col_idx, values, mu, inf_norm, source_entries, csr)

    @classmethod
    def from_dense(cls, dense: np.ndarray, *, validate: bool = True) -> "CsrMatrix":
        dense = np.asarray(dense, dtype=np.float64)
        if dense.ndim != 2 or dense.shape[0] != dense.shape[1]:
            raise ValueError(f"expected a square matrix, got shape {dense.shape}")
        csr = _sp.csr_matrix(dense)
        csr.sort_indices()
        return cls.from_csr_arrays(csr.indptr, csr.indices, csr.data, validate=validate)

    def to_dense(self) -> np.ndarray:
        return self._csr.toarray()

    def diagonal(self) -> np.ndarray:
        return self._csr.diagonal()


def _validate_structure(n, row_ptr, col_idx, values) -> None:
    if n < 0 or row_ptr[0] != 0:
        raise ValueError("row_ptr must start at 0")
    if np.any(np.diff(row_ptr) < 0):
        raise ValueError("row_ptr must be nondecreasing")
    nnz = int(row_ptr[-1])
    if col_idx.shape[0] != nnz or values.shape[0] != nnz:
        raise ValueError("col_idx/values length must equal row_ptr[-1]")
    if nnz > 0 and (col_idx.min() < 0 or col_idx.max() >= n):
        raise ValueError("column index out of range")
    # strictly increasing columns within each row
    rows = np.repeat(np.arange(n), np.diff(row_ptr))
    if nnz > 1:
        same_row = rows[1:] == rows[:-1]
        if np.any(same_row & (np.diff(col_idx) <= 0)):
            raise ValueError("column indices must be strictly increasing per row")
    if not np.all(np.isfinite(values)):
        raise ValueError("matrix entries must be finite")


def _validate_symmetry(csr: _sp.csr_matrix) -> None:
    # exact (bitwise) symmetry: same pattern and identical values
    if (csr != csr.T).nnz != 0:
        raise ValueError("matrix is not exactly symmetric")


def _inf_norm_from_arrays(row_ptr, values) -> float:
    n = row_ptr.shape[0] - 1
    if n == 0 or row_ptr[-1] == 0:
        return 0.0
    sums = np.add.reduceat(np.abs(values), row_ptr[:-1])
    sums[np.diff(row_ptr) == 0] = 0.0
    return float(sums.max())


def as_vector(v, n: int | None = None) -> np.ndarray:
    """Validate and convert input to a finite 1-D float64 vector."""
    arr = np.ascontiguousarray(v, dtype=np.float64)
    if arr.ndim != 1:
        raise ValueError(f"expected a 1-D vector, got shape {arr.shape}")
    if n is not None and arr.shape[0] != n:
        raise ValueError(f"dimension mismatch: vector has length {arr.shape[0]}, expected {n}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("vector entries must be finite")
    return arr


# ---------------------------------------------------------------------------
# kernels
# ---------------------------------------------------------------------------

def spmv(A: CsrMatrix, x: np.ndarray) -> np.ndarray:
    """Matrix-vector product y = A x.

    Rows are evaluated independently with left-to-right accumulation over the
    stored entries (the compiled CSR kernel sums each row sequentially in
    index order), so the result is deterministic.
    """
    if x.shape[0] != A.n:
        raise ValueError(f"dimension mismatch: matrix is {A.n}x{A.n}, vector has length {x.shape[0]}")
    return A._csr.dot(x)


def axpy(alpha: float, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Return alpha*x + y."""
    if x.shape != y.shape:
        raise ValueError("dimension mismatch in axpy")
    return alpha * x + y


def dot(x: np.ndarray, y: np.ndarray) -> float:
    if x.shape != y.shape:
        raise ValueError("dimension mismatch in dot")
    return float(np.dot(x, y))


def norm2(x: np.ndarray) -> float:
    return float(np.linalg.norm(x))


def norm_inf_matrix(A: CsrMatrix) -> float:
    """Maximum absolute row sum, recomputed from the raw arrays."""
    return _inf_norm_from_arrays(A.row_ptr, A.values)


def max_row_nnz(A: CsrMatrix) -> int:
    """Maximum number of stored entries in any row, recomputed."""
    if A.n == 0:
        return 0
    return int(np.diff(A.row_ptr).max())


# ---------------------------------------------------------------------------
# model problem
# ---------------------------------------------------------------------------

def gen_laplacian_2d(nx: int, ny: int) -> CsrMatrix:
    """Five-point Laplacian on an nx-by-ny grid with Dirichlet boundaries.

    Diagonal entries are 4, grid-neighbor entries are -1, and there is no
    wraparound, so the matrix is symmetric positive definite.
    """
    if nx < 1 or ny < 1:
        raise ValueError(f"grid dimensions must be positive, got {nx}x{ny}")
    tx = _sp.diags([-1.0, 2.0, -1.0], [-1, 0, 1], shape=(nx, nx))
    ty = _sp.diags([-1.0, 2.0, -1.0], [-1, 0, 1], shape=(ny, ny))
    A = _sp.kron(_sp.identity(ny), tx, format="csr") + _sp.kron(ty, _sp.identity(nx), format="csr")
    A = A.tocsr()
    A.sum_duplicates()
    A.sort_indices()
    return CsrMatrix.from_csr_arrays(A.indptr, A.indices, A.data, validate=False)


# ---------------------------------------------------------------------------
# Matrix Market coordinate format
# ---------------------------------------------------------------------------

_SUPPORTED_FIELDS = ("real", "integer")
_SUPPORTED_SYMMETRY = ("symmetric", "general")


def read_matrix_market(source: Union[str, Path, IO[str]]) -> CsrMatrix:
    """Read a symmetric matrix in Matrix Market coordinate form.

    Accepts a path or an open text stream. Symmetric files store one
    triangle (lower or upper) and are expanded to full storage; 'general'
    files are accepted only when the assembled matrix is exactly symmetric.
    Comment lines start with '%'; blank lines are ignored.
    """
    if hasattr(source, "read"):
        return _read_mm_stream(source)
    with open(source, "r", encoding="utf-8") as fh:
        return _read_mm_stream(fh)


def _read_mm_stream(stream: IO[str]) -> CsrMatrix:
    header = stream.readline()
    if not header.startswith("%%MatrixMarket"):
        raise MatrixFormatError("missing %%MatrixMarket header")
    tokens = header.strip().split()
    if len(tokens) < 5:
        raise MatrixFormatError(f"incomplete header: {header.strip()!r}")
    obj, fmt, fld, sym = (t.lower() for t in tokens[1:5])
    if obj != "matrix":
        raise MatrixFormatError(f"unsupported object {obj!r}")
    if fmt != "coordinate":
        raise MatrixFormatError(f"unsupported format {fmt!r} (only 'coordinate' is supported)")
    if fld not in _SUPPORTED_FIELDS:
        raise MatrixFormatError(f"unsupported field qualifier {fld!r}")
    if sym not in _SUPPORTED_SYMMETRY:
        raise MatrixFormatError(f"unsupported symmetry qualifier {sym!r}")

    size_line = None
    lineno = 1
    for line in stream:
        lineno += 1
        text = line.strip()
        if not text or text.startswith("%"):
            continue
        size_line = text
        break
    if size_line is None:
        raise MatrixFormatError("missing size line")
    parts = size_line.split()
    if len(parts) != 3:
        raise MatrixFormatError(f"line {lineno}: malformed size line {size_line!r}")
    nrows, ncols, nent = (int(p) for p in parts)
    if nrows != ncols:
        raise MatrixFormatError(f"matrix must be square, got {nrows}x{ncols}")
    n = nrows

    rows = np.empty(2 * nent, dtype=np.int64)
    cols = np.empty(2 * nent, dtype=np.int64)
    vals = np.empty(2 * nent, dtype=np.float64)
    lines = np.empty(2 * nent, dtype=np.int64)
    k = 0
    seen = 0
    for line in stream:
        lineno += 1
        text = line.strip()
        if not text or text.startswith("%"):
            continue
        parts = text.split()
        if len(parts) != 3:
            raise MatrixFormatError(f"line {lineno}: expected 'i j value', got {text!r}")
        i, j = int(parts[0]), int(parts[1])
        v = float(parts[2])
        if not (1 <= i <= n) or not (1 <= j <= n):
            raise MatrixFormatError(f"line {lineno}: index ({i}, {j}) out of range for n={n}")
        if not np.isfinite(v):
            raise MatrixFormatError(f"line {lineno}: nonfinite value {parts[2]!r}")
        rows[k], cols[k], vals[k], lines[k] = i - 1, j - 1, v, lineno
        k += 1
        if sym == "symmetric" and i != j:
            rows[k], cols[k], vals[k], lines[k] = j - 1, i - 1, v, lineno
            k += 1
        seen += 1
    if seen != nent:
        raise MatrixFormatError(f"expected {nent} entries, found {seen}")

    rows, cols, vals, lines = rows[:k], cols[:k], vals[:k], lines[:k]
    order = np.lexsort((cols, rows))
    rows, cols, vals, lines = rows[order], cols[order], vals[order], lines[order]
    if k > 1:
        dup = (rows[1:] == rows[:-1]) & (cols[1:] == cols[:-1])
        if np.any(dup):
            d = int(np.argmax(dup)) + 1
            raise MatrixFormatError(
                f"line {lines[d]}: duplicate entry ({rows[d] + 1}, {cols[d] + 1})"
            )

    row_ptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(rows, minlength=n), out=row_ptr[1:])
    try:
        return CsrMatrix.from_csr_arrays(row_ptr, cols, vals, source_entries=nent)
    except ValueError as exc:
        if sym == "general" and "symmetric" in str(exc):
            raise MatrixFormatError("qualifier 'general' with an asymmetric matrix") from exc
        raise


def write_matrix_market(A: CsrMatrix, target: Union[str, Path, IO[str]], comment: str | None = None) -> None:
    """Write the lower triangle of A in Matrix Market coordinate form.

    Values are written with shortest round-trip formatting so that a
    read-after-write reproduces the CSR arrays exactly.
    """
    if hasattr(target, "write"):
        _write_mm_stream(A, target, comment)
        return
    with open(target, "w", encoding="utf-8") as fh:
        _write_mm_stream(A, fh, comment)


def _write_mm_stream(A: CsrMatrix, stream: IO[str], comment: str | None) -> None:
    stream.write("%%MatrixMarket matrix coordinate real symmetric\n")
    if comment:
        for line in comment.splitlines():
            stream.write(f"% {line}\n")
    rows = np.repeat(np.arange(A.n), np.diff(A.row_ptr))
    keep = A.col_idx <= rows
    ri, ci, vi = rows[keep], A.col_idx[keep], A.values[keep]
    stream.write(f"{A.n} {A.n} {len(vi)}\n")
    for i, j, v in zip(ri, ci, vi):
        stream.write(f"{i + 1} {j + 1} {float(v)!r}\n")
