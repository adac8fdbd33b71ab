"""Preconditioners used by the benchmark suite: identity, Jacobi, IC(0).

The incomplete Cholesky factor is built with zero fill on the lower-triangle
pattern of A, optionally from the shifted matrix A + eta*diag(diag(A)) (or
A + eta*I). Jacobi and identity expose an explicit inverse, which the
rounding-error model exploits; IC(0) is applied through triangular solves
and is flagged as implicit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .sparse import CsrMatrix

__all__ = [
    "Preconditioner",
    "PreconditionerError",
    "apply",
    "icc0_build",
    "identity",
    "jacobi_build",
]


class PreconditionerError(ValueError):
    """Raised when a preconditioner cannot be built or applied."""


@dataclass(frozen=True, eq=False)
class Preconditioner:
    """Linear SPD operator r -> M^{-1} r.

    ``mode`` is "explicit" when the inverse operator exists entrywise
    (identity, Jacobi) and "implicit" when it is only available through
    solves (IC(0)). Explicit kinds carry ``mu_tilde`` (max nonzeros per row
    of M^{-1}) and ``inv_inf_norm``; implicit kinds leave them unset.
    """

    kind: str
    n: int
    mode: str
    mu_tilde: int | None = None
    inv_inf_norm: float | None = None
    shift: float = 0.0
    _diag_inv: np.ndarray | None = field(default=None, repr=False)
    _factor: tuple | None = field(default=None, repr=False)

    def apply(self, r: np.ndarray) -> np.ndarray:
        if r.shape[0] != self.n:
            raise ValueError(f"dimension mismatch: operator is {self.n}x{self.n}, vector has length {r.shape[0]}")
        if self.kind == "identity":
            return r.copy()
        if self.kind == "jacobi":
            return r * self._diag_inv
        lp, li, lx = self._factor
        y = _solve_lower(self.n, lp, li, lx, r)
        _solve_lower_transpose(self.n, lp, li, lx, y)
        return y

    def inv_norm2_estimate(self) -> float:
        """Stand-in for the 2-norm of M^{-1} in the rounding-error model.

        Exact for both explicit kinds: the identity has norm 1 and a
        diagonal operator's 2-norm equals its inf-norm.
        """
        if self.mode != "explicit":
            raise PreconditionerError(f"{self.kind} has no explicit inverse norm")
        if self.kind == "identity":
            return 1.0
        return self.inv_inf_norm


def apply(M: Preconditioner, r: np.ndarray) -> np.ndarray:
    """Functional form of ``M.apply(r)``."""
    return M.apply(r)


def identity(n: int) -> Preconditioner:
    # mu_tilde = 0 by convention: applying the identity performs no flops,
    # so it must not contribute rounding terms to the error model.
    return Preconditioner(kind="identity", n=n, mode="explicit", mu_tilde=0, inv_inf_norm=1.0)


def jacobi_build(A: CsrMatrix) -> Preconditioner:
    """Diagonal (Jacobi) preconditioner; requires a positive diagonal."""
    diag = A.diagonal()
    bad = np.flatnonzero(diag <= 0.0)
    if bad.size:
        raise PreconditionerError(f"nonpositive diagonal entry at row {bad[0]}")
    inv = 1.0 / diag
    inv.setflags(write=False)
    return Preconditioner(
        kind="jacobi",
        n=A.n,
        mode="explicit",
        mu_tilde=1,
        inv_inf_norm=float(inv.max()),
        _diag_inv=inv,
    )


def icc0_build(A: CsrMatrix, shift: float = 0.0, shift_mode: str = "diag") -> Preconditioner:
    """Zero-fill incomplete Cholesky factor on the lower triangle of A.

    ``shift`` applies a global diagonal shift before factoring:
    ``shift_mode="diag"`` factors A + shift*diag(diag(A)) (the compensated,
    scale-invariant form), ``shift_mode="identity"`` factors A + shift*I.
    Raises when a pivot becomes nonpositive, naming the failing row.
    """
    if shift < 0.0:
        raise PreconditionerError("diagonal shift must be nonnegative")
    if shift_mode not in ("diag", "identity"):
        raise PreconditionerError(f"unknown shift mode {shift_mode!r}")

    rows = np.repeat(np.arange(A.n), np.diff(A.row_ptr))
    keep = A.col_idx <= rows
    li = np.ascontiguousarray(A.col_idx[keep])
    lx = np.array(A.values[keep], dtype=np.float64)
    lp = np.zeros(A.n + 1, dtype=np.int64)
    np.cumsum(np.bincount(rows[keep], minlength=A.n), out=lp[1:])

    diag_pos = lp[1:] - 1
    diag_present = (lp[1:] > lp[:-1]) & (li[np.maximum(diag_pos, 0)] == np.arange(A.n)) if li.size else np.zeros(A.n, bool)
    if not np.all(diag_present):
        missing = int(np.flatnonzero(~diag_present)[0])
        raise PreconditionerError(f"missing diagonal entry at row {missing}")
    if shift > 0.0:
        if shift_mode == "diag":
            lx[diag_pos] = lx[diag_pos] + shift * lx[diag_pos]
        else:
            lx[diag_pos] = lx[diag_pos] + shift

    fail = _icc0_factor(A.n, lp, li, lx)
    if fail >= 0:
        raise PreconditionerError(
            f"nonpositive pivot at row {fail} during incomplete Cholesky; "
            f"increase the diagonal shift (current shift={shift})"
        )
    for arr in (lp, li, lx):
        arr.setflags(write=False)
    return Preconditioner(kind="icc0", n=A.n, mode="implicit", shift=shift, _factor=(lp, li, lx))


@njit(cache=True)
def _icc0_factor(n, lp, li, lx):
    """In-place IC(0) on lower-triangle CSR with the diagonal last per row.

    Returns the failing row on pivot breakdown, -1 on success.
    """
    for i in range(n):
        start = lp[i]
        diag = lp[i + 1] - 1
        for idx in range(start, diag):
            k = li[idx]
            # dot of rows i and k restricted to columns < k
            s = 0.0
            ia = start
            ka = lp[k]
            kend = lp[k + 1] - 1
            while ia < idx and ka < kend:
                ci = li[ia]
                ck = li[ka]
                if ci == ck:
                    s += lx[ia] * lx[ka]
                    ia += 1
                    ka += 1
                elif ci < ck:
                    ia += 1
                else:
                    ka += 1
            lx[idx] = (lx[idx] - s) / lx[kend]
        s = 0.0
        for idx in range(start, diag):
            s += lx[idx] * lx[idx]
        d = lx[diag] - s
        if d <= 0.0:
            return i
        lx[diag] = math.sqrt(d)
    return -1


@njit(cache=True)
def _solve_lower(n, lp, li, lx, b):
    y = b.copy()
    for i in range(n):
        s = y[i]
        diag = lp[i + 1] - 1
        for idx in range(lp[i], diag):
            s -= lx[idx] * y[li[idx]]
        y[i] = s / lx[diag]
    return y


@njit(cache=True)
def _solve_lower_transpose(n, lp, li, lx, y):
    # solves L^T x = y in place via a reverse column sweep over L's rows
    for i in range(n - 1, -1, -1):
        diag = lp[i + 1] - 1
        y[i] = y[i] / lx[diag]
        xi = y[i]
        for idx in range(lp[i], diag):
            y[li[idx]] -= lx[idx] * xi
    return y
