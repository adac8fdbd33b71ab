"""Shared fixtures. Expensive benchmark solves are session-scoped."""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np
import pytest

import pipecg as pc

DATA_DIR = Path(__file__).resolve().parent.parent / "data"

#: Reference values for the Laplacian benchmark (zero x0, b = A*xhat):
#: method -> (iterations, relres, replacements) per grid size.
TABLE1_REFERENCE = {
    50: {"cg": (128, 7.8e-15), "cgcg": (127, 8.1e-15), "pcg": (118, 1.5e-12),
         "pcgrr": (125, 9.1e-15, 3)},
    100: {"cg": (254, 1.6e-14), "cgcg": (256, 1.6e-14), "pcg": (228, 9.1e-12),
          "pcgrr": (272, 1.2e-14, 6)},
    200: {"cg": (490, 3.1e-14), "cgcg": (487, 3.2e-14), "pcg": (439, 5.4e-11),
          "pcgrr": (536, 2.5e-14, 11)},
    400: {"cg": (959, 6.2e-14), "cgcg": (958, 6.4e-14), "pcg": (807, 3.0e-10),
          "pcgrr": (957, 4.6e-14, 23)},
}


def symmetric_random_spd(n: int, cond: float, seed: int) -> pc.CsrMatrix:
    """Exactly symmetric random SPD matrix (symmetrized bitwise)."""
    rng = np.random.default_rng(seed)
    q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    lam = np.geomspace(1.0, cond, n)
    dense = (q * lam) @ q.T
    dense = np.tril(dense) + np.tril(dense, -1).T  # bitwise symmetric
    return pc.CsrMatrix.from_dense(dense)


def laplacian_problem(size: int):
    A = pc.gen_laplacian_2d(size, size)
    x_exact = np.full(A.n, 1.0 / math.sqrt(A.n))
    b = pc.spmv(A, x_exact)
    return A, b, x_exact


@pytest.fixture(scope="session")
def stagnation_opts():
    return pc.SolveOptions(stop_mode="stagnation")


def _solve_table1(size: int) -> dict[str, pc.SolveResult]:
    A, b, x_exact = laplacian_problem(size)
    opts = pc.SolveOptions(stop_mode="stagnation", x_exact=x_exact)
    return {
        "cg": pc.solve_cg(A, None, b, None, opts),
        "cgcg": pc.solve_cgcg(A, None, b, None, opts),
        "pcg": pc.solve_pcg(A, None, b, None, opts),
        "pcgrr": pc.solve_pcg_rr(A, None, b, None, opts),
    }


@pytest.fixture(scope="session")
def table1_lapl50():
    return _solve_table1(50)


@pytest.fixture(scope="session")
def table1_lapl100():
    return _solve_table1(100)


@pytest.fixture(scope="session")
def table1_lapl200():
    return _solve_table1(200)


@pytest.fixture(scope="session")
def table1_lapl400():
    A, b, x_exact = laplacian_problem(400)
    opts = pc.SolveOptions(stop_mode="stagnation", x_exact=x_exact)
    return {
        "cg": pc.solve_cg(A, None, b, None, opts),
        "pcg": pc.solve_pcg(A, None, b, None, opts),
        "pcgrr": pc.solve_pcg_rr(A, None, b, None, opts),
    }


@pytest.fixture(scope="session")
def fig2_lapl50():
    """Uniform right-hand side b_j = 1/sqrt(n), no preconditioner."""
    A = pc.gen_laplacian_2d(50, 50)
    b = np.full(A.n, 1.0 / math.sqrt(A.n))
    opts = pc.SolveOptions(stop_mode="stagnation")
    return {
        "cg": pc.solve_cg(A, None, b, None, opts),
        "cgcg": pc.solve_cgcg(A, None, b, None, opts),
        "pcg": pc.solve_pcg(A, None, b, None, opts),
        "pcgrr": pc.solve_pcg_rr(A, None, b, None, opts),
    }


def stagnation_summary(res: pc.SolveResult) -> tuple[int, float]:
    """(argmin iteration, relative true residual at the argmin)."""
    it, best = res.argmin_true_residual
    return it, best / res.b_norm
