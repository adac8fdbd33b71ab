"""Benchmark harness: experiment configs, summary tables, trace CSVs.

An experiment pins a problem (generated Laplacian or Matrix Market file),
a right-hand side, an initial guess, a preconditioner, and a method set,
then runs every method and reports one summary row each plus an optional
per-iteration trace CSV. The CSV schema is fixed:

    iter,relres_rec,relres_true,gap_true,gap_est,replaced

Residual columns are relative to |b|; gap columns are absolute norms;
missing values are written as nan. Identical configurations (including the
seed) produce bitwise identical CSVs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace as _dc_replace
from pathlib import Path
from typing import IO, Callable, Union

import numpy as np

from .precond import Preconditioner, PreconditionerError, icc0_build, jacobi_build
from .replacement import ReplacementPolicy
from .solvers import (
    BreakdownError,
    SolveOptions,
    SolveResult,
    solve_cg,
    solve_cgcg,
    solve_pcg,
    solve_pcg_rr,
)
from .sparse import CsrMatrix, dot, gen_laplacian_2d, norm2, read_matrix_market, spmv

__all__ = [
    "ExperimentConfig",
    "ExperimentResult",
    "SummaryRow",
    "TABLE2_PRECONDITIONERS",
    "emit_table",
    "run_experiment",
    "run_table1",
    "run_table2",
    "write_trace_csv",
]

METHODS = ("cg", "cgcg", "pcg", "pcgrr")

#: Preconditioner assignment used for the Matrix Market benchmark set:
#: (kind, diagonal shift). Matrices not listed fall back to the config.
TABLE2_PRECONDITIONERS: dict[str, tuple[str, float]] = {
    "bcsstk14": ("jacobi", 0.0),
    "bcsstk15": ("jacobi", 0.0),
    "bcsstk16": ("jacobi", 0.0),
    "bcsstk17": ("jacobi", 0.0),
    "bcsstk18": ("jacobi", 0.0),
    "bcsstk27": ("jacobi", 0.0),
    "gr_30_30": ("none", 0.0),
    "nos1": ("icc", 0.5),
    "nos2": ("icc", 0.5),
    "nos3": ("icc", 0.0),
    "nos4": ("icc", 0.0),
    "nos5": ("icc", 0.0),
    "nos6": ("icc", 0.0),
    "nos7": ("icc", 0.0),
    "s1rmq4m1": ("icc", 0.0),
    "s1rmt3m1": ("icc", 0.0),
    "s2rmq4m1": ("icc", 0.1),
    "s2rmt3m1": ("icc", 0.0),
    "s3dkq4m2": ("icc", 0.1),
    "s3dkt3m2": ("icc", 0.1),
    "s3rmq4m1": ("icc", 0.1),
    "s3rmt3m1": ("icc", 0.1),
    "s3rmt3m3": ("icc", 0.1),
}

_SOLVERS: dict[str, Callable] = {
    "cg": solve_cg,
    "cgcg": solve_cgcg,
    "pcg": solve_pcg,
}


@dataclass(frozen=True)
class ExperimentConfig:
    """One benchmark run: problem, right-hand side, x0, methods, outputs.

    Exactly one of ``laplacian`` and ``matrix_path`` must be set. rhs modes:
    ``exact`` builds b = A*xhat with xhat_j = 1/sqrt(n) so the error is
    known, ``uniform`` sets b_j = 1/sqrt(n), ``file`` loads a vector.
    x0 modes: ``zero`` or ``rand`` (uniform [0, 1), reproducible from
    ``seed``).
    """

    laplacian: tuple[int, int] | None = None
    matrix_path: Union[str, Path, None] = None
    rhs_mode: str = "exact"
    rhs_path: Union[str, Path, None] = None
    x0_mode: str = "zero"
    seed: int = 0
    methods: tuple[str, ...] = METHODS
    prec: str = "none"
    icc_shift: float = 0.0
    icc_shift_mode: str = "diag"
    opts: SolveOptions = SolveOptions(stop_mode="stagnation")
    policy: ReplacementPolicy = ReplacementPolicy()
    label: str = ""

    def __post_init__(self):
        if (self.laplacian is None) == (self.matrix_path is None):
            raise ValueError("exactly one of laplacian/matrix_path must be set")
        if self.rhs_mode not in ("exact", "uniform", "file"):
            raise ValueError(f"unknown rhs mode {self.rhs_mode!r}")
        if self.rhs_mode == "file" and self.rhs_path is None:
            raise ValueError("rhs_mode='file' requires rhs_path")
        if self.x0_mode not in ("zero", "rand"):
            raise ValueError(f"unknown x0 mode {self.x0_mode!r}")
        unknown = set(self.methods) - set(METHODS)
        if unknown:
            raise ValueError(f"unknown methods: {sorted(unknown)}")
        if self.prec not in ("none", "jacobi", "icc"):
            raise ValueError(f"unknown preconditioner {self.prec!r}")

    @property
    def name(self) -> str:
        if self.label:
            return self.label
        if self.laplacian is not None:
            return f"lapl{self.laplacian[0]}x{self.laplacian[1]}"
        return Path(self.matrix_path).stem


@dataclass
class SummaryRow:
    method: str
    status: str
    iterations: int
    relres: float
    relerr: float | None
    replacements: int
    spmv: int
    reductions_per_iter: int
    detail: str = ""


@dataclass
class ExperimentResult:
    name: str
    n: int
    nnz: int
    rows: list[SummaryRow]
    results: dict[str, SolveResult] = field(default_factory=dict)
    trace_paths: dict[str, Path] = field(default_factory=dict)
    x_exact: np.ndarray | None = None


def build_problem(config: ExperimentConfig) -> CsrMatrix:
    if config.laplacian is not None:
        return gen_laplacian_2d(*config.laplacian)
    return read_matrix_market(config.matrix_path)


def build_preconditioner(config: ExperimentConfig, A: CsrMatrix) -> Preconditioner | None:
    if config.prec == "none":
        return None
    if config.prec == "jacobi":
        return jacobi_build(A)
    return icc0_build(A, shift=config.icc_shift, shift_mode=config.icc_shift_mode)


def _build_rhs(config: ExperimentConfig, A: CsrMatrix) -> tuple[np.ndarray, np.ndarray | None]:
    n = A.n
    if config.rhs_mode == "exact":
        x_exact = np.full(n, 1.0 / math.sqrt(n))
        return spmv(A, x_exact), x_exact
    if config.rhs_mode == "uniform":
        return np.full(n, 1.0 / math.sqrt(n)), None
    b = np.loadtxt(config.rhs_path, dtype=np.float64).reshape(-1)
    if b.shape[0] != n:
        raise ValueError(f"right-hand side length {b.shape[0]} does not match n={n}")
    return b, None


def _build_x0(config: ExperimentConfig, n: int) -> np.ndarray | None:
    if config.x0_mode == "zero":
        return None
    return np.random.default_rng(config.seed).random(n)


def run_experiment(config: ExperimentConfig, trace_dir: Union[str, Path, None] = None) -> ExperimentResult:
    """Run every configured method on the problem; never raises per-method.

    Solver breakdowns are reported in the summary row for that method and
    the remaining methods still run. Preconditioner build failures abort
    the experiment (every method would fail identically).
    """
    A = build_problem(config)
    M = build_preconditioner(config, A)
    b, x_exact = _build_rhs(config, A)
    x0 = _build_x0(config, A.n)
    opts = config.opts if x_exact is None else _dc_replace(config.opts, x_exact=x_exact)

    out = ExperimentResult(config.name, A.n, A.nnz, rows=[], x_exact=x_exact)
    bnorm = norm2(b)
    xhat_anorm = math.sqrt(dot(x_exact, b)) if x_exact is not None else None
    for method in config.methods:
        try:
            if method == "pcgrr":
                res = solve_pcg_rr(A, M, b, x0, opts, policy=config.policy)
            else:
                res = _SOLVERS[method](A, M, b, x0, opts)
        except BreakdownError as exc:
            out.rows.append(SummaryRow(method, "breakdown", 0, math.nan, None, 0, 0,
                                       0, detail=str(exc)))
            continue
        out.results[method] = res
        out.rows.append(_summarize(method, res, A, b, bnorm, x_exact, xhat_anorm))
        if trace_dir is not None:
            path = Path(trace_dir) / f"{config.name}_{method}.csv"
            write_trace_csv(res, path)
            out.trace_paths[method] = path
    return out


def _summarize(method, res: SolveResult, A, b, bnorm, x_exact, xhat_anorm) -> SummaryRow:
    if res.argmin_true_residual is not None and res.status in ("stagnated", "max_iter"):
        iters, best = res.argmin_true_residual
        relres = best / bnorm
    else:
        iters = res.iterations[-1].iter
        rec = res.iterations[-1]
        relres = (rec.true_residual_norm or rec.recursive_residual_norm) / bnorm
    relerr = None
    if x_exact is not None and xhat_anorm and xhat_anorm > 0.0:
        e = x_exact - res.x_final
        relerr = math.sqrt(abs(dot(e, b - spmv(A, res.x_final)))) / xhat_anorm
    return SummaryRow(
        method=method,
        status=res.status,
        iterations=iters,
        relres=relres,
        relerr=relerr,
        replacements=res.replacement_count,
        spmv=res.op_counts.spmv,
        reductions_per_iter=res.op_counts.reduction_groups_per_iter,
    )


# ---------------------------------------------------------------------------
# table / CSV emission
# ---------------------------------------------------------------------------

_COLUMNS = ("method", "iter", "relres", "relerr", "rr")


def _fmt(v, sci=True) -> str:
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return "-"
    if sci:
        return f"{v:.1e}"
    return str(v)


def emit_table(rows: list[SummaryRow], format: str = "plain") -> str:
    """Render summary rows with a fixed column order and 2-digit mantissas."""
    if format not in ("plain", "csv", "markdown"):
        raise ValueError(f"unknown table format {format!r}")
    cells = [list(_COLUMNS)]
    for row in rows:
        rr = str(row.replacements) if row.method == "pcgrr" else "-"
        if row.status == "breakdown":
            cells.append([row.method, "-", "breakdown", "-", rr])
        else:
            cells.append([row.method, str(row.iterations), _fmt(row.relres), _fmt(row.relerr), rr])
    if format == "csv":
        return "\n".join(",".join(line) for line in cells) + "\n"
    widths = [max(len(line[c]) for line in cells) for c in range(len(_COLUMNS))]
    if format == "markdown":
        out = ["| " + " | ".join(c.ljust(w) for c, w in zip(cells[0], widths)) + " |"]
        out.append("|" + "|".join("-" * (w + 2) for w in widths) + "|")
        for line in cells[1:]:
            out.append("| " + " | ".join(c.ljust(w) for c, w in zip(line, widths)) + " |")
        return "\n".join(out) + "\n"
    return "\n".join("  ".join(c.ljust(w) for c, w in zip(line, widths)).rstrip() for line in cells) + "\n"


def write_trace_csv(res: SolveResult, target: Union[str, Path, IO[str]]) -> None:
    """Write the per-iteration trace in the fixed benchmark schema."""
    if hasattr(target, "write"):
        _write_csv(res, target)
        return
    path = Path(target)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        _write_csv(res, fh)


def _write_csv(res: SolveResult, fh: IO[str]) -> None:
    def cell(v, scale=1.0):
        if v is None:
            return "nan"
        return repr(float(v) / scale)

    bn = res.b_norm if res.b_norm > 0.0 else 1.0
    fh.write("iter,relres_rec,relres_true,gap_true,gap_est,replaced\n")
    for rec in res.iterations:
        fh.write(
            f"{rec.iter},{cell(rec.recursive_residual_norm, bn)},"
            f"{cell(rec.true_residual_norm, bn)},{cell(rec.true_gap_norm)},"
            f"{cell(rec.estimated_gap_norm)},{int(rec.replaced)}\n"
        )


# ---------------------------------------------------------------------------
# paper-style benches
# ---------------------------------------------------------------------------

def run_table1(
    sizes: list[int],
    x0_mode: str = "zero",
    seed: int = 0,
    methods: tuple[str, ...] = METHODS,
    opts: SolveOptions | None = None,
    trace_dir: Union[str, Path, None] = None,
) -> list[ExperimentResult]:
    """Laplacian ladder with b = A*xhat: one experiment per grid size."""
    opts = opts or SolveOptions(stop_mode="stagnation")
    results = []
    for size in sizes:
        config = ExperimentConfig(
            laplacian=(size, size),
            rhs_mode="exact",
            x0_mode=x0_mode,
            seed=seed,
            methods=methods,
            opts=opts,
            label=f"lapl{size}",
        )
        results.append(run_experiment(config, trace_dir=trace_dir))
    return results


def run_table2(
    directory: Union[str, Path],
    methods: tuple[str, ...] = METHODS,
    opts: SolveOptions | None = None,
    default_prec: str = "icc",
    default_shift: float = 0.0,
    trace_dir: Union[str, Path, None] = None,
) -> list[ExperimentResult]:
    """Run the method set over every .mtx file in a directory.

    Preconditioners follow the known benchmark assignment when the file
    stem is recognized, otherwise the supplied default.
    """
    directory = Path(directory)
    paths = sorted(directory.glob("*.mtx"))
    if not paths:
        raise FileNotFoundError(f"no .mtx files under {directory}")
    opts = opts or SolveOptions(stop_mode="stagnation")
    results = []
    for path in paths:
        prec, shift = TABLE2_PRECONDITIONERS.get(path.stem, (default_prec, default_shift))
        config = ExperimentConfig(
            matrix_path=path,
            rhs_mode="exact",
            methods=methods,
            prec=prec,
            icc_shift=shift,
            opts=opts,
            label=path.stem,
        )
        try:
            results.append(run_experiment(config, trace_dir=trace_dir))
        except PreconditionerError as exc:
            rows = [SummaryRow(m, "precond_error", 0, math.nan, None, 0, 0, 0, detail=str(exc))
                    for m in methods]
            A = build_problem(config)
            results.append(ExperimentResult(path.stem, A.n, A.nnz, rows=rows))
    return results
