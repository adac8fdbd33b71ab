"""Sparse SPD solvers with rounding-error gap estimation and replacement.

The package provides classical, fused-reduction, and pipelined conjugate
gradient solvers over CSR matrices, a running estimate of the gap between
recursive and true residuals, and a pipelined variant that restores
attainable accuracy through automated residual replacement. A benchmark
CLI (``pipecg``) reproduces the reference tables and renders trace figures.
"""

from .bench import (
    ExperimentConfig,
    ExperimentResult,
    SummaryRow,
    emit_table,
    run_experiment,
    run_table1,
    run_table2,
    write_trace_csv,
)
from .gap import (
    BoundFactors,
    GapState,
    ModelConstants,
    bound_factor_cg,
    bound_factors_cgcg,
    bound_factors_pipelined,
    gap_reset_pipelined,
    gap_step_cg,
    gap_step_cgcg,
    gap_step_pipelined,
    initial_aux_gap_estimate,
    initial_gap_estimate,
    true_gap_probe,
)
from .precond import (
    Preconditioner,
    PreconditionerError,
    icc0_build,
    identity,
    jacobi_build,
)
from .replacement import ReplacementPolicy, perform_replacement, should_replace
from .solvers import (
    REDUCTION_GROUPS,
    BreakdownError,
    IterationRecord,
    OpCounts,
    SolveOptions,
    SolveResult,
    solve_cg,
    solve_cgcg,
    solve_pcg,
    solve_pcg_rr,
)
from .sparse import (
    CsrMatrix,
    MatrixFormatError,
    axpy,
    dot,
    gen_laplacian_2d,
    max_row_nnz,
    norm2,
    norm_inf_matrix,
    read_matrix_market,
    spmv,
    write_matrix_market,
)

__version__ = "0.1.0"

__all__ = [
    "BoundFactors",
    "BreakdownError",
    "CsrMatrix",
    "ExperimentConfig",
    "ExperimentResult",
    "GapState",
    "IterationRecord",
    "MatrixFormatError",
    "ModelConstants",
    "OpCounts",
    "Preconditioner",
    "PreconditionerError",
    "REDUCTION_GROUPS",
    "ReplacementPolicy",
    "SolveOptions",
    "SolveResult",
    "SummaryRow",
    "axpy",
    "bound_factor_cg",
    "bound_factors_cgcg",
    "bound_factors_pipelined",
    "dot",
    "emit_table",
    "gap_reset_pipelined",
    "gap_step_cg",
    "gap_step_cgcg",
    "gap_step_pipelined",
    "gen_laplacian_2d",
    "icc0_build",
    "identity",
    "initial_aux_gap_estimate",
    "initial_gap_estimate",
    "jacobi_build",
    "max_row_nnz",
    "norm2",
    "norm_inf_matrix",
    "perform_replacement",
    "read_matrix_market",
    "run_experiment",
    "run_table1",
    "run_table2",
    "should_replace",
    "solve_cg",
    "solve_cgcg",
    "solve_pcg",
    "solve_pcg_rr",
    "spmv",
    "true_gap_probe",
    "write_matrix_market",
    "write_trace_csv",
]
