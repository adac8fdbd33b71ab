"""Command-line benchmark harness.

Subcommands:

* ``solve``        -- run one method on one problem, optionally writing a
                      per-iteration trace CSV and a rendered figure.
* ``bench table1`` -- Laplacian ladder with the known exact solution.
* ``bench table2`` -- every Matrix Market file in a directory, with the
                      benchmark preconditioner assignment.
* ``report``       -- render existing trace CSVs to a figure file.

Exit status: 0 when every run converged or stagnated, 2 when a solver or
preconditioner broke down, 1 for usage/input errors.
"""

from __future__ import annotations

import argparse
import math
import sys
from dataclasses import replace as _dc_replace
from pathlib import Path

from .bench import (
    ExperimentConfig,
    emit_table,
    run_experiment,
    run_table1,
    run_table2,
)
from .precond import PreconditionerError
from .replacement import ReplacementPolicy
from .solvers import REDUCTION_GROUPS, SolveOptions
from .sparse import MatrixFormatError

_EPS = 2.0 ** -52


def _add_problem_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--matrix", type=Path, help="Matrix Market file (coordinate real symmetric)")
    p.add_argument("--laplacian", nargs=2, type=int, metavar=("NX", "NY"),
                   help="generate the 2-D Laplacian on an NX x NY grid")
    p.add_argument("--rhs", choices=("exact", "uniform"), default="exact",
                   help="b = A*xhat with xhat_j = 1/sqrt(n), or b_j = 1/sqrt(n)")
    p.add_argument("--x0", choices=("zero", "rand"), default="zero")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--prec", choices=("none", "jacobi", "icc"), default="none")
    p.add_argument("--icc-shift", type=float, default=0.0, metavar="F")
    p.add_argument("--icc-shift-mode", choices=("diag", "identity"), default="diag",
                   help="shift A by F*diag(diag(A)) or by F*I before factoring")
    p.add_argument("--tol", type=float, default=None, metavar="F",
                   help="relative recursive-residual tolerance; omit to run to stagnation")
    p.add_argument("--max-iter", type=int, default=50_000)
    p.add_argument("--stagnation-window", type=int, default=50, metavar="N")
    p.add_argument("--tau", type=float, default=None,
                   help="replacement threshold (default sqrt(eps))")


def _build_parser() -> argparse.ArgumentParser:
    root = argparse.ArgumentParser(prog="pipecg", description=__doc__,
                                   formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = root.add_subparsers(dest="command", required=True)

    solve = sub.add_parser("solve", help="run one method on one problem")
    _add_problem_args(solve)
    solve.add_argument("--method", choices=("cg", "cgcg", "pcg", "pcgrr"), default="cg")
    solve.add_argument("--trace", type=Path, help="write the per-iteration trace CSV here")
    solve.add_argument("--plot", type=Path, help="render the trace to this figure file")

    bench = sub.add_parser("bench", help="reproduce the benchmark tables")
    bsub = bench.add_subparsers(dest="bench_command", required=True)

    t1 = bsub.add_parser("table1", help="Laplacian ladder, b = A*xhat")
    _add_problem_args(t1)
    t1.add_argument("--sizes", default="50,100,200", help="comma-separated grid sizes")
    t1.add_argument("--methods", default="cg,cgcg,pcg,pcgrr")
    t1.add_argument("--out-dir", type=Path, default=None, help="write traces and tables here")
    t1.add_argument("--format", choices=("plain", "csv", "markdown"), default="plain")
    t1.add_argument("--plot", action="store_true", help="render a figure per problem")

    t2 = bsub.add_parser("table2", help="Matrix Market directory sweep")
    _add_problem_args(t2)
    t2.add_argument("--dir", type=Path, required=True, help="directory of .mtx files")
    t2.add_argument("--methods", default="cg,cgcg,pcg,pcgrr")
    t2.add_argument("--out-dir", type=Path, default=None)
    t2.add_argument("--format", choices=("plain", "csv", "markdown"), default="plain")
    t2.add_argument("--plot", action="store_true")

    rep = sub.add_parser("report", help="render trace CSVs to a figure")
    rep.add_argument("traces", nargs="+", type=Path)
    rep.add_argument("--out", type=Path, required=True)
    rep.add_argument("--compare", action="store_true",
                     help="overlay true residuals instead of one panel per trace")
    rep.add_argument("--title", default=None)
    return root


def _options_from_args(args) -> tuple[SolveOptions, ReplacementPolicy]:
    mode = "tolerance" if args.tol is not None else "stagnation"
    opts = SolveOptions(
        tol_rel=args.tol if args.tol is not None else 0.0,
        max_iter=args.max_iter,
        stop_mode=mode,
        stagnation_window=args.stagnation_window,
        probe_true_residual=True,
    )
    policy = ReplacementPolicy() if args.tau is None else ReplacementPolicy(tau=args.tau)
    return opts, policy


def _config_from_args(args, methods) -> ExperimentConfig:
    if (args.matrix is None) == (args.laplacian is None):
        raise SystemExit("exactly one of --matrix/--laplacian is required")
    opts, policy = _options_from_args(args)
    return ExperimentConfig(
        laplacian=tuple(args.laplacian) if args.laplacian else None,
        matrix_path=args.matrix,
        rhs_mode=args.rhs,
        x0_mode=args.x0,
        seed=args.seed,
        methods=methods,
        prec=args.prec,
        icc_shift=args.icc_shift,
        icc_shift_mode=args.icc_shift_mode,
        opts=opts,
        policy=policy,
    )


def _print_header(name, n, nnz, opts, policy) -> None:
    print(f"# problem {name}: n={n}, nnz={nnz}")
    print(f"# eps={opts.epsilon:.6e}  tau={policy.tau:.6e}  mode={opts.stop_mode}"
          + (f"  tol={opts.tol_rel:g}" if opts.stop_mode == "tolerance" else
             f"  window={opts.stagnation_window}"))
    groups = ", ".join(f"{m}={g}" for m, g in REDUCTION_GROUPS.items())
    print(f"# reduction groups per iteration: {groups}")


def _run_solve(args) -> int:
    config = _config_from_args(args, methods=(args.method,))
    result = run_experiment(config, trace_dir=args.trace.parent if args.trace else None)
    if args.trace and args.method in result.trace_paths:
        result.trace_paths[args.method].rename(args.trace)
        result.trace_paths[args.method] = args.trace
    _print_header(result.name, result.n, result.nnz, config.opts, config.policy)
    print(emit_table(result.rows), end="")
    if args.plot and args.trace:
        from .report import render_trace_figure

        render_trace_figure([args.trace], args.plot)
        print(f"# figure written to {args.plot}")
    row = result.rows[0]
    return 0 if row.status in ("converged", "stagnated", "max_iter") else 2


def _run_table(args, runner) -> int:
    methods = tuple(m.strip() for m in args.methods.split(",") if m.strip())
    opts, policy = _options_from_args(args)
    out_dir = args.out_dir
    trace_dir = out_dir / "traces" if out_dir else None
    results = runner(methods, opts, trace_dir)
    code = 0
    tables = []
    for res in results:
        header = f"## {res.name} (n={res.n}, nnz={res.nnz})"
        table = emit_table(res.rows, format=args.format)
        tables.append(f"{header}\n{table}")
        if any(r.status not in ("converged", "stagnated", "max_iter") for r in res.rows):
            code = 2
        if args.plot and res.trace_paths and out_dir:
            from .report import render_trace_figure

            render_trace_figure(sorted(res.trace_paths.values()),
                                out_dir / f"{res.name}.png", title=res.name)
    print(f"# eps={opts.epsilon:.6e}  tau={policy.tau:.6e}")
    body = "\n".join(tables)
    print(body, end="")
    if out_dir:
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "summary.txt").write_text(body, encoding="utf-8")
    return code


def _run_report(args) -> int:
    from .report import render_compare_figure, render_trace_figure

    render = render_compare_figure if args.compare else render_trace_figure
    out = render(args.traces, args.out, title=args.title)
    print(f"figure written to {out}")
    return 0


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "solve":
            return _run_solve(args)
        if args.command == "bench" and args.bench_command == "table1":
            sizes = [int(s) for s in args.sizes.split(",") if s.strip()]

            def runner(methods, opts, trace_dir):
                return run_table1(sizes, x0_mode=args.x0, seed=args.seed,
                                  methods=methods, opts=opts, trace_dir=trace_dir)

            return _run_table(args, runner)
        if args.command == "bench" and args.bench_command == "table2":

            def runner(methods, opts, trace_dir):
                return run_table2(args.dir, methods=methods, opts=opts,
                                  default_prec=args.prec, default_shift=args.icc_shift,
                                  trace_dir=trace_dir)

            return _run_table(args, runner)
        if args.command == "report":
            return _run_report(args)
    except (MatrixFormatError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except PreconditionerError as exc:
        print(f"preconditioner error: {exc}", file=sys.stderr)
        return 2
    return 1


if __name__ == "__main__":
    sys.exit(main())
