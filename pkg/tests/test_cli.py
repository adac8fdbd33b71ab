"""Command-line interface: subcommands, outputs, exit codes."""

import numpy as np
import pytest

import pipecg as pc
from pipecg.cli import main


def run_cli(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


class TestSolve:
    def test_laplacian_tolerance_mode(self, capsys, tmp_path):
        trace = tmp_path / "out.csv"
        code, out, _ = run_cli(
            capsys, "solve", "--laplacian", "8", "8", "--method", "cg",
            "--tol", "1e-10", "--trace", str(trace),
        )
        assert code == 0
        assert trace.exists()
        assert "eps=" in out and "tau=" in out
        assert "cg" in out
        header = trace.read_text().splitlines()[0]
        assert header == "iter,relres_rec,relres_true,gap_true,gap_est,replaced"

    def test_stagnation_default(self, capsys):
        code, out, _ = run_cli(capsys, "solve", "--laplacian", "6", "6",
                               "--method", "pcgrr", "--stagnation-window", "15")
        assert code == 0
        assert "mode=stagnation" in out

    def test_matrix_market_input(self, capsys, tmp_path):
        A = pc.gen_laplacian_2d(4, 4)
        path = tmp_path / "lap.mtx"
        pc.write_matrix_market(A, path)
        code, out, _ = run_cli(capsys, "solve", "--matrix", str(path),
                               "--method", "cgcg", "--tol", "1e-8")
        assert code == 0
        assert "cgcg" in out

    def test_icc_option(self, capsys):
        code, out, _ = run_cli(capsys, "solve", "--laplacian", "10", "10",
                               "--method", "cg", "--prec", "icc",
                               "--icc-shift", "0.1", "--tol", "1e-10")
        assert code == 0

    def test_breakdown_exit_code(self, capsys, tmp_path):
        dense = np.diag([1.0, -1.0, 2.0])
        path = tmp_path / "indef.mtx"
        pc.write_matrix_market(pc.CsrMatrix.from_dense(dense), path)
        code, out, _ = run_cli(capsys, "solve", "--matrix", str(path),
                               "--rhs", "uniform", "--tol", "1e-8")
        assert code == 2

    def test_missing_file_exit_code(self, capsys):
        code, _, err = run_cli(capsys, "solve", "--matrix", "/nonexistent.mtx", "--tol", "1")
        assert code == 1
        assert "error" in err

    def test_plot_output(self, capsys, tmp_path):
        trace = tmp_path / "t.csv"
        fig = tmp_path / "t.png"
        code, out, _ = run_cli(
            capsys, "solve", "--laplacian", "6", "6", "--method", "pcg",
            "--stagnation-window", "10", "--trace", str(trace), "--plot", str(fig),
        )
        assert code == 0
        assert fig.exists() and fig.stat().st_size > 0


class TestBench:
    def test_table1_small(self, capsys, tmp_path):
        out_dir = tmp_path / "t1"
        code, out, _ = run_cli(
            capsys, "bench", "table1", "--sizes", "4,6", "--methods", "cg,pcg",
            "--stagnation-window", "10", "--out-dir", str(out_dir),
        )
        assert code == 0
        assert "## lapl4" in out and "## lapl6" in out
        assert (out_dir / "summary.txt").exists()
        assert (out_dir / "traces" / "lapl4_cg.csv").exists()

    def test_table1_markdown(self, capsys):
        code, out, _ = run_cli(capsys, "bench", "table1", "--sizes", "4",
                               "--methods", "cg", "--stagnation-window", "5",
                               "--format", "markdown")
        assert code == 0
        assert "| method" in out

    def test_table2_directory(self, capsys, tmp_path):
        mmdir = tmp_path / "mm"
        mmdir.mkdir()
        pc.write_matrix_market(pc.gen_laplacian_2d(4, 4), mmdir / "toy.mtx")
        code, out, _ = run_cli(
            capsys, "bench", "table2", "--dir", str(mmdir), "--methods", "cg,pcgrr",
            "--stagnation-window", "10",
        )
        assert code == 0
        assert "## toy" in out

    def test_table2_missing_dir(self, capsys, tmp_path):
        code, _, err = run_cli(capsys, "bench", "table2", "--dir", str(tmp_path / "none"))
        assert code == 1

    def test_table2_plot(self, capsys, tmp_path):
        mmdir = tmp_path / "mm"
        mmdir.mkdir()
        pc.write_matrix_market(pc.gen_laplacian_2d(4, 4), mmdir / "toy.mtx")
        out_dir = tmp_path / "out"
        code, _, _ = run_cli(
            capsys, "bench", "table2", "--dir", str(mmdir), "--methods", "cg",
            "--stagnation-window", "8", "--out-dir", str(out_dir), "--plot",
        )
        assert code == 0
        assert (out_dir / "toy.png").exists()


class TestReport:
    def test_render_panels(self, capsys, tmp_path):
        config = pc.ExperimentConfig(
            laplacian=(6, 6),
            rhs_mode="exact",
            methods=("cg", "pcg"),
            opts=pc.SolveOptions(stop_mode="stagnation", stagnation_window=10),
        )
        out = pc.run_experiment(config, trace_dir=tmp_path)
        fig = tmp_path / "fig.png"
        code, text, _ = run_cli(
            capsys, "report", str(out.trace_paths["cg"]), str(out.trace_paths["pcg"]),
            "--out", str(fig), "--title", "demo",
        )
        assert code == 0
        assert fig.exists() and fig.stat().st_size > 0

    def test_render_compare(self, capsys, tmp_path):
        config = pc.ExperimentConfig(
            laplacian=(5, 5),
            rhs_mode="exact",
            methods=("cg",),
            opts=pc.SolveOptions(stop_mode="stagnation", stagnation_window=10),
        )
        out = pc.run_experiment(config, trace_dir=tmp_path)
        fig = tmp_path / "cmp.png"
        code, _, _ = run_cli(capsys, "report", str(out.trace_paths["cg"]),
                             "--out", str(fig), "--compare")
        assert code == 0
        assert fig.exists()
