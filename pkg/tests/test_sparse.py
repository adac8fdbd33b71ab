"""Sparse storage, kernels, model problem, and Matrix Market I/O."""

import io
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import pipecg as pc
from pipecg.sparse import as_vector

from conftest import symmetric_random_spd


def dense_spmv_oracle(dense: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Triple-loop reference product, left-to-right accumulation."""
    n = dense.shape[0]
    y = np.zeros(n)
    for i in range(n):
        acc = 0.0
        for j in range(n):
            acc += dense[i, j] * x[j]
        y[i] = acc
    return y


class TestCsrMatrix:
    def test_identity_spmv(self):
        A = pc.CsrMatrix.from_dense(np.eye(3))
        got = pc.spmv(A, np.array([1.0, 2.0, 3.0]))
        assert np.array_equal(got, [1.0, 2.0, 3.0])

    def test_laplacian_3x3_row_sums(self):
        A = pc.gen_laplacian_2d(3, 3)
        y = pc.spmv(A, np.ones(9))
        # corners keep 2, edges 1, the center row sums to 0
        assert np.array_equal(y, [2, 1, 2, 1, 0, 1, 2, 1, 2])

    def test_spmv_matches_dense_oracle(self):
        A = symmetric_random_spd(10, 50.0, seed=3)
        x = np.random.default_rng(7).standard_normal(10)
        got = pc.spmv(A, x)
        want = dense_spmv_oracle(A.to_dense(), x)
        assert np.linalg.norm(got - want) <= 1e-14 * np.linalg.norm(want)

    @settings(max_examples=25, deadline=None)
    @given(n=st.integers(2, 50), seed=st.integers(0, 10_000))
    def test_spmv_dense_oracle_property(self, n, seed):
        A = symmetric_random_spd(n, 100.0, seed=seed)
        x = np.random.default_rng(seed + 1).standard_normal(n)
        got = pc.spmv(A, x)
        want = dense_spmv_oracle(A.to_dense(), x)
        scale = max(np.linalg.norm(want), 1.0)
        assert np.linalg.norm(got - want) <= 1e-14 * scale

    def test_spmv_dimension_mismatch(self):
        A = pc.gen_laplacian_2d(2, 2)
        with pytest.raises(ValueError, match="dimension"):
            pc.spmv(A, np.ones(5))

    def test_validation_rejects_asymmetric(self):
        with pytest.raises(ValueError, match="symmetric"):
            pc.CsrMatrix.from_dense(np.array([[2.0, 1.0], [0.5, 2.0]]))

    def test_validation_rejects_bad_row_ptr(self):
        with pytest.raises(ValueError):
            pc.CsrMatrix.from_csr_arrays([0, 2, 1], [0, 1, 1], [1.0, 2.0, 3.0])

    def test_caches_agree_with_recomputation(self):
        A = pc.gen_laplacian_2d(7, 5)
        assert A.mu == pc.max_row_nnz(A)
        assert A.inf_norm == pc.norm_inf_matrix(A)
        B = symmetric_random_spd(20, 10.0, seed=1)
        assert B.mu == pc.max_row_nnz(B)
        assert B.inf_norm == pc.norm_inf_matrix(B)

    def test_arrays_are_frozen(self):
        A = pc.gen_laplacian_2d(3, 3)
        with pytest.raises(ValueError):
            A.values[0] = 99.0


class TestLaplacian:
    def test_single_point(self):
        A = pc.gen_laplacian_2d(1, 1)
        assert A.n == 1
        assert np.array_equal(A.to_dense(), [[4.0]])

    def test_zero_dimension_rejected(self):
        with pytest.raises(ValueError):
            pc.gen_laplacian_2d(0, 3)

    def test_lapl50_size(self):
        A = pc.gen_laplacian_2d(50, 50)
        assert A.n == 2500

    def test_3x3_spectrum(self):
        # analytic eigenvalues 4 - 2cos(k pi/4) - 2cos(l pi/4)
        A = pc.gen_laplacian_2d(3, 3)
        ev = np.linalg.eigvalsh(A.to_dense())
        assert ev.min() > 0.0 and ev.max() < 8.0
        assert ev.min() == pytest.approx(4.0 - 4.0 * math.cos(math.pi / 4.0), rel=1e-12)

    def test_exact_symmetry_and_diagonal_dominance(self):
        A = pc.gen_laplacian_2d(6, 4)
        dense = A.to_dense()
        assert np.array_equal(dense, dense.T)
        off = np.abs(dense).sum(axis=1) - np.abs(np.diag(dense))
        assert np.all(np.diag(dense) >= off)

    def test_inf_norm_is_eight(self):
        for nx, ny in [(3, 3), (5, 8), (10, 10)]:
            assert pc.gen_laplacian_2d(nx, ny).inf_norm == 8.0


class TestKernels:
    def test_dot(self):
        assert pc.dot(np.array([1.0, 2.0]), np.array([3.0, 4.0])) == 11.0

    def test_norm2_unit_basis(self):
        for k in range(4):
            e = np.zeros(4)
            e[k] = 1.0
            assert pc.norm2(e) == 1.0

    def test_axpy(self):
        got = pc.axpy(2.0, np.array([1.0, 2.0]), np.array([10.0, 20.0]))
        assert np.array_equal(got, [12.0, 24.0])

    def test_dimension_checks(self):
        with pytest.raises(ValueError):
            pc.dot(np.ones(3), np.ones(4))
        with pytest.raises(ValueError):
            pc.axpy(1.0, np.ones(3), np.ones(4))

    @settings(max_examples=20, deadline=None)
    @given(n=st.integers(1, 60), seed=st.integers(0, 1000))
    def test_dot_matches_numpy(self, n, seed):
        rng = np.random.default_rng(seed)
        x, y = rng.standard_normal(n), rng.standard_normal(n)
        assert pc.dot(x, y) == float(np.dot(x, y))

    def test_as_vector_rejects_nonfinite(self):
        with pytest.raises(ValueError, match="finite"):
            as_vector(np.array([1.0, np.inf]))


class TestMatrixMarket:
    def test_single_entry(self):
        text = "%%MatrixMarket matrix coordinate real symmetric\n1 1 1\n1 1 5.0\n"
        A = pc.read_matrix_market(io.StringIO(text))
        assert A.n == 1 and np.array_equal(A.to_dense(), [[5.0]])
        assert A.source_entries == 1

    def test_lower_triangle_matches_generator(self):
        want = pc.gen_laplacian_2d(3, 1)
        text = (
            "%%MatrixMarket matrix coordinate real symmetric\n"
            "% 1-D Laplacian on 3 points\n"
            "3 3 5\n"
            "1 1 4.0\n"
            "2 1 -1.0\n"
            "2 2 4.0\n"
            "3 2 -1.0\n"
            "3 3 4.0\n"
        )
        got = pc.read_matrix_market(io.StringIO(text))
        assert np.array_equal(got.row_ptr, want.row_ptr)
        assert np.array_equal(got.col_idx, want.col_idx)
        assert np.array_equal(got.values, want.values)

    def test_round_trip_is_identity(self):
        A = pc.gen_laplacian_2d(5, 4)
        buf = io.StringIO()
        pc.write_matrix_market(A, buf, comment="round trip")
        buf.seek(0)
        B = pc.read_matrix_market(buf)
        assert np.array_equal(A.row_ptr, B.row_ptr)
        assert np.array_equal(A.col_idx, B.col_idx)
        assert np.array_equal(A.values, B.values)

    @settings(max_examples=15, deadline=None)
    @given(n=st.integers(2, 25), seed=st.integers(0, 500))
    def test_round_trip_random_spd(self, n, seed):
        A = symmetric_random_spd(n, 30.0, seed=seed)
        buf = io.StringIO()
        pc.write_matrix_market(A, buf)
        buf.seek(0)
        B = pc.read_matrix_market(buf)
        assert np.array_equal(A.values, B.values)
        assert np.array_equal(A.col_idx, B.col_idx)

    def test_general_symmetric_accepted(self):
        text = (
            "%%MatrixMarket matrix coordinate real general\n"
            "2 2 4\n1 1 2.0\n1 2 -1.0\n2 1 -1.0\n2 2 2.0\n"
        )
        A = pc.read_matrix_market(io.StringIO(text))
        assert np.array_equal(A.to_dense(), [[2.0, -1.0], [-1.0, 2.0]])

    def test_general_asymmetric_rejected(self):
        text = (
            "%%MatrixMarket matrix coordinate real general\n"
            "2 2 4\n1 1 2.0\n1 2 -1.0\n2 1 -0.5\n2 2 2.0\n"
        )
        with pytest.raises(pc.MatrixFormatError, match="general"):
            pc.read_matrix_market(io.StringIO(text))

    @pytest.mark.parametrize("field", ["complex", "pattern"])
    def test_unsupported_field_named(self, field):
        text = f"%%MatrixMarket matrix coordinate {field} symmetric\n1 1 1\n1 1 1\n"
        with pytest.raises(pc.MatrixFormatError, match=field):
            pc.read_matrix_market(io.StringIO(text))

    def test_out_of_range_reports_line(self):
        text = "%%MatrixMarket matrix coordinate real symmetric\n2 2 2\n1 1 1.0\n3 1 2.0\n"
        with pytest.raises(pc.MatrixFormatError, match="line 4"):
            pc.read_matrix_market(io.StringIO(text))

    def test_blank_lines_and_comments_tolerated(self):
        text = (
            "%%MatrixMarket matrix coordinate real symmetric\n"
            "% comment\n\n2 2 2\n\n1 1 3.0\n% another\n2 2 4.0\n\n"
        )
        A = pc.read_matrix_market(io.StringIO(text))
        assert np.array_equal(A.to_dense(), [[3.0, 0.0], [0.0, 4.0]])

    def test_duplicate_entry_rejected(self):
        text = "%%MatrixMarket matrix coordinate real symmetric\n2 2 3\n1 1 1.0\n2 1 2.0\n1 2 2.0\n"
        with pytest.raises(pc.MatrixFormatError, match="duplicate"):
            pc.read_matrix_market(io.StringIO(text))
