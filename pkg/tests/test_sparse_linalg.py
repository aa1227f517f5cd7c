import numpy as np
import pytest
import scipy.sparse as scsp
from hypothesis import given, settings
from hypothesis import strategies as st

from crafem.assembly import assemble_operator
from crafem.femspace import build_space
from crafem.linalg import Ilu0, gmres, relative_residual, solve_general, solve_spd
from crafem.sparse import CsrMatrix, bmat, restrict

from conftest import uniform


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 12), st.integers(1, 12), st.integers(0, 60), st.integers(0, 2 ** 31))
def test_triplets_sum_duplicates_like_dense(n_rows, n_cols, nnz, seed):
    rng = np.random.default_rng(seed)
    r = rng.integers(0, n_rows, nnz)
    c = rng.integers(0, n_cols, nnz)
    v = rng.normal(size=nnz)
    A = CsrMatrix.from_triplets(n_rows, n_cols, r, c, v)
    dense = np.zeros((n_rows, n_cols))
    np.add.at(dense, (r, c), v)
    assert A.is_valid()
    assert np.allclose(A.to_dense(), dense)
    x = rng.normal(size=n_cols)
    assert np.allclose(A @ x, dense @ x)


def test_triplet_index_checks():
    with pytest.raises(IndexError):
        CsrMatrix.from_triplets(2, 2, [0, 2], [0, 0], [1.0, 1.0])


def test_matvec_dimension_check():
    with pytest.raises(ValueError):
        CsrMatrix.identity(3) @ np.ones(4)


def test_empty_rows_and_dense_roundtrip():
    a = np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 2.0], [0.0, 0.0, 0.0]])
    A = CsrMatrix.from_dense(a)
    assert A.nnz == 2
    assert np.allclose(A @ np.array([1.0, 5.0, 1.0]), [0.0, 3.0, 0.0])
    assert np.allclose(A.transpose().to_dense(), a.T)
    assert np.allclose(A.diagonal(), [0.0, 0.0, 0.0])


def test_restrict_and_bmat():
    rng = np.random.default_rng(0)
    a = rng.normal(size=(5, 4))
    A = CsrMatrix.from_dense(a)
    rows, cols = [4, 0, 2], [3, 1]
    assert np.allclose(restrict(A, rows, cols).to_dense(), a[np.ix_(rows, cols)])
    B = bmat([[A, None], [None, CsrMatrix.identity(2)]])
    assert B.shape == (7, 6)
    assert np.allclose(B.to_dense()[:5, :4], a)
    with pytest.raises(IndexError):
        restrict(A, [5], [0])


def test_matrix_market_export_reads_back(tmp_path):
    import scipy.io
    space = build_space(uniform(2))
    K = assemble_operator(space, "stiffness")
    path = tmp_path / "k.mtx"
    K.write_matrix_market(path)
    back = scipy.io.mmread(str(path)).toarray()
    assert np.allclose(back, K.to_dense(), rtol=0, atol=1e-15)


def _laplacian(levels):
    space = build_space(uniform(levels))
    K = assemble_operator(space, "stiffness")
    inner = space.interior_dofs
    return restrict(K, inner, inner)


def test_pcg_solves_poisson_to_tolerance():
    A = _laplacian(6)
    b = np.random.default_rng(1).random(A.n_rows)
    x, rep = solve_spd(A, b, tol=1e-12)
    assert rep.converged and rep.method == "pcg"
    assert relative_residual(A, x, b) <= 1e-12
    assert np.allclose(x, scsp.linalg.spsolve(A.to_scipy().tocsc(), b), rtol=1e-8)


def test_pcg_zero_rhs_and_warm_start():
    A = _laplacian(4)
    x, rep = solve_spd(A, np.zeros(A.n_rows))
    assert rep.iterations == 0 and not np.any(x)
    b = np.ones(A.n_rows)
    exact, _ = solve_spd(A, b, tol=1e-13)
    _, rep = solve_spd(A, b, tol=1e-10, x0=exact)
    assert rep.iterations <= 1


def test_pcg_rejects_nonpositive_diagonal():
    with pytest.raises(ValueError):
        solve_spd(CsrMatrix.from_dense(-np.eye(3)), np.ones(3))


def test_ilu0_is_exact_for_tridiagonal():
    n = 30
    a = 4 * np.eye(n) - np.eye(n, k=1) - 2 * np.eye(n, k=-1)
    A = CsrMatrix.from_dense(a)
    ilu = Ilu0(A)
    assert ilu.ok
    r = np.arange(n, dtype=float)
    assert np.allclose(ilu.solve(r), np.linalg.solve(a, r))


def test_ilu0_reports_zero_pivot():
    A = CsrMatrix.from_dense(np.array([[0.0, 1.0], [1.0, 0.0]]))
    assert Ilu0(A).zero_pivot == 0


def test_gmres_on_nonsymmetric_system():
    rng = np.random.default_rng(2)
    n = 80
    a = np.eye(n) * 5 + rng.normal(scale=0.5, size=(n, n)) * (rng.random((n, n)) < 0.1)
    A = CsrMatrix.from_dense(a)
    b = rng.normal(size=n)
    x, rep = solve_general(A, b, tol=1e-12)
    assert rep.converged and rep.method == "gmres+ilu0"
    assert np.allclose(x, np.linalg.solve(a, b), rtol=1e-9, atol=1e-11)
    x2, rep2 = gmres(A, b, tol=1e-12, restart=10)
    assert rep2.converged
    assert np.allclose(x2, x, atol=1e-9)


def test_gmres_falls_back_without_preconditioner(caplog):
    a = np.array([[0.0, 2.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 3.0]])
    x, rep = solve_general(CsrMatrix.from_dense(a), np.array([2.0, 1.0, 3.0]), tol=1e-12)
    assert rep.converged and rep.method == "gmres"
    assert np.allclose(x, [1.0, 1.0, 1.0])
    assert "zero pivot" in caplog.text


def test_dimension_mismatch_raises():
    with pytest.raises(ValueError):
        solve_spd(CsrMatrix.identity(3), np.ones(2))
