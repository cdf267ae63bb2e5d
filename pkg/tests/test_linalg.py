"""Sparse construction and the solver residual contracts."""
import numpy as np
import pytest
import scipy.sparse as sp

from sks_api.linalg import SolverError, from_triplets, solve_general, solve_spd, spmv


def test_from_triplets_sums_duplicates():
    A = from_triplets(2, 2, [(0, 0, 1.0), (0, 0, 2.0), (1, 0, -1.0), (1, 1, 4.0)])
    assert A.has_canonical_format
    assert np.array_equal(A.toarray(), [[3.0, 0.0], [-1.0, 4.0]])


def test_from_triplets_out_of_range():
    with pytest.raises(ValueError):
        from_triplets(2, 2, [(2, 0, 1.0)])


def test_spmv_dimension_mismatch():
    A = from_triplets(2, 3, [(0, 0, 1.0)])
    with pytest.raises(ValueError):
        spmv(A, np.ones(2))
    assert np.array_equal(spmv(A, np.array([2.0, 0.0, 0.0])), [2.0, 0.0])


def _spd(rng, n=40):
    B = rng.standard_normal((n, n))
    return sp.csr_matrix(B @ B.T + n * np.eye(n))


def test_solve_spd_meets_tolerance(rng):
    A = _spd(rng)
    b = rng.standard_normal(A.shape[0])
    x, report = solve_spd(A, b, tol=1e-10)
    assert report.converged
    assert report.iterations > 0
    assert np.linalg.norm(A @ x - b) <= 1e-10 * np.linalg.norm(b)


def test_solve_spd_zero_rhs(rng):
    A = _spd(rng, 10)
    x, report = solve_spd(A, np.zeros(10))
    assert np.array_equal(x, np.zeros(10))
    assert report.iterations == 0


def test_solve_spd_reports_non_convergence(rng):
    A = _spd(rng, 50)
    with pytest.raises(SolverError) as excinfo:
        solve_spd(A, rng.standard_normal(50), tol=1e-14, max_iter=1)
    assert excinfo.value.kind == "not_converged"
    assert not excinfo.value.report.converged


@pytest.mark.parametrize("method", ["lu", "bicgstab"])
def test_solve_general_nonsymmetric(rng, method):
    n = 30
    A = sp.csr_matrix(rng.standard_normal((n, n)) + 10 * n * np.eye(n))
    b = rng.standard_normal(n)
    x, report = solve_general(A, b, method=method)
    assert report.method == method
    assert np.linalg.norm(A @ x - b) <= 1e-10 * np.linalg.norm(b)


def test_solve_general_singular():
    A = sp.csr_matrix(np.array([[1.0, 0.0], [0.0, 0.0]]))
    with pytest.raises(SolverError) as excinfo:
        solve_general(A, np.array([1.0, 1.0]))
    assert excinfo.value.kind == "singular"


def test_solve_general_unknown_method():
    with pytest.raises(ValueError):
        solve_general(sp.identity(2, format="csr"), np.ones(2), method="gmres")


@pytest.mark.parametrize("n", [1, 5, 20, 60, 120, 200])
def test_solve_spd_on_gram_matrices(n):
    rng = np.random.default_rng(n)
    B = rng.standard_normal((n, n))
    A = sp.csr_matrix(B.T @ B + np.eye(n))
    b = rng.standard_normal(n)
    x, report = solve_spd(A, b, tol=1e-10)
    assert report.converged
    assert np.linalg.norm(spmv(A, x) - b) <= 1e-10 * np.linalg.norm(b)


@pytest.mark.parametrize("n", [10, 50, 150])
def test_solve_general_agrees_with_solve_spd(n):
    rng = np.random.default_rng(100 + n)
    B = rng.standard_normal((n, n))
    dense = B.T @ B + np.eye(n)
    A = sp.csr_matrix(dense)
    b = rng.standard_normal(n)
    tol = 1e-10
    x_cg, _ = solve_spd(A, b, tol=tol)
    x_lu, _ = solve_general(A, b, tol=tol)
    assert np.linalg.norm(A @ (x_lu - x_cg)) <= 10 * tol * np.linalg.norm(b)
    assert np.linalg.norm(x_lu - x_cg) <= 10 * tol * np.linalg.cond(dense) * np.linalg.norm(x_lu)
