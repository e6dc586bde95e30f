"""GCR and PCG."""

import numpy as np
import pytest
import scipy.sparse as sp

from contact_tlamg.exceptions import Breakdown, ConfigError, DimensionMismatch, IndefiniteDetected
from contact_tlamg.krylov import SolverConfig, as_operator, cg_solve, gcr_solve


def _spd(n=40, seed=0):
    rng = np.random.default_rng(seed)
    B = rng.standard_normal((n, n))
    return B @ B.T + n * np.eye(n)


def _nonsymmetric(n=30, seed=1):
    rng = np.random.default_rng(seed)
    return rng.standard_normal((n, n)) + 2.0 * np.sqrt(n) * np.eye(n)


def test_solver_config_validation():
    with pytest.raises(ConfigError):
        SolverConfig(max_iterations=0)
    with pytest.raises(ConfigError):
        SolverConfig(rel_tolerance=0.0)
    with pytest.raises(ConfigError):
        SolverConfig(restart=0)
    assert SolverConfig(max_iterations=50).directions == 50
    assert SolverConfig(restart=10).directions == 10


def test_gcr_exact_preconditioner_converges_in_one_step():
    A = _nonsymmetric()
    b = np.ones(A.shape[0])
    Ainv = np.linalg.inv(A)
    x, report = gcr_solve(A, Ainv, b)
    assert report.converged
    assert report.iterations == 1
    assert np.allclose(A @ x, b)


def test_gcr_unpreconditioned_history():
    A = _nonsymmetric()
    b = np.arange(1.0, A.shape[0] + 1)
    x, report = gcr_solve(A, None, b, SolverConfig(max_iterations=200, rel_tolerance=1e-10))
    assert report.converged
    assert report.residual_history[0] == 1.0
    assert len(report.residual_history) == report.iterations + 1
    # GCR minimizes the residual over a growing space: the history never increases
    assert np.all(np.diff(report.residual_history) <= 1e-12)
    assert np.linalg.norm(b - A @ x) <= 1e-10 * np.linalg.norm(b)
    assert report.final_residual == report.residual_history[-1]


def test_gcr_restart_still_converges():
    A = _nonsymmetric()
    b = np.ones(A.shape[0])
    _, full = gcr_solve(A, None, b, SolverConfig(max_iterations=500))
    _, restarted = gcr_solve(A, None, b, SolverConfig(max_iterations=500, restart=5))
    assert full.converged and restarted.converged
    assert restarted.iterations >= full.iterations


def test_gcr_zero_rhs():
    A = _spd(5)
    x, report = gcr_solve(A, None, np.zeros(5), x0=np.ones(5))
    assert report.converged
    assert report.iterations == 0
    assert np.all(x == 0.0)


@pytest.mark.parametrize("solve", [gcr_solve, cg_solve])
def test_exact_initial_guess(solve):
    # integer entries keep A x exact, so the initial residual is exactly zero
    A = 2.0 * np.eye(6) + np.ones((6, 6))
    x_true = np.arange(1.0, 7.0)
    x, report = solve(A, None, A @ x_true, x0=x_true)
    assert report.converged
    assert report.iterations == 0
    assert report.residual_history == [1.0]
    assert report.final_residual == 0.0
    assert np.array_equal(x, x_true)


def test_gcr_final_residual_is_relative_to_rhs():
    A = _spd(30)
    b = np.ones(30)
    x0 = np.full(30, 5.0)
    x, report = gcr_solve(A, None, b, SolverConfig(max_iterations=3), x0=x0)
    assert report.residual_history[0] == 1.0
    true_rel = np.linalg.norm(b - A @ x) / np.linalg.norm(b)
    assert report.final_residual == pytest.approx(true_rel, rel=1e-8)


def test_gcr_reports_non_convergence():
    A = _nonsymmetric()
    _, report = gcr_solve(A, None, np.ones(A.shape[0]), SolverConfig(max_iterations=2))
    assert not report.converged
    assert report.iterations == 2


def test_gcr_breakdown_on_singular_preconditioner():
    A = np.eye(4)
    M = np.zeros((4, 4))
    with pytest.raises(Breakdown) as info:
        gcr_solve(A, M, np.ones(4))
    assert info.value.iteration == 1
    assert info.value.report.failure


def test_gcr_accepts_callable_and_sparse():
    A = sp.csr_matrix(_spd(20))
    d = A.diagonal()
    seen = []
    x, report = gcr_solve(A, lambda r: r / d, np.ones(20), callback=lambda k, rel: seen.append(k))
    assert report.converged
    assert seen == list(range(1, report.iterations + 1))


def test_cg_matches_direct_solve():
    A = _spd()
    b = np.ones(A.shape[0])
    x, report = cg_solve(A, np.diag(1.0 / np.diag(A)), b, SolverConfig(rel_tolerance=1e-12, max_iterations=200))
    assert report.converged
    assert np.allclose(x, np.linalg.solve(A, b))


def test_gcr_residuals_never_exceed_cg_on_spd():
    """On SPD matrices GCR minimizes the residual over the same Krylov space CG works in."""
    A = _spd(n=50, seed=3)
    b = np.random.default_rng(3).standard_normal(50)
    cfg = SolverConfig(max_iterations=100, rel_tolerance=1e-10)
    _, gcr = gcr_solve(A, None, b, cfg)
    _, cg = cg_solve(A, None, b, cfg)
    assert gcr.converged and cg.converged
    assert gcr.iterations <= cg.iterations
    steps = min(len(gcr.residual_history), len(cg.residual_history))
    assert np.all(np.asarray(gcr.residual_history[:steps]) <= np.asarray(cg.residual_history[:steps]) * (1 + 1e-8))


def test_cg_detects_indefinite():
    A = np.diag([1.0, -1.0, 2.0])
    with pytest.raises(IndefiniteDetected):
        cg_solve(A, None, np.array([0.0, 1.0, 0.0]))


def test_as_operator():
    with pytest.raises(DimensionMismatch):
        as_operator(None)
    with pytest.raises(DimensionMismatch):
        as_operator(lambda x: x)
    with pytest.raises(TypeError):
        as_operator("not an operator", 3)
    I3 = as_operator(None, 3)
    assert np.array_equal(I3.matvec(np.arange(3.0)), np.arange(3.0))
