"""Dense checks: the brute-force battery and the helpers it is built from."""

import numpy as np
import pytest

from contact_tlamg.exceptions import ConfigError
from contact_tlamg.oracle import (
    CheckResult,
    DenseSnapshot,
    check_additive_form,
    check_aff_inverse,
    check_direct_method,
    check_matrix_free,
    check_residual_bound,
    defective_tolerance,
    dense_operator,
    run_all_checks,
    spectrum_distance,
)
from contact_tlamg.twolevel import TwoLevelConfig, TwoLevelPreconditioner


@pytest.fixture(scope="module")
def snapshots(small_systems):
    return {name: DenseSnapshot.from_system(sys) for name, sys in small_systems.items()}


def test_full_battery_passes(small_system):
    results = run_all_checks(small_system)
    failed = {c.name: (c.value, c.tolerance) for c in results if not c.passed}
    assert not failed
    names = {c.name for c in results}
    assert {"galerkin", "direct_method", "spectrum_simplified[amg]", "matrix_free[ideal]"} <= names


def test_snapshot_size_cap(small_systems):
    with pytest.raises(ConfigError):
        DenseSnapshot.from_system(small_systems["model1"], max_dofs=10)


def test_snapshot_blocks(snapshots, small_systems):
    snap, sys = snapshots["model3"], small_systems["model3"]
    assert snap.n == sys.n
    assert snap.S.shape == (sys.n_coarse, sys.n_coarse)
    assert np.allclose(snap.D @ snap.P, snap.M)
    assert np.allclose(snap.A_FF[snap.split.n_slave:, snap.split.n_slave:], 0.0)


def test_dense_operator_recovers_matrix():
    A = np.arange(12, dtype=float).reshape(3, 4)[:, :3]
    assert np.array_equal(dense_operator(lambda x: A @ x, 3), A)
    assert dense_operator(lambda x: x, 0).shape == (0, 0)


def test_spectrum_distance_matches_optimally():
    assert spectrum_distance(np.array([1.0, 2.0, 3.0]), np.array([3.1, 1.0, 2.0])) == pytest.approx(0.1)
    pair = np.array([1 + 1j, 1 - 1j])
    assert spectrum_distance(pair, pair[::-1]) == 0.0
    assert spectrum_distance(np.array([]), np.array([])) == 0.0
    with pytest.raises(ConfigError):
        spectrum_distance(np.ones(2), np.ones(3))


def test_aff_inverse_closed_form(snapshots):
    for snap in snapshots.values():
        assert check_aff_inverse(snap) <= 1e-12


def test_exact_f_smoother_inverts_fine_block(snapshots):
    snap = snapshots["model1"]
    b = np.random.default_rng(0).standard_normal(snap.n)
    x = snap.BF_inv @ b
    F = snap.split.F
    assert np.allclose(snap.A_FF @ x[F], b[F])
    assert np.all(x[snap.split.C] == 0.0)


def test_jacobi_is_not_a_direct_method(snapshots):
    snap = snapshots["model2"]
    assert check_direct_method(snap, "exactf") <= 1e-10
    assert check_direct_method(snap, "jac") > 1e-2


def test_unknown_smoother(snapshots):
    with pytest.raises(ConfigError):
        snapshots["model2"].smoother_inverse("sor")


@pytest.mark.parametrize("setting", ["f_only", "ssimple"])
@pytest.mark.parametrize("delta", [1e-2, 1e-6])
def test_residual_bound(snapshots, setting, delta):
    bound = check_residual_bound(snapshots["model3"], delta=delta, setting=setting)
    assert bound.holds
    assert bound.delta <= 10 * delta


def test_residual_bound_rejects_unknown_setting(snapshots):
    with pytest.raises(ConfigError):
        check_residual_bound(snapshots["model3"], delta=1e-2, setting="jacobi")


def test_dense_cycle_matches_matrix_free_cycle(small_systems, snapshots):
    sys, snap = small_systems["model1"], snapshots["model1"]
    pc = TwoLevelPreconditioner.setup(sys, TwoLevelConfig(
        interpolation="simplified", restriction="ideal", approx_eps=0.0, coarse="direct"))
    dense = snap.two_level_inverse("exactf", P=snap.P_tilde, R=snap.R_hat, coarse_inv=np.linalg.inv(snap.S))
    applied = dense_operator(pc.apply, sys.n)
    assert np.linalg.norm(applied - dense) <= 1e-10 * np.linalg.norm(dense)


def test_matrix_free_with_dropped_P(small_systems):
    sys = small_systems["model2"]
    eps = 1e-3
    snap = DenseSnapshot.from_system(sys, eps=eps)
    pc = TwoLevelPreconditioner.setup(sys, TwoLevelConfig(interpolation="simplified", approx_eps=eps,
                                                          coarse="direct"))
    worst = check_matrix_free(snap, pc, n_vectors=5)
    assert worst["interpolation"] <= 1e-12
    assert worst["restriction"] <= 1e-12


def test_defective_tolerance():
    assert defective_tolerance(1.0) == 1e-6
    assert defective_tolerance(1e6) == pytest.approx(10 * np.sqrt(np.finfo(float).eps) * 1e6)


def test_check_result():
    assert CheckResult("a", 1e-12, 1e-10).passed
    assert not CheckResult("b", float("nan"), 1e-10).passed
    assert not CheckResult("c", 2.0, 1.0).passed
    assert CheckResult("d", 0.0, 1.0).to_dict() == {"check": "d", "value": 0.0, "tolerance": 1.0, "passed": True}


def test_additive_form_with_ideal_transfers(snapshots):
    """Every ordering vanishes with ideal transfers; the deviation stays at round-off."""
    for snap in snapshots.values():
        dev = check_additive_form(snap)
        assert max(dev.values()) <= 1e-12


def test_additive_form_detects_wrong_interpolation(snapshots):
    snap = snapshots["model3"]
    nC = snap.split.n_coarse
    P_bad = snap.P_hat.copy()
    P_bad[nC:, :] *= 0.9
    dev = check_additive_form(snap, P=P_bad, R=snap.R_hat)
    # Q^T A P no longer vanishes, so the post-smoothed ordering splits off
    assert dev["post"] > 1e-8


def test_battery_reports_additive_form(small_systems):
    results = {c.name: c for c in run_all_checks(small_systems["model1"])}
    assert results["additive_form[ideal]"].passed
    assert results["additive_form[ideal]"].tolerance == 1e-12
    assert results["direct_method"].tolerance == 1e-10
