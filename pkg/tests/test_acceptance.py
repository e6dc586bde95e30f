"""Production-size runs of the three models (slow; run with ``pytest -m slow``)."""

import pytest

from contact_tlamg.benchmark import BenchmarkRunner

pytestmark = pytest.mark.slow


def _run(model, resolution, **sections):
    config = {"problem": {"model": model, "resolution": resolution}, "runtime": {"cache_dir": None}}
    config.update(sections)
    runner = BenchmarkRunner(config)
    return runner.run(runner.run_config())


@pytest.mark.parametrize("model", ["model1", "model2", "model3"])
@pytest.mark.parametrize("interpolation", ["simplified", "ideal"])
@pytest.mark.parametrize("smoother", ["exactf", "ssimple"])
def test_two_level_at_scale(model, interpolation, smoother):
    row = _run(model, 96, preconditioner={"interpolation": interpolation, "smoother": smoother,
                                          "approx_eps": 1e-10, "coarse": "amg"})
    assert row.method.startswith(f"TLAMG:P{'~' if interpolation == 'simplified' else '^'}d/")
    assert row.dofs >= 100_000
    assert row.converged
    assert row.NIT <= 40
    assert row.r_rel <= 1e-8
    assert row.constraint_residual <= 1e-6


@pytest.mark.parametrize("model", ["model1", "model3"])
def test_jacobi_smoothing_fails(model):
    row = _run(model, 32, preconditioner={"smoother": "jac"}, solver={"max_iterations": 100})
    assert not row.converged


@pytest.mark.parametrize("model", ["model1", "model3"])
def test_plain_amg_fails(model):
    row = _run(model, 32, preconditioner={"kind": "plain_amg"},
               solver={"max_iterations": 2000, "restart": 100})
    assert not row.converged


@pytest.mark.parametrize("model", ["model1", "model3"])
def test_two_level_beats_simple(model):
    solver = {"max_iterations": 2000, "restart": 100}
    two_level = _run(model, 32, solver=solver)
    simple = _run(model, 32, preconditioner={"kind": "simple"}, solver=solver)
    assert two_level.converged
    assert not simple.converged or simple.NIT > two_level.NIT
