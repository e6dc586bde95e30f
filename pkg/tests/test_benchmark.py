"""Benchmark driver: configuration layering, single runs, suites, reports and the scripts."""

import json

import pandas as pd
import pytest
import yaml

from contact_tlamg.benchmark import (
    DEFAULT_CONFIG,
    BenchmarkRow,
    BenchmarkRunner,
    RunConfig,
    deep_merge,
    load_config,
    run_benchmark,
    run_suite,
    timestamped_report_path,
    write_report,
)
from contact_tlamg.exceptions import ConfigError


def _config(**sections):
    base = {"problem": {"model": "model3", "resolution": 4}, "runtime": {"cache_dir": None}}
    return deep_merge(base, sections)


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------
def test_deep_merge_skips_none():
    merged = deep_merge({"a": {"b": 1, "c": 2}, "d": 3}, {"a": {"b": 5, "c": None}, "d": None, "e": 7})
    assert merged == {"a": {"b": 5, "c": 2}, "d": 3, "e": 7}


def test_load_config_defaults_and_file(tmp_path):
    assert load_config() == DEFAULT_CONFIG
    path = tmp_path / "run.yml"
    path.write_text("solver:\n  max_iterations: 7\n", encoding="utf-8")
    cfg = load_config(path)
    assert cfg["solver"]["max_iterations"] == 7
    assert cfg["solver"]["rel_tolerance"] == 1e-8
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.yml")


def test_get_config_dot_path():
    runner = BenchmarkRunner(_config())
    assert runner.get_config("problem.resolution") == 4
    assert runner.get_config("solver.restart", 50) == 50
    assert runner.get_config("no.such.key", "x") == "x"


@pytest.mark.parametrize("sections", [
    {"problem": {"model": "model3", "import_dir": "somewhere"}},
    {"problem": {"model": ""}},
    {"problem": {"model": "model3", "resolution": 1}},
    {"problem": {"model": "model7"}},
    {"problem": {"model": "model3", "mismatch": "-1"}},
    {"problem": {"model": "model3"}, "preconditioner": {"kind": "ilu"}},
    {"problem": {"model": "model3"}, "preconditioner": {"smoother": "sor"}},
    {"problem": {"model": "model3"}, "solver": {"max_iterations": 0}},
])
def test_run_config_rejects(sections):
    with pytest.raises(ConfigError):
        RunConfig.from_mapping(deep_merge(DEFAULT_CONFIG, sections))


def test_run_config_labels():
    run = RunConfig.from_mapping(deep_merge(DEFAULT_CONFIG, {"problem": {"model": "2", "resolution": 8}}))
    assert run.problem_label == "model2-r8"
    assert run.precond.label == "TLAMG:P~d/R~(B_F)"
    simple = deep_merge(DEFAULT_CONFIG, {"preconditioner": {"kind": "simple"}})
    assert RunConfig.from_mapping(simple).precond.label == "SIMPLE"


# ---------------------------------------------------------------------------
# Runs
# ---------------------------------------------------------------------------
def test_two_level_run():
    runner = BenchmarkRunner(_config())
    row = runner.run(runner.run_config())
    assert row.converged and not row.error
    assert row.r_rel <= 1e-8
    assert row.NIT <= 40
    assert row.constraint_residual <= 1e-6
    assert row.residual_history[0] == 1.0
    assert row.nnz_P > 0 and row.nnz_AH > 0
    assert row.dofs == row.n_coarse + row.n_fine


def test_runs_are_deterministic():
    runner = BenchmarkRunner(_config())
    first = runner.run(runner.run_config())
    second = runner.run(runner.run_config())
    assert first.NIT == second.NIT
    assert first.residual_history == second.residual_history


@pytest.mark.parametrize("kind,label", [("simple", "SIMPLE"), ("plain_amg", "AMG"), ("none", "GCR")])
def test_baseline_rows(kind, label):
    runner = BenchmarkRunner(_config(problem={"model": "model2"},
                                     preconditioner={"kind": kind},
                                     solver={"max_iterations": 20}))
    row = runner.run(runner.run_config())
    assert row.method == label
    assert row.NIT >= 1
    assert row.nnz_P == -1


def test_export_and_import(tmp_path):
    export_dir = tmp_path / "export"
    runner = BenchmarkRunner(_config(output={"export_dir": str(export_dir)}))
    row = runner.run(runner.run_config())
    for name in ("A.mtx", "D.mtx", "M.mtx", "rhs.mtx", "manifest.yml", "A_H.mtx", "mesh.txt"):
        assert (export_dir / name).exists()

    imported = runner.run(runner.run_config({"problem": {"model": "", "import_dir": str(export_dir)},
                                             "output": {"export_dir": ""}}))
    assert imported.model == "export"
    assert imported.NIT == row.NIT


def test_system_cache(tmp_path):
    config = _config(runtime={"cache_dir": str(tmp_path / "cache")})
    runner = BenchmarkRunner(config)
    run = runner.run_config()
    first = runner.build_system(run)
    assert len(runner.cache) == 1
    again = BenchmarkRunner(config).build_system(run)
    assert again.n == first.n
    assert abs(again.A - first.A).max() == 0.0


def test_run_benchmark_default_runner():
    run = RunConfig.from_mapping(_config(problem={"resolution": 2}))
    row = run_benchmark(run)
    assert isinstance(row, BenchmarkRow)
    assert row.model == "model3-r2"


# ---------------------------------------------------------------------------
# Suites and reports
# ---------------------------------------------------------------------------
SUITES = {
    "tiny": {
        "description": "two small cases",
        "base": {"problem": {"model": "model3", "resolution": 2}},
        "cases": [
            {"name": "ideal", "preconditioner": {"interpolation": "ideal"}},
            {"name": "jac", "preconditioner": {"smoother": "jac"}},
        ],
    },
    "empty": {"cases": []},
}


def test_run_suite():
    df = run_suite("tiny", SUITES, _config(), progress=False)
    assert list(df["case"]) == ["ideal", "jac"]
    assert {"model", "method", "NIT", "converged"} <= set(df.columns)
    assert df.loc[0, "method"] == "TLAMG:P^d/R~(B_F)"


def test_run_suite_keeps_going_after_invalid_case():
    suites = {"mixed": {"base": {"problem": {"model": "model3", "resolution": 2}},
                        "cases": [{"name": "bad", "preconditioner": {"smoother": "sor"}},
                                  {"name": "good"}]}}
    df = run_suite("mixed", suites, _config(), progress=False)
    assert list(df["case"]) == ["bad", "good"]
    assert not df.loc[0, "converged"]
    assert "sor" in df.loc[0, "error"]
    assert df.loc[1, "converged"]


def test_run_suite_errors():
    with pytest.raises(ConfigError):
        run_suite("missing", SUITES, _config(), progress=False)
    with pytest.raises(ConfigError):
        run_suite("empty", SUITES, _config(), progress=False)


def test_write_report(tmp_path):
    rows = [BenchmarkRow(model="model3-r4", method="SIMPLE", NIT=3, residual_history=[1.0, 0.1, 1e-9])]
    csv_path = write_report(rows, tmp_path / "out" / "report.csv", "csv")
    df = pd.read_csv(csv_path)
    assert df.loc[0, "NIT"] == 3
    assert "residual_history" not in df.columns

    json_path = write_report(rows, tmp_path / "report.json", "json")
    records = json.loads(json_path.read_text(encoding="utf-8"))
    assert records[0]["residual_history"] == [1.0, 0.1, 1e-9]

    with pytest.raises(ConfigError):
        write_report(rows, tmp_path / "report.xml", "xml")


def test_timestamped_report_path(tmp_path):
    path = timestamped_report_path(tmp_path, "suite", "json")
    assert path.parent == tmp_path
    assert path.name.startswith("suite_") and path.suffix == ".json"


# ---------------------------------------------------------------------------
# Scripts
# ---------------------------------------------------------------------------
def test_overrides_from_args():
    from run_benchmark import build_parser, overrides_from_args

    args = build_parser().parse_args(["--model", "2", "--resolution", "8", "--smoother", "ssimple", "--max-it", "5"])
    overrides = overrides_from_args(args)
    assert overrides["problem"]["model"] == "2"
    assert overrides["preconditioner"]["smoother"] == "ssimple"
    assert overrides["solver"]["max_iterations"] == 5
    assert overrides["solver"]["restart"] is None

    imported = overrides_from_args(build_parser().parse_args(["--import", "some/dir"]))
    assert imported["problem"]["model"] == ""


def test_run_benchmark_script(tmp_path):
    from run_benchmark import main

    config = tmp_path / "run.yml"
    config.write_text(yaml.safe_dump({"runtime": {"cache_dir": None}}), encoding="utf-8")
    report = tmp_path / "row.json"
    status = main(["--config", str(config), "--model", "3", "--resolution", "2",
                   "--report", "json", "--output", str(report)])
    assert status == 0
    records = json.loads(report.read_text(encoding="utf-8"))
    assert records[0]["converged"] is True
    assert main(["--config", str(config), "--model", "3", "--resolution", "1"]) == 1
