"""Export and import of saddle systems, including malformed manifests."""

import numpy as np
import pytest
import yaml

from contact_tlamg.exceptions import FormatError
from contact_tlamg.krylov import SolverConfig, gcr_solve
from contact_tlamg.sparsela import read_matrix_market, write_matrix_market
from contact_tlamg.system_io import MANIFEST_NAME, export_system, import_system
from contact_tlamg.twolevel import TwoLevelPreconditioner


@pytest.fixture
def exported(tmp_path, small_systems):
    sys = small_systems["model2"]
    return sys, export_system(sys, tmp_path / "model2")


def _edit_manifest(directory, edit):
    path = directory / MANIFEST_NAME
    manifest = yaml.safe_load(path.read_text(encoding="utf-8"))
    edit(manifest)
    path.write_text(yaml.safe_dump(manifest, sort_keys=False), encoding="utf-8")


def test_export_layout(exported):
    _, directory = exported
    for name in ("A.mtx", "D.mtx", "M.mtx", "rhs.mtx", MANIFEST_NAME):
        assert (directory / name).exists()
    manifest = yaml.safe_load((directory / MANIFEST_NAME).read_text(encoding="utf-8"))
    assert list(manifest["ranges"]) == ["interior", "master", "slave", "lambda"]


def test_round_trip(exported):
    sys, directory = exported
    loaded = import_system(directory)
    assert (loaded.n_interior, loaded.n_master, loaded.n_slave, loaded.n_lambda) == \
        (sys.n_interior, sys.n_master, sys.n_slave, sys.n_lambda)
    assert abs(loaded.A - sys.A).max() == 0.0
    assert np.array_equal(loaded.rhs, sys.rhs)
    assert loaded.name == sys.name


def test_round_trip_reproduces_solve(exported):
    sys, directory = exported
    loaded = import_system(directory)
    reports = []
    for system in (sys, loaded):
        pc = TwoLevelPreconditioner.setup(system)
        _, report = gcr_solve(system.A, pc.as_linear_operator(), system.rhs, SolverConfig())
        reports.append(report)
    assert reports[0].converged
    assert reports[0].iterations == reports[1].iterations
    assert np.allclose(reports[0].residual_history, reports[1].residual_history, rtol=1e-8, atol=1e-14)


def test_mortar_files_are_optional(exported):
    _, directory = exported
    (directory / "D.mtx").unlink()
    (directory / "M.mtx").unlink()
    assert import_system(directory).n_slave > 0


def test_missing_manifest(tmp_path):
    with pytest.raises(FormatError, match="manifest not found"):
        import_system(tmp_path)


def test_invalid_yaml_reports_line(exported):
    _, directory = exported
    (directory / MANIFEST_NAME).write_text("name: broken\nranges: [0, 4\nn: 10\n", encoding="utf-8")
    with pytest.raises(FormatError) as info:
        import_system(directory)
    assert info.value.line is not None


def test_overlapping_ranges(exported):
    _, directory = exported

    def overlap(manifest):
        start, stop = manifest["ranges"]["master"]
        manifest["ranges"]["master"] = [start - 1, stop]

    _edit_manifest(directory, overlap)
    with pytest.raises(FormatError, match="overlap"):
        import_system(directory)


def test_ranges_must_cover_the_matrix(exported):
    _, directory = exported

    def shift(manifest):
        manifest["ranges"] = {k: [a + 1, b + 1] for k, (a, b) in manifest["ranges"].items()}

    _edit_manifest(directory, shift)
    with pytest.raises(FormatError):
        import_system(directory)


def test_slave_and_multiplier_counts_must_agree(exported):
    _, directory = exported

    def unbalance(manifest):
        s0, s1 = manifest["ranges"]["slave"]
        l0, l1 = manifest["ranges"]["lambda"]
        manifest["ranges"]["slave"] = [s0, s1 - 2]
        manifest["ranges"]["lambda"] = [l0 - 2, l1]

    _edit_manifest(directory, unbalance)
    with pytest.raises(FormatError, match="differs"):
        import_system(directory)


def test_missing_range_key(exported):
    _, directory = exported
    _edit_manifest(directory, lambda m: m["ranges"].pop("lambda"))
    with pytest.raises(FormatError):
        import_system(directory)


def test_short_rhs(exported):
    sys, directory = exported
    write_matrix_market(directory / "rhs.mtx", sys.rhs[:-1])
    with pytest.raises(FormatError, match="rhs"):
        import_system(directory)


def test_inconsistent_mortar_block(exported):
    _, directory = exported
    D = read_matrix_market(directory / "D.mtx")
    write_matrix_market(directory / "D.mtx", 2.0 * D)
    with pytest.raises(FormatError, match="D does not match"):
        import_system(directory)
