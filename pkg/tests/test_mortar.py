"""Mortar pairing, D/M integrals, the constraint block and the D = D~ T factorization."""

from fractions import Fraction

import numpy as np
import pytest
import scipy.sparse as sp

from contact_tlamg.elasticity import MaterialParams, assemble
from contact_tlamg.exceptions import DimensionMismatch, GeometryMismatch, NotTridiagonalizable
from contact_tlamg.meshgen import (
    ContactModelSpec,
    EdgeTag,
    ModelId,
    MultiBodyMesh,
    RectGrid,
    generate_model,
    rectangle_body,
)
from contact_tlamg.mortar import (
    BlockPermutation,
    assemble_mortar,
    build_G,
    build_pairing,
    export_matrix_market,
    factor_block_tridiag,
    kept_multipliers,
)
from contact_tlamg.sparsela import read_matrix_market


def _mesh(model="model3", resolution=2, mismatch=Fraction(3, 2), **kwargs):
    return generate_model(ContactModelSpec(model_id=ModelId.parse(model), resolution=resolution,
                                           mismatch_ratio=mismatch, **kwargs))


def test_pairing_cells_cover_interface():
    pairing = build_pairing(_mesh(), 0)
    assert pairing.length == pytest.approx(1.0)
    assert pairing.cell_lengths.sum() == pytest.approx(1.0)
    assert np.all(pairing.cell_lengths > 0)
    # slave breakpoints 0, 1/3, 2/3, 1 merged with master 0, 1/2, 1
    assert pairing.n_cells == 4
    assert np.allclose(pairing.breakpoints, [0.0, 1 / 3, 0.5, 2 / 3, 1.0])
    assert pairing.cells.shape == (4, 2)


def test_mortar_integrals():
    mortar = assemble_mortar(build_pairing(_mesh(), 0))
    D, M = mortar.D_scalar.toarray(), mortar.M_scalar.toarray()
    h = 1.0 / 3.0
    expected_D = h / 6.0 * (np.diag([2.0, 4.0, 4.0, 2.0]) + np.diag(np.ones(3), 1) + np.diag(np.ones(3), -1))
    assert np.allclose(D, expected_D)
    # both sides integrate the slave basis: row sums agree, totals equal the interface length
    assert np.allclose(D.sum(axis=1), M.sum(axis=1))
    assert M.sum() == pytest.approx(1.0)
    assert np.all(M >= -1e-15)
    assert mortar.D.shape == (8, 8) and mortar.M.shape == (8, 6)


def test_matching_interface_gives_M_equal_D():
    mesh = _mesh(mismatch=Fraction(1), allow_matching=True)
    mortar = assemble_mortar(build_pairing(mesh, 0))
    assert np.allclose(mortar.D_scalar.toarray(), mortar.M_scalar.toarray())


def test_non_collinear_extent_rejected():
    slave = RectGrid(0.0, 0.0, 1.0, 1.0, 3, 3, side_tags=(("top", EdgeTag.slave(0)), ("bottom", EdgeTag.dirichlet())))
    master = RectGrid(0.0, 1.0, 2.0, 1.0, 4, 2, side_tags=(("bottom", EdgeTag.master(0)),))
    mesh = MultiBodyMesh(bodies=(rectangle_body("s", slave), rectangle_body("m", master)))
    with pytest.raises(GeometryMismatch):
        build_pairing(mesh, 0)


def test_build_G_eliminates_clamped_slave_nodes():
    mesh = _mesh("model2")
    asm = assemble(mesh, MaterialParams())
    mortar = assemble_mortar(build_pairing(mesh, 0))
    keep = kept_multipliers(mortar, asm.dof_map)
    # the bottom slave node of each pair sits on the clamped edge
    assert keep.sum() == keep.size - 1
    G = build_G(mortar, asm.dof_map, asm.n_dofs)
    assert G.shape == (2 * int(keep.sum()), asm.n_dofs)
    clamped = mortar.slave_nodes[~keep]
    assert np.all(asm.dof_map[clamped] < 0)


def test_build_G_rigid_translation_model3():
    mesh = _mesh("model3")
    asm = assemble(mesh, MaterialParams())
    mortar = assemble_mortar(build_pairing(mesh, 0))
    G = build_G(mortar, asm.dof_map, asm.n_dofs)
    assert G.shape[0] == 2 * mortar.slave_nodes.size
    d = np.zeros(asm.n_dofs)
    d[0::2] = 1.0
    d[1::2] = -2.0
    assert np.allclose(G @ d, 0.0, atol=1e-14)


def test_factor_block_tridiag_reconstructs_D():
    mesh = _mesh("model1", resolution=4)
    mortar = assemble_mortar(build_pairing(mesh, 1))
    Dtilde, T = factor_block_tridiag(mortar.D)
    assert T.is_identity()
    rebuilt = Dtilde.to_csr() @ T.to_csr()
    assert abs(rebuilt - mortar.D).max() <= 1e-15
    x = np.random.default_rng(0).standard_normal(mortar.D.shape[0])
    assert np.allclose(mortar.D @ T.apply_inverse(Dtilde.solve(x)), x)


def test_factor_block_tridiag_with_shuffled_columns():
    mortar = assemble_mortar(build_pairing(_mesh(), 0))
    n_nodes = mortar.slave_nodes.size
    perm = np.array([2, 0, 3, 1])
    shuffle = BlockPermutation(perm).to_csr()
    D = (mortar.D @ shuffle.T).tocsr()
    Dtilde, T = factor_block_tridiag(D)
    assert not T.is_identity()
    assert abs(Dtilde.to_csr() @ T.to_csr() - D).max() <= 1e-15
    assert T.perm.size == n_nodes


def test_factor_block_tridiag_rejects_bad_input():
    with pytest.raises(DimensionMismatch):
        factor_block_tridiag(sp.csr_matrix(np.ones((4, 6))))
    dense_rows = sp.kron(sp.csr_matrix(np.ones((5, 5)) + 4 * np.eye(5)), sp.identity(2)).tocsr()
    with pytest.raises(NotTridiagonalizable):
        factor_block_tridiag(dense_rows)


def test_export_matrix_market(tmp_path):
    mesh = _mesh()
    asm = assemble(mesh, MaterialParams())
    mortar = assemble_mortar(build_pairing(mesh, 0))
    G = build_G(mortar, asm.dof_map, asm.n_dofs)
    export_matrix_market(mortar.D, mortar.M, G, tmp_path)
    assert abs(read_matrix_market(tmp_path / "G.mtx") - G).max() == 0.0
