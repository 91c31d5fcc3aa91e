import numpy as np
import pytest

from viscofrac.geometry import CrackComponent, CrackSet
from viscofrac.mesh import CRACK, DIRICHLET, MeshError, build_mesh, read_triangle_files, write_triangle_files
from viscofrac.model import DomainSpec

from conftest import edge_crack

SQUARE = DomainSpec.rectangle(dirichlet_edges=(0, 2))


@pytest.fixture(scope="module")
def mesh():
    return build_mesh(SQUARE, edge_crack(0.3), 1 / 16, 8)


def test_positive_areas_cover_domain(mesh):
    assert np.all(mesh.area > 0)
    assert mesh.area.sum() == pytest.approx(1.0, rel=1e-12)


def test_crack_faces_duplicated(mesh):
    faces = mesh.facets[mesh.facet_kind == CRACK]
    assert len(faces) > 0
    # every duplicated group sits on the crack line, the tip is not duplicated
    for g in mesh.crack_node_groups:
        x = mesh.nodes[g]
        np.testing.assert_allclose(x[:, 1], 0.5, atol=1e-12)
        assert x[0, 0] < 0.3 - 1e-12
    assert mesh.tip_nodes[0] >= 0
    np.testing.assert_allclose(mesh.nodes[mesh.tip_nodes[0]], [0.3, 0.5])
    # upper and lower faces: the same length each
    L = np.linalg.norm(np.diff(mesh.nodes[faces], axis=1)[:, 0], axis=1).sum()
    assert L == pytest.approx(0.6, rel=1e-12)


def test_tip_refinement(mesh):
    assert mesh.tip_size(0) <= mesh.h / 8 * 1.0 + 1e-12


def test_dirichlet_nodes_on_bottom_and_top(mesh):
    y = mesh.nodes[mesh.dirichlet_nodes, 1]
    assert np.all((np.abs(y) < 1e-12) | (np.abs(y - 1) < 1e-12))
    assert np.any(mesh.facet_kind == DIRICHLET)


def test_moved_rejects_inversion(mesh):
    d = np.zeros_like(mesh.nodes)
    d[mesh.tip_nodes[0]] = [-0.5, 0.0]
    with pytest.raises(MeshError):
        mesh.moved(d)


def test_uncracked_mesh():
    m = build_mesh(SQUARE, None, 1 / 8)
    assert m.n_duplicated == 0
    assert m.area.sum() == pytest.approx(1.0)


def test_crack_vertex_on_corner_rejected():
    c = CrackSet((CrackComponent(np.array([[0.0, 0.0], [0.2, 0.2]]), 0.1),), 0.05)
    with pytest.raises(MeshError):
        build_mesh(SQUARE, c, 1 / 8)


def test_triangle_files_roundtrip(mesh, tmp_path):
    paths = write_triangle_files(mesh, str(tmp_path / "m"))
    assert len(paths) == 3
    d = read_triangle_files(str(tmp_path / "m"))
    np.testing.assert_array_equal(d["nodes"], mesh.nodes)
    np.testing.assert_array_equal(d["triangles"], mesh.triangles)
    np.testing.assert_array_equal(d["edge_kind"], mesh.facet_kind)
