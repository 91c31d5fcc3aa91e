import numpy as np
import pytest

from viscofrac.model import DomainSpec, LoadTrajectory, MaterialModel, ModelError, TimeScale


def test_clockwise_polygon_is_reoriented_with_edges():
    cw = DomainSpec(np.array([[0, 0], [0, 1], [1, 1], [1, 0]]), dirichlet_edges=(0,))
    assert cw.area == pytest.approx(1.0)
    # edge 0 of the input joined (0,0)-(0,1): the left edge of the reoriented square
    a, b = cw.edges
    e = cw.dirichlet_edges[0]
    assert {tuple(a[e]), tuple(b[e])} == {(0.0, 0.0), (0.0, 1.0)}


def test_self_intersecting_polygon_rejected():
    with pytest.raises(ModelError):
        DomainSpec(np.array([[0, 0], [1, 1], [1, 0], [0, 1]]), dirichlet_edges=(0,))


def test_traction_touching_dirichlet_rejected():
    with pytest.raises(ModelError):
        DomainSpec.rectangle(dirichlet_edges=(0,), traction_edges=(1,))
    DomainSpec.rectangle(dirichlet_edges=(0,), traction_edges=(2,))


def test_rectangle_geometry():
    d = DomainSpec.rectangle(0, 0, 2, 1)
    assert d.diameter == pytest.approx(np.sqrt(5))
    assert d.contains(np.array([[1, 0.5], [3, 0.5]])).tolist() == [True, False]


def test_material_validation():
    m = MaterialModel.constant(1.0, 1.0, 2.0)
    m.validate(np.random.default_rng(0).random((20, 2)))
    assert m.homogeneous
    bad = MaterialModel.constant(1.0, -1.0, 2.0)
    with pytest.raises(ModelError, match="positive definite"):
        bad.validate(np.zeros((1, 2)))


def test_numerical_gradient_of_linear_field():
    lam = lambda x: 1.0 + 2.0 * x[:, 0] - x[:, 1]
    m = MaterialModel(lam, lam, lambda x: np.ones(len(x)), (1.0, 1.0))
    gl, gm = m.gradients(np.array([[0.3, 0.4]]), 1e-3)
    np.testing.assert_allclose(gl, [[2.0, -1.0]], atol=1e-10)
    assert not m.homogeneous


def test_timescale_interpolation_and_rates():
    s = TimeScale([0.0, 1.0, 2.0], [0.0, 2.0, 2.0])
    assert s(0.5) == 1.0
    assert s.rate(1.0, "left") == 2.0
    assert s.rate(1.0, "right") == 0.0


def test_load_samples_must_cover_horizon():
    with pytest.raises(ModelError):
        LoadTrajectory(2.0, TimeScale([0.0, 1.0], [0.0, 1.0]))


def test_ramp_loads():
    L = LoadTrajectory.ramp(1.0, w_profile=lambda x: np.ones((len(x), 2)))
    x = np.zeros((3, 2))
    np.testing.assert_allclose(L.w(0.25, x), 0.25)
    np.testing.assert_allclose(L.w_dot(0.25, x), 1.0)
    assert not L.has_body_force
    np.testing.assert_allclose(L.scaled(2.0).w(0.25, x), 0.5)
