import numpy as np
import pytest

from viscofrac.err import (InfeasibleRadius, build_velocity_field, cutoff_profile, err_vector,
                           extension_independence_check, finite_difference_err, radius_limits)
from viscofrac.fem import solve_equilibrium
from viscofrac.mesh import build_mesh

from conftest import edge_crack

H = 1 / 32


@pytest.fixture(scope="module")
def state(square, material, loads):
    crack = edge_crack(0.3)
    mesh = build_mesh(square, crack, H)
    return crack, mesh, solve_equilibrium(mesh, material, loads, 1.0)


def test_cutoff_profile_shape():
    d = np.array([0.0, 0.5, 0.75, 1.0, 2.0])
    phi, dphi = cutoff_profile(d, 0.5, 1.0)
    np.testing.assert_allclose(phi, [1, 1, 0.5, 0, 0], atol=1e-12)
    np.testing.assert_allclose(dphi, [0, 0, -3, 0, 0], atol=1e-12)
    # derivative agrees with a central difference
    e = 1e-6
    fd = (cutoff_profile(0.6 + e, 0.5, 1.0)[0] - cutoff_profile(0.6 - e, 0.5, 1.0)[0]) / (2 * e)
    assert fd == pytest.approx(cutoff_profile(0.6, 0.5, 1.0)[1], rel=1e-6)


def test_err_positive_and_bounded(state, material, loads, square):
    crack, mesh, disp = state
    rep = err_vector(disp, material, loads, 1.0, crack, square)
    assert rep.flagged == []
    assert 0 < rep.G[0] < 100
    assert rep.tips[0].sensitivity < 0.02


def test_err_scales_with_load_squared(state, material, loads, square):
    crack, mesh, _ = state
    g = [err_vector(solve_equilibrium(mesh, material, loads, t), material, loads, t, crack, square,
                    sensitivity=False).G[0] for t in (0.5, 1.0)]
    assert g[1] == pytest.approx(4 * g[0], rel=1e-10)


def test_matches_finite_difference_oracle(state, material, loads, square):
    crack, mesh, disp = state
    G = err_vector(disp, material, loads, 1.0, crack, square, sensitivity=False).G[0]
    fd = finite_difference_err(mesh, crack, 0, material, loads, 1.0, square)
    assert fd.G_fd > 0
    assert G == pytest.approx(fd.G_fd, rel=1e-2)


def test_cutoff_radius_independence(state, material, loads, square):
    crack, mesh, disp = state
    default, cap, floor = radius_limits(mesh, crack, 0, square)
    radii = np.linspace(max(floor, 0.3 * default), default, 4)
    rep = extension_independence_check(disp, material, loads, 1.0, crack, 0, radii, square, angles=(0.05,))
    assert rep.spread_radius < 1e-2
    assert rep.spread_angle < 2e-2


def test_radius_outside_limits_rejected(state, loads, square):
    crack, mesh, _ = state
    _, cap, _ = radius_limits(mesh, crack, 0, square)
    with pytest.raises(InfeasibleRadius):
        build_velocity_field(mesh, crack, 0, 1.5 * cap, loads, square)
