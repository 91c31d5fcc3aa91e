"""Energy release rate at crack tips via the domain-integral shape derivative.

For a velocity field rho transporting the tip along its tangent,

    dE/dsigma = 1/2 int (DC rho) Eu:Eu - int sigma:(grad u grad rho)
                + 1/2 int sigma:Eu div rho + int f.(grad u rho)

and G = -dE/dsigma. With P1 elements and Lamé fields at centroids, the first
three terms are exactly the derivative of the discrete energy when the mesh
nodes move with the nodal field rho.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .fem import DisplacementField, check_mesh_matches, element_gradients, lame_at_centroids, stress, sym
from .geometry import CrackSet, _rot90, clearance_to_tip, tip_and_tangent
from .mesh import CrackedMesh
from .model import LoadTrajectory, MaterialModel


class InfeasibleRadius(ValueError):
    """No cutoff radius satisfies the support and resolution constraints."""


def cutoff_profile(d, r_in: float, r: float):
    """C1 cubic ramp: 1 for d <= r_in, 0 for d >= r. Returns (phi, dphi/dd)."""
    d = np.asarray(d, float)
    s = np.clip((d - r_in) / (r - r_in), 0.0, 1.0)
    phi = 1.0 - 3.0 * s**2 + 2.0 * s**3
    dphi = (-6.0 * s + 6.0 * s**2) / (r - r_in)
    return phi, dphi


@dataclass(eq=False)
class VelocityField:
    """Piecewise-linear velocity rho on a mesh, with per-element gradient.

    ``grad[e, i, j] = d rho_i / d x_j``; ``div`` is its trace.
    """

    mesh: CrackedMesh
    tip_index: int
    tip: np.ndarray
    tangent: np.ndarray
    radius: float
    inner_radius: float
    nodal: np.ndarray
    grad: np.ndarray = field(repr=False, default=None)
    div: np.ndarray = field(repr=False, default=None)
    curvature: float = 0.0

    def __post_init__(self):
        if self.grad is None:
            self.grad = element_gradients(self.mesh, self.nodal)
        self.div = self.grad[:, 0, 0] + self.grad[:, 1, 1]

    @property
    def support_elements(self) -> np.ndarray:
        return np.flatnonzero(np.any(np.abs(self.nodal[self.mesh.triangles]).sum(axis=-1) > 0, axis=1))


def velocity_profile(points, tip, tangent, r_in, r, curvature: float = 0.0) -> np.ndarray:
    """Cutoff times the tip motion: a translation, or a rotation following an arc."""
    x = np.asarray(points, float)
    d = np.linalg.norm(x - tip, axis=1)
    phi, _ = cutoff_profile(d, r_in, r)
    if abs(curvature) < 1e-14:
        v = np.broadcast_to(tangent, x.shape)
    else:
        centre = tip + _rot90(tangent) / curvature
        v = curvature * _rot90(x - centre)
    return phi[:, None] * v


def radius_limits(mesh: CrackedMesh, crack: CrackSet, m: int, domain) -> tuple[float, float, float]:
    """(default, cap, floor) for the cutoff radius at tip ``m``.

    The cap keeps the disk away from the boundary layer carrying the Dirichlet
    lift and from the other components; the floor is four tip element sizes.
    """
    db, do = clearance_to_tip(crack, m, domain)
    cap = min(db - mesh.h, do)
    floor = 4.0 * mesh.tip_size(m)
    default = min(0.9 * min(db, do, 2.0 * crack.eta), cap)
    return default, cap, floor


def build_velocity_field(mesh: CrackedMesh, crack: CrackSet, m: int, r: float | None = None,
                         loads: LoadTrajectory | None = None, domain=None, curvature: float = 0.0,
                         check: bool = True) -> VelocityField:
    """Tip-transport velocity for tip ``m`` with cutoff radius ``r`` (default if None).

    ``domain`` is needed to locate the boundary; ``loads`` is accepted for
    interface symmetry (the Dirichlet lift lives in the boundary element layer).
    """
    if domain is None:
        raise ValueError("domain is required to place the cutoff disk")
    check_mesh_matches(mesh, crack)
    default, cap, floor = radius_limits(mesh, crack, m, domain)
    if r is None:
        r = default
    if check and (floor > cap or r < floor * (1 - 1e-12) or r > cap * (1 + 1e-12)):
        raise InfeasibleRadius(f"tip too close to boundary/other crack (tip {m}: r={r:.4g}, "
                               f"allowed [{floor:.4g}, {cap:.4g}])")
    tip, tan = tip_and_tangent(crack, m)
    nodal = velocity_profile(mesh.nodes, tip, tan, 0.5 * r, r, curvature)
    return VelocityField(mesh, m, tip, tan, float(r), 0.5 * float(r), nodal, curvature=curvature)


@dataclass
class TipErr:
    G: float
    material: float
    convection: float
    dilation: float
    force: float
    radius: float
    sensitivity: float | None = None
    flag: str = ""

    def to_dict(self):
        return dict(self.__dict__)


def energy_release_rate(disp: DisplacementField, material: MaterialModel, loads: LoadTrajectory, t: float,
                        crack: CrackSet, m: int, velocity: VelocityField) -> TipErr:
    """G at tip ``m`` as the sum of four signed domain-integral terms."""
    mesh = disp.mesh
    if velocity.mesh is not mesh and velocity.mesh.n_nodes != mesh.n_nodes:
        raise ValueError("velocity field was built on another mesh")
    if velocity.tip_index != m or np.linalg.norm(velocity.tip - crack.components[m].tip) > 1e-9:
        raise ValueError("velocity field does not belong to this tip")
    sel = velocity.support_elements
    area = mesh.area[sel]
    Gu = element_gradients(mesh, disp.u)[sel]
    eps = sym(Gu)
    lam, mu = lame_at_centroids(mesh, material)
    lam, mu = lam[sel], mu[sel]
    sig = stress(lam, mu, eps)
    Gr = velocity.grad[sel]
    div = velocity.div[sel]

    # convection: sigma_ij d_k u_i d_j rho_k
    conv = float(np.sum(area * np.einsum("eij,eik,ekj->e", sig, Gu, Gr)))
    dil = -0.5 * float(np.sum(area * np.einsum("eij,eij->e", sig, eps) * div))

    mat = 0.0
    if not material.homogeneous:
        c = mesh.centroids[sel]
        rho_c = velocity.nodal[mesh.triangles[sel]].mean(axis=1)
        step = float(np.median(mesh.element_sizes()[sel]))
        gl, gm = material.gradients(c, step)
        dl = np.einsum("ei,ei->e", gl, rho_c)
        dm = np.einsum("ei,ei->e", gm, rho_c)
        tr = eps[:, 0, 0] + eps[:, 1, 1]
        mat = -0.5 * float(np.sum(area * (dl * tr**2 + 2.0 * dm * np.einsum("eij,eij->e", eps, eps))))

    force = 0.0
    if loads.has_body_force:
        p = mesh.nodes[mesh.triangles[sel]]
        q = 0.5 * (p + np.roll(p, -1, axis=1))
        rv = velocity.nodal[mesh.triangles[sel]]
        rq = 0.5 * (rv + np.roll(rv, -1, axis=1))
        f = loads.f(t, q.reshape(-1, 2)).reshape(q.shape)
        force = -float(np.sum(area[:, None] / 3.0 * np.einsum("eqi,eij,eqj->eq", f, Gu, rq)))

    G = mat + conv + dil + force
    return TipErr(G, mat, conv, dil, force, velocity.radius)


@dataclass
class ErrReport:
    t: float
    tips: list

    @property
    def G(self) -> np.ndarray:
        return np.array([e.G for e in self.tips])

    @property
    def flagged(self) -> list[int]:
        return [m for m, e in enumerate(self.tips) if e.flag]

    def to_dict(self):
        return {"t": self.t, "tips": [e.to_dict() for e in self.tips]}


def err_vector(disp: DisplacementField, material: MaterialModel, loads: LoadTrajectory, t: float,
               crack: CrackSet, domain, radii=None, sensitivity: bool = True) -> ErrReport:
    """G at every tip; tips without a feasible radius are flagged with G = nan.

    With ``sensitivity`` the relative change of G when the radius is halved is
    reported (when the halved radius is still feasible).
    """
    out = []
    for m in range(crack.M):
        if crack.components[m].length <= 0:
            out.append(TipErr(math.nan, 0, 0, 0, 0, math.nan, None, "zero-length component"))
            continue
        r = None if radii is None else radii[m]
        try:
            vel = build_velocity_field(disp.mesh, crack, m, r, loads, domain)
        except InfeasibleRadius as exc:
            out.append(TipErr(math.nan, 0, 0, 0, 0, math.nan, None, str(exc)))
            continue
        e = energy_release_rate(disp, material, loads, t, crack, m, vel)
        if sensitivity:
            _, _, floor = radius_limits(disp.mesh, crack, m, domain)
            if 0.5 * vel.radius >= floor:
                v2 = build_velocity_field(disp.mesh, crack, m, 0.5 * vel.radius, loads, domain)
                g2 = energy_release_rate(disp, material, loads, t, crack, m, v2).G
                e.sensitivity = abs(g2 - e.G) / max(abs(e.G), 1e-300) if (e.G or g2) else 0.0
        out.append(e)
    return ErrReport(float(t), out)


@dataclass
class SensitivityReport:
    radii: list
    angles: list
    G_radius: list
    G_angle: list
    spread_radius: float
    spread_angle: float

    @property
    def spread(self) -> float:
        return max(self.spread_radius, self.spread_angle)

    def to_dict(self):
        return dict(self.__dict__)


def _spread(vals):
    v = np.asarray(vals, float)
    if len(v) == 0 or np.all(v == 0):
        return 0.0
    return float((v.max() - v.min()) / max(abs(v.mean()), 1e-300))


def extension_independence_check(disp: DisplacementField, material: MaterialModel, loads: LoadTrajectory, t: float,
                                 crack: CrackSet, m: int, radii, domain, angles=()) -> SensitivityReport:
    """Relative spread of G over cutoff radii and over rotated plateau directions.

    Rotating the plateau by a small angle ``a`` is not a tangential transport; the
    spread over angles is reported after dividing each G by cos(a).
    """
    radii = [float(r) for r in radii]
    if len(radii) < 2:
        raise ValueError("need at least two radii")
    Gr = []
    for r in radii:
        v = build_velocity_field(disp.mesh, crack, m, r, loads, domain)
        Gr.append(energy_release_rate(disp, material, loads, t, crack, m, v).G)
    Ga = []
    for a in angles:
        v = build_velocity_field(disp.mesh, crack, m, radii[0], loads, domain)
        R = np.array([[math.cos(a), -math.sin(a)], [math.sin(a), math.cos(a)]])
        tan = R @ v.tangent
        nodal = velocity_profile(disp.mesh.nodes, v.tip, tan, v.inner_radius, v.radius)
        vr = VelocityField(disp.mesh, m, v.tip, v.tangent, v.radius, v.inner_radius, nodal)
        Ga.append(energy_release_rate(disp, material, loads, t, crack, m, vr).G / math.cos(a))
    return SensitivityReport(radii, list(angles), Gr, Ga, _spread(Gr), _spread(Ga) if Ga else 0.0)


@dataclass
class FiniteDifferenceOracle:
    G_fd: float
    E_plus: float
    E_minus: float
    delta: float
    radius: float

    def to_dict(self):
        return dict(self.__dict__)


def finite_difference_err(mesh: CrackedMesh, crack: CrackSet, m: int, material: MaterialModel,
                          loads: LoadTrajectory, t: float, domain, delta: float = 1e-3,
                          radius: float | None = None) -> FiniteDifferenceOracle:
    """-(E(l + delta) - E(l - delta)) / (2 delta) from two extra solves.

    The perturbed cracks are meshed by moving the nodes of ``mesh`` with a tent
    field of height +-delta along the tip tangent, so both energies are taken on
    the same discretization. Exact tangent extensions need a straight last segment
    inside the tent.
    """
    from dataclasses import replace
    from .fem import energies, solve_equilibrium
    from .geometry import extend_component

    if radius is None:
        radius = radius_limits(mesh, crack, m, domain)[0]
    tip, tan = tip_and_tangent(crack, m)
    tent = np.maximum(0.0, 1.0 - np.linalg.norm(mesh.nodes - tip, axis=1) / radius)[:, None] * tan[None]
    comp = crack.components[m]
    shorter = replace(comp, frozen_prefix_len=0.0, tip_tangent=None).truncated(comp.length - delta)
    shorter = replace(shorter, frozen_prefix_len=min(comp.frozen_prefix_len, shorter.length))
    cracks = {+1: extend_component(crack, m, delta, 0.0), -1: crack.with_component(m, shorter)}
    E = {}
    for s in (+1, -1):
        moved = mesh.moved(s * delta * tent)
        d = solve_equilibrium(moved, material, loads, t)
        E[s] = energies(d, material, loads, t, cracks[s]).elastic
    return FiniteDifferenceOracle(-(E[1] - E[-1]) / (2 * delta), E[1], E[-1], delta, float(radius))
