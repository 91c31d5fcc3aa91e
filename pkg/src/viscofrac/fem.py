"""P1 plane-strain elasticity on cracked meshes."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.sparse.csgraph import connected_components

from .geometry import CrackSet
from .mesh import DIRICHLET, TRACTION, CrackedMesh
from .model import LoadTrajectory, MaterialModel

# Gauss-Legendre on [0, 1], three points
_GL_X = 0.5 + 0.5 * np.array([-np.sqrt(0.6), 0.0, np.sqrt(0.6)])
_GL_W = np.array([5.0, 8.0, 5.0]) / 18.0


class SolverError(RuntimeError):
    """The discrete equilibrium problem could not be solved."""


class StructuralError(ValueError):
    """Inputs that do not belong together (e.g. a mesh built for another crack)."""


def element_gradients(mesh: CrackedMesh, u: np.ndarray) -> np.ndarray:
    """Per-element displacement gradient, ``G[e, i, j] = d u_i / d x_j``."""
    return np.einsum("eai,eaj->eij", u[mesh.triangles], mesh.grads)


def sym(G: np.ndarray) -> np.ndarray:
    return 0.5 * (G + np.swapaxes(G, -1, -2))


def stress(lam, mu, eps):
    """Isotropic stress lam tr(eps) I + 2 mu eps, elementwise."""
    tr = eps[..., 0, 0] + eps[..., 1, 1]
    s = 2.0 * mu[..., None, None] * eps
    s[..., 0, 0] += lam * tr
    s[..., 1, 1] += lam * tr
    return s


def lame_at_centroids(mesh: CrackedMesh, material: MaterialModel):
    c = mesh.centroids
    return np.asarray(material.lam(c), float), np.asarray(material.mu(c), float)


def assemble_stiffness(mesh: CrackedMesh, material: MaterialModel) -> sp.csr_matrix:
    """Global stiffness with Lamé fields evaluated at element centroids."""
    lam, mu = lame_at_centroids(mesh, material)
    if np.any(mu <= 0) or np.any(lam + mu <= 0):
        raise SolverError("stiffness not positive definite at a quadrature point")
    g = mesh.grads
    E = mesh.n_elements
    # B: (E, 3 strain comps, 6 dofs), engineering shear
    B = np.zeros((E, 3, 6))
    B[:, 0, 0::2] = g[:, :, 0]
    B[:, 1, 1::2] = g[:, :, 1]
    B[:, 2, 0::2] = g[:, :, 1]
    B[:, 2, 1::2] = g[:, :, 0]
    D = np.zeros((E, 3, 3))
    D[:, 0, 0] = D[:, 1, 1] = lam + 2 * mu
    D[:, 0, 1] = D[:, 1, 0] = lam
    D[:, 2, 2] = mu
    Ke = np.einsum("e,eki,ekl,elj->eij", mesh.area, B, D, B)
    dofs = np.empty((E, 6), np.int64)
    dofs[:, 0::2] = 2 * mesh.triangles
    dofs[:, 1::2] = 2 * mesh.triangles + 1
    rows = np.repeat(dofs, 6, axis=1).ravel()
    cols = np.tile(dofs, (1, 6)).ravel()
    n = 2 * mesh.n_nodes
    K = sp.coo_matrix((Ke.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    K.sum_duplicates()
    return K


def _body_quadrature(mesh: CrackedMesh):
    """Edge-midpoint rule: points (E, 3, 2) and barycentric weights (3, 3)."""
    p = mesh.nodes[mesh.triangles]
    q = 0.5 * (p + np.roll(p, -1, axis=1))  # midpoint of edge (a, a+1)
    N = np.array([[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]])  # N[q, a]
    return q, N


def body_load_vector(mesh: CrackedMesh, fvals_fn) -> np.ndarray:
    """Consistent load vector of a body force given as a point-evaluation callable."""
    q, N = _body_quadrature(mesh)
    f = np.asarray(fvals_fn(q.reshape(-1, 2)), float).reshape(q.shape)
    fe = np.einsum("e,qa,eqi->eai", mesh.area / 3.0, N, f)
    out = np.zeros((mesh.n_nodes, 2))
    np.add.at(out, mesh.triangles, fe)
    return out


def traction_load_vector(mesh: CrackedMesh, gvals_fn) -> np.ndarray:
    sel = mesh.facet_kind == TRACTION
    out = np.zeros((mesh.n_nodes, 2))
    if not np.any(sel):
        return out
    fac = mesh.facets[sel]
    a, b = mesh.nodes[fac[:, 0]], mesh.nodes[fac[:, 1]]
    L = np.linalg.norm(b - a, axis=1)
    pts = a[:, None] + _GL_X[None, :, None] * (b - a)[:, None]
    g = np.asarray(gvals_fn(pts.reshape(-1, 2)), float).reshape(pts.shape)
    wa = (_GL_W * (1 - _GL_X))[None, :, None]
    wb = (_GL_W * _GL_X)[None, :, None]
    np.add.at(out, fac[:, 0], L[:, None] * (wa * g).sum(axis=1))
    np.add.at(out, fac[:, 1], L[:, None] * (wb * g).sum(axis=1))
    return out


@dataclass(eq=False)
class DisplacementField:
    """Equilibrium displacement on a mesh at time ``t``."""

    mesh: CrackedMesh
    u: np.ndarray
    t: float
    dirichlet_nodes: np.ndarray
    dirichlet_values: np.ndarray
    residual: float
    K: sp.csr_matrix = field(repr=False, default=None)
    F_body: np.ndarray = field(repr=False, default=None)
    F_trac: np.ndarray = field(repr=False, default=None)

    @property
    def grad(self) -> np.ndarray:
        return element_gradients(self.mesh, self.u)

    @property
    def strain(self) -> np.ndarray:
        return sym(self.grad)

    def functional(self, v: np.ndarray) -> float:
        """Discrete potential energy of an arbitrary nodal field ``v``."""
        v = np.asarray(v, float).reshape(-1)
        return float(0.5 * v @ (self.K @ v) - v @ (self.F_body.ravel() + self.F_trac.ravel()))


@dataclass
class EnergyReport:
    stored: float
    body_work: float
    traction_work: float
    elastic: float
    surface: float
    total: float

    def to_dict(self):
        return dict(self.__dict__)


def _check_dirichlet_support(mesh: CrackedMesh, dnodes: np.ndarray):
    if len(dnodes) < 2:
        raise SolverError("insufficient Dirichlet data")
    T = mesh.triangles
    r = np.concatenate([T[:, 0], T[:, 1], T[:, 2]])
    c = np.concatenate([T[:, 1], T[:, 2], T[:, 0]])
    A = sp.coo_matrix((np.ones(len(r)), (r, c)), shape=(mesh.n_nodes, mesh.n_nodes))
    ncomp, lab = connected_components(A, directed=False)
    counts = np.bincount(lab[dnodes], minlength=ncomp)
    used = np.bincount(lab[T.ravel()], minlength=ncomp) > 0
    if np.any(used & (counts < 2)):
        raise SolverError("insufficient Dirichlet data")


def solve_equilibrium(mesh: CrackedMesh, material: MaterialModel, loads: LoadTrajectory, t: float,
                      rtol: float = 1e-10, solver: str = "direct", K: sp.csr_matrix | None = None) -> DisplacementField:
    """Minimize the discrete potential energy with u = w(t) on Dirichlet nodes.

    ``solver`` is ``"direct"`` (sparse LU) or ``"cg"`` (Jacobi-preconditioned CG).
    A precomputed stiffness ``K`` for the same mesh and material may be passed.
    """
    dn = mesh.dirichlet_nodes
    _check_dirichlet_support(mesh, dn)
    if K is None:
        K = assemble_stiffness(mesh, material)
    Fb = body_load_vector(mesh, lambda x: loads.f(t, x)) if loads.has_body_force else np.zeros((mesh.n_nodes, 2))
    Fg = traction_load_vector(mesh, lambda x: loads.g(t, x)) if loads.has_traction else np.zeros((mesh.n_nodes, 2))
    F = (Fb + Fg).ravel()
    wD = loads.w(t, mesh.nodes[dn])
    n = 2 * mesh.n_nodes
    fixed = np.zeros(n, bool)
    fixed[2 * dn] = fixed[2 * dn + 1] = True
    u = np.zeros(n)
    u[2 * dn] = wD[:, 0]
    u[2 * dn + 1] = wD[:, 1]
    free = ~fixed
    Kff = K[free][:, free].tocsc()
    rhs = F[free] - K[free][:, fixed] @ u[fixed]
    if solver == "direct":
        try:
            uf = spla.spsolve(Kff, rhs)
        except RuntimeError as exc:
            raise SolverError(f"sparse factorization failed: {exc}") from exc
    elif solver == "cg":
        d = Kff.diagonal()
        Mpre = spla.LinearOperator(Kff.shape, matvec=lambda x: x / d)
        uf, info = spla.cg(Kff, rhs, rtol=rtol * 1e-2, atol=0.0, M=Mpre, maxiter=20 * Kff.shape[0])
        if info != 0:
            raise SolverError(f"CG did not converge (info={info})")
    else:
        raise ValueError(f"unknown solver {solver!r}")
    if not np.all(np.isfinite(uf)):
        raise SolverError("non-finite solution")
    u[free] = uf
    res = float(np.linalg.norm(Kff @ uf - rhs))
    scale = max(float(np.linalg.norm(rhs)), float(np.linalg.norm(F)), 1e-300)
    if res > rtol * scale and res > 1e-14:
        raise SolverError(f"residual {res:.3g} above tolerance")
    return DisplacementField(mesh, u.reshape(-1, 2), float(t), dn, wD, res / scale, K, Fb, Fg)


def surface_energy(crack: CrackSet, material: MaterialModel) -> float:
    """Sum over components of the line integral of kappa (3-point Gauss per segment)."""
    total = 0.0
    for c in crack.components:
        if c.nsegments == 0:
            continue
        a, b = c.vertices[:-1], c.vertices[1:]
        L = np.linalg.norm(b - a, axis=1)
        pts = a[:, None] + _GL_X[None, :, None] * (b - a)[:, None]
        k = np.asarray(material.kappa(pts.reshape(-1, 2)), float).reshape(len(a), 3)
        total += float(np.sum(L * (k @ _GL_W)))
    return total


def check_mesh_matches(mesh: CrackedMesh, crack: CrackSet, tol: float = 1e-9):
    if len(mesh.tips) != crack.M:
        raise StructuralError("mesh and crack have different numbers of components")
    for m, c in enumerate(crack.components):
        if np.linalg.norm(mesh.tips[m] - c.tip) > tol:
            raise StructuralError(f"mesh was built for a different crack (tip {m} differs)")


def energies(disp: DisplacementField, material: MaterialModel, loads: LoadTrajectory, t: float,
             crack: CrackSet | None) -> EnergyReport:
    """Elastic, surface and total energy of an equilibrium state.

    ``crack=None`` is allowed for uncracked meshes and contributes no surface energy.
    """
    if crack is not None:
        check_mesh_matches(disp.mesh, crack)
    u = disp.u.ravel()
    stored = 0.5 * float(u @ (disp.K @ u))
    bw = float(np.sum(disp.F_body * disp.u))
    tw = float(np.sum(disp.F_trac * disp.u))
    el = stored - bw - tw
    K = surface_energy(crack, material) if crack is not None else 0.0
    return EnergyReport(stored, bw, tw, el, K, el + K)


def dirichlet_lift(mesh: CrackedMesh, values_fn) -> np.ndarray:
    """Nodal field equal to ``values_fn`` on Dirichlet nodes and zero elsewhere."""
    out = np.zeros((mesh.n_nodes, 2))
    dn = mesh.dirichlet_nodes
    out[dn] = values_fn(mesh.nodes[dn])
    return out


def load_power(disp: DisplacementField, material: MaterialModel, loads: LoadTrajectory, t: float,
               side: str = "right") -> dict:
    """Work-rate terms of the energy balance for a state ``disp`` at time ``t``.

    ``side`` picks the load interval whose rates are used. Returns the pieces and
    their combination ``power = dE/dt`` at fixed crack.
    """
    mesh = disp.mesh
    wdot = dirichlet_lift(mesh, lambda x: loads.w_dot(t, x, side)).ravel()
    u = disp.u.ravel()
    cw = float(wdot @ (disp.K @ u))
    fdu = fw = gdu = gw = 0.0
    if loads.has_body_force:
        Fd = body_load_vector(mesh, lambda x: loads.f_dot(t, x, side))
        fdu = float(np.sum(Fd * disp.u))
        fw = float(disp.F_body.ravel() @ wdot)
    if loads.has_traction:
        Gd = traction_load_vector(mesh, lambda x: loads.g_dot(t, x, side))
        gdu = float(np.sum(Gd * disp.u))
        gw = float(disp.F_trac.ravel() @ wdot)
    return {"stress_wdot": cw, "fdot_u": fdu, "f_wdot": fw, "gdot_u": gdu, "g_wdot": gw,
            "power": cw - fdu - fw - gdu - gw}


def test_function_energy_bound(mesh: CrackedMesh, material: MaterialModel, loads: LoadTrajectory, t: float,
                               v: np.ndarray, disp: DisplacementField | None = None, rel_tol: float = 1e-10) -> bool:
    """Minimality check: the functional at ``v`` is not below its value at the solution.

    ``v`` must match the Dirichlet data at time ``t``. Pass ``disp`` to reuse a solve.
    """
    if disp is None:
        disp = solve_equilibrium(mesh, material, loads, t)
    v = np.asarray(v, float).reshape(-1, 2)
    if not np.allclose(v[disp.dirichlet_nodes], disp.dirichlet_values, atol=1e-12, rtol=0):
        raise ValueError("test field violates the Dirichlet condition")
    fu = disp.functional(disp.u)
    fv = disp.functional(v)
    u = disp.u.ravel()
    scale = max(abs(fu), 0.5 * float(u @ (disp.K @ u)), 1e-300)
    return fv >= fu - rel_tol * scale


test_function_energy_bound.__test__ = False
